// tcoh: temporal-coherence learning from the command line.
//
//   tcoh gen-data rotating --points 28 --deg 5 --seed 1 --out data/rot
//   tcoh gen-data moving-square --trajectory bounce --out data/sq
//   tcoh train --config exp.json --out runs/exp [--resume runs/exp/checkpoint.bin]
//   tcoh closed-form --data data/rot/manifest.json --dim 2 --out runs/cf
//   tcoh gradcheck --seed 1
//   tcoh eval --checkpoint runs/exp/checkpoint.bin --data data/rot/manifest.json --kind decode-angle

#include <iostream>

#include <CLI11.hpp>

#include "tcoh/commands.hpp"
#include "tcoh/config.hpp"
#include "tcoh/error.hpp"

namespace cmd = tcoh::commands;

int main(int argc, char** argv) {
  CLI::App app{"Temporal-coherence unsupervised learning: UL layers and closed-form spectral embedding"};
  app.require_subcommand(1);

  // Seeds given on the command line win over $TCOH_SEED, which wins over 1.
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto resolve_seed = [&]() { return seed_given ? seed : tcoh::config::env_seed(1); };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->require_subcommand(1);

  tcoh::data::RotatingPointsSpec rot;
  std::string rot_out;
  auto* gen_rot = gen->add_subcommand("rotating", "Rigid 2-D point set rotating about its centroid");
  gen_rot->add_option("--points", rot.num_points, "Number of points")->capture_default_str();
  gen_rot->add_option("--deg", rot.degrees_per_frame, "Degrees per frame")->capture_default_str();
  gen_rot->add_option("--revolutions", rot.num_revolutions, "Full turns")->capture_default_str();
  gen_rot->add_option("--noise", rot.noise_level, "Noise std relative to the signal std, in [0, 0.5]")
      ->capture_default_str();
  gen_rot->add_option("--seed", seed, "Seed (default $TCOH_SEED or 1)")->each([&](const std::string&) {
    seed_given = true;
  });
  gen_rot->add_option("--out", rot_out, "Output directory")->required();

  tcoh::data::MovingSquareSpec sq;
  std::string sq_out, sq_traj = "bounce";
  std::size_t sq_size = 0;
  auto* gen_sq = gen->add_subcommand("moving-square", "Binary square moving over a dark background");
  gen_sq->add_option("--size", sq_size, "Square image side (sets height and width)");
  gen_sq->add_option("--height", sq.height, "Image height")->capture_default_str();
  gen_sq->add_option("--width", sq.width, "Image width")->capture_default_str();
  gen_sq->add_option("--square", sq.square_size, "Square side")->capture_default_str();
  gen_sq->add_option("--trajectory", sq_traj, "static | bounce | random-walk")->capture_default_str();
  gen_sq->add_option("--frames", sq.frames_per_sequence, "Frames per sequence")->capture_default_str();
  gen_sq->add_option("--sequences", sq.sequences, "Number of sequences")->capture_default_str();
  gen_sq->add_option("--seed", seed, "Seed (default $TCOH_SEED or 1)")->each([&](const std::string&) {
    seed_given = true;
  });
  gen_sq->add_option("--out", sq_out, "Output directory")->required();

  cmd::TrainArgs train;
  std::string train_config, train_out, train_resume;
  int train_epochs = -1;
  auto* tr = app.add_subcommand("train", "Online training with UL layers");
  tr->add_option("--config", train_config, "Experiment config (JSON)")->required();
  tr->add_option("--out", train_out, "Output directory for metrics.csv and checkpoint.bin")->required();
  tr->add_option("--resume", train_resume, "Checkpoint to continue from");
  tr->add_option("--epochs", train_epochs, "Total epochs (overrides the config)");

  cmd::ClosedFormArgs cf;
  std::string cf_data, cf_out, cf_rotation, cf_chain = "path";
  auto* cfc = app.add_subcommand("closed-form", "Closed-form embedding of the frame chain");
  cfc->add_option("--data", cf_data, "Dataset manifest")->required();
  cfc->add_option("--dim", cf.dim, "Embedding dimension")->capture_default_str();
  cfc->add_option("--out", cf_out, "Output directory")->required();
  cfc->add_option("--chain", cf_chain, "path | cycle (adds the last-to-first pair)")
      ->check(CLI::IsMember({"path", "cycle"}))
      ->capture_default_str();
  cfc->add_option("--rotation", cf_rotation, "d x d orthonormal rotation (CSV)");

  tcoh::gradcheck::Options gc;
  auto* gcc = app.add_subcommand("gradcheck", "Finite-difference checks of every analytic gradient");
  gcc->add_option("--seed", seed, "Seed (default $TCOH_SEED or 1)")->each([&](const std::string&) {
    seed_given = true;
  });
  gcc->add_option("--instances", gc.instances, "Random instances per suite")->capture_default_str();
  gcc->add_option("--max-dim", gc.max_dim, "Largest output dimension for the batch objective")->capture_default_str();
  gcc->add_option("--max-samples", gc.max_samples, "Largest batch size for the batch objective")
      ->capture_default_str();
  gcc->add_option("--corrupt", gc.corrupt, "Perturb one suite's analytic gradient (harness self-test)")
      ->check(CLI::IsMember(tcoh::gradcheck::suite_names()));

  cmd::EvalArgs ev;
  std::string ev_ckpt, ev_data, ev_out;
  auto* evc = app.add_subcommand("eval", "Score a checkpoint on a dataset with ground truth");
  evc->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  evc->add_option("--data", ev_data, "Dataset manifest")->required();
  evc->add_option("--kind", ev.kind, "decode-angle | localize")
      ->check(CLI::IsMember({"decode-angle", "localize"}))
      ->capture_default_str();
  evc->add_option("--out", ev_out, "Also write the metrics to this JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cmd::kOk : cmd::kUsage;
  }

  try {
    if (gen_rot->parsed()) {
      rot.seed = resolve_seed();
      return cmd::cmd_gen_rotating(rot, rot_out, std::cout, std::cerr);
    }
    if (gen_sq->parsed()) {
      if (sq_size != 0) sq.height = sq.width = sq_size;
      sq.seed = resolve_seed();
      sq.trajectory = tcoh::data::parse_trajectory(sq_traj);
      return cmd::cmd_gen_square(sq, sq_out, std::cout, std::cerr);
    }
    if (tr->parsed()) {
      train.config = train_config;
      train.out_dir = train_out;
      if (!train_resume.empty()) train.resume = train_resume;
      if (train_epochs >= 0) train.epochs = train_epochs;
      return cmd::cmd_train(train, std::cout, std::cerr);
    }
    if (cfc->parsed()) {
      cf.manifest = cf_data;
      cf.out_dir = cf_out;
      cf.chain = cf_chain == "cycle" ? cmd::ChainKind::cycle : cmd::ChainKind::path;
      if (!cf_rotation.empty()) cf.rotation = cf_rotation;
      return cmd::cmd_closed_form(cf, std::cout, std::cerr);
    }
    if (gcc->parsed()) {
      gc.seed = resolve_seed();
      return cmd::cmd_gradcheck(gc, std::cout, std::cerr);
    }
    if (evc->parsed()) {
      ev.checkpoint = ev_ckpt;
      ev.manifest = ev_data;
      if (!ev_out.empty()) ev.out_json = ev_out;
      return cmd::cmd_eval(ev, std::cout, std::cerr);
    }
  } catch (const tcoh::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cmd::kUsage;
  }
  return cmd::kUsage;
}
