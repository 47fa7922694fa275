#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "tcoh/checkpoint.hpp"
#include "tcoh/config.hpp"
#include "tcoh/data.hpp"
#include "tcoh/train.hpp"

using namespace tcoh;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string output;
};

Run tcoh_cli(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "tcoh_cli_test_output.txt";
  const std::string cmd = env + " \"" TCOH_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a)) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b)) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& rel : fa)
    if (fs::is_regular_file(a / rel) && slurp(a / rel) != slurp(b / rel)) return false;
  return true;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kRotatingConfig = R"({
  "seed": 3, "epochs": 4, "record_wall_clock": false,
  "sgd": {"learning_rate": 0.01, "momentum": 0.9, "weight_decay": 0.1},
  "ul_defaults": {"mu_top": 0.5, "eps": 0.001},
  "network": {"layers": [{"type": "linear", "out": 2, "ul": true}]},
  "data": {"generator": "rotating", "noise": 0.1, "seed": 3},
  "eval": {"kind": "decode-angle", "data": {"generator": "rotating", "seed": 4}}
})";

}  // namespace

TEST_CASE("gen-data rotating") {
  const fs::path dir = testutil::scratch_dir("cli_gen");
  const Run r = tcoh_cli("gen-data rotating --points 28 --deg 5 --seed 1 --out " + (dir / "a").string());
  REQUIRE(r.code == 0);
  const auto ds = data::load_image_sequence(dir / "a" / "manifest.json");
  CHECK(ds.frame_count() == 72);
  CHECK(ds.frame_shape() == Tensor::Shape{56});

  CHECK(tcoh_cli("gen-data rotating --seed 1 --out " + (dir / "b").string()).code == 0);
  CHECK(same_tree(dir / "a", dir / "b"));

  CHECK(tcoh_cli("gen-data rotating --noise 0.5 --out " + (dir / "n5").string()).code == 0);
  const Run too_noisy = tcoh_cli("gen-data rotating --noise 0.6 --out " + (dir / "n6").string());
  CHECK(too_noisy.code == 2);
  CHECK(too_noisy.output.find("noise") != std::string::npos);
  CHECK(tcoh_cli("gen-data rotating --deg 7 --out " + (dir / "d7").string()).code == 2);
}

TEST_CASE("seed falls back to TCOH_SEED") {
  const fs::path dir = testutil::scratch_dir("cli_seed");
  CHECK(tcoh_cli("gen-data rotating --noise 0.2 --seed 9 --out " + (dir / "flag").string()).code == 0);
  CHECK(tcoh_cli("gen-data rotating --noise 0.2 --out " + (dir / "env").string(), "TCOH_SEED=9").code == 0);
  CHECK(tcoh_cli("gen-data rotating --noise 0.2 --out " + (dir / "other").string(), "TCOH_SEED=10").code == 0);
  CHECK(same_tree(dir / "flag", dir / "env"));
  CHECK(!same_tree(dir / "flag", dir / "other"));
}

TEST_CASE("gen-data moving-square") {
  const fs::path dir = testutil::scratch_dir("cli_square");
  const Run r = tcoh_cli("gen-data moving-square --size 32 --square 4 --frames 5 --sequences 2 --seed 2 --out " +
                         (dir / "sq").string());
  REQUIRE(r.code == 0);
  const auto ds = data::load_image_sequence(dir / "sq" / "manifest.json");
  CHECK(ds.sequences.size() == 2);
  CHECK(ds.frame_shape() == Tensor::Shape{1, 32, 32});
  CHECK(ds.has_ground_truth());
  CHECK(tcoh_cli("gen-data moving-square --size 4 --square 8 --out " + (dir / "bad").string()).code == 2);
}

TEST_CASE("usage errors exit 2") {
  CHECK(tcoh_cli("").code == 2);
  CHECK(tcoh_cli("frobnicate").code == 2);
  CHECK(tcoh_cli("train").code == 2);
  CHECK(tcoh_cli("gen-data rotating --points abc --out /tmp/x").code == 2);
}

TEST_CASE("train writes metrics and a checkpoint") {
  const fs::path dir = testutil::scratch_dir("cli_train");
  write_file(dir / "cfg.json", kRotatingConfig);
  const Run r = tcoh_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "out").string());
  REQUIRE(r.code == 0);
  const auto rows = read_metrics_csv(dir / "out" / "metrics.csv");
  REQUIRE(rows.size() == 4);
  for (int e = 0; e < 4; ++e) {
    CHECK(rows[e].epoch == e + 1);
    CHECK(rows[e].seconds == 0.0);
    CHECK(std::isfinite(rows[e].eval_metric));
  }
  const Checkpoint ck = load_checkpoint(dir / "out" / "checkpoint.bin");
  CHECK(ck.epochs_completed == 4);

  // a second run reproduces both files byte for byte
  CHECK(tcoh_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "again").string()).code == 0);
  CHECK(slurp(dir / "out" / "metrics.csv") == slurp(dir / "again" / "metrics.csv"));
  CHECK(slurp(dir / "out" / "checkpoint.bin") == slurp(dir / "again" / "checkpoint.bin"));
}

TEST_CASE("zero epochs saves the initialization") {
  const fs::path dir = testutil::scratch_dir("cli_init");
  write_file(dir / "cfg.json", kRotatingConfig);
  REQUIRE(tcoh_cli("train --epochs 0 --config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string()).code == 0);
  const auto cfg = config::load_config(dir / "cfg.json");
  const Network init = config::build_network(cfg, {56});
  const Checkpoint ck = load_checkpoint(dir / "o" / "checkpoint.bin");
  CHECK(ck.network == init);
  CHECK(ck.epochs_completed == 0);
  CHECK(read_metrics_csv(dir / "o" / "metrics.csv").empty());
}

TEST_CASE("resume continues bit-exactly") {
  const fs::path dir = testutil::scratch_dir("cli_resume");
  write_file(dir / "cfg.json", kRotatingConfig);
  const std::string cfg = " --config " + (dir / "cfg.json").string();
  REQUIRE(tcoh_cli("train" + cfg + " --out " + (dir / "full").string()).code == 0);
  REQUIRE(tcoh_cli("train --epochs 2" + cfg + " --out " + (dir / "part").string()).code == 0);
  CHECK(load_checkpoint(dir / "part" / "checkpoint.bin").epochs_completed == 2);
  REQUIRE(tcoh_cli("train" + cfg + " --out " + (dir / "part").string() + " --resume " +
                   (dir / "part" / "checkpoint.bin").string())
              .code == 0);
  CHECK(slurp(dir / "full" / "checkpoint.bin") == slurp(dir / "part" / "checkpoint.bin"));
  CHECK(slurp(dir / "full" / "metrics.csv") == slurp(dir / "part" / "metrics.csv"));
}

TEST_CASE("train exit codes") {
  const fs::path dir = testutil::scratch_dir("cli_train_err");
  write_file(dir / "typo.json", std::string(kRotatingConfig).replace(std::string(kRotatingConfig).find("\"seed\""), 6, "\"sed\""));
  const Run typo = tcoh_cli("train --config " + (dir / "typo.json").string() + " --out " + (dir / "o").string());
  CHECK(typo.code == 2);
  CHECK(typo.output.find("sed") != std::string::npos);
  CHECK(tcoh_cli("train --config " + (dir / "missing.json").string() + " --out " + (dir / "o").string()).code == 2);

  std::string wild = kRotatingConfig;
  wild.replace(wild.find("\"learning_rate\": 0.01"), 21, "\"learning_rate\": 1e300");
  write_file(dir / "wild.json", wild);
  const Run div = tcoh_cli("train --config " + (dir / "wild.json").string() + " --out " + (dir / "w").string());
  CHECK(div.code == 3);
  CHECK(div.output.find("epoch 1") != std::string::npos);
  CHECK(div.output.find("frame") != std::string::npos);
}

TEST_CASE("closed-form on a rotation") {
  const fs::path dir = testutil::scratch_dir("cli_cf");
  REQUIRE(tcoh_cli("gen-data rotating --seed 1 --out " + (dir / "d").string()).code == 0);
  const std::string data = " --data " + (dir / "d" / "manifest.json").string();

  REQUIRE(tcoh_cli("closed-form --dim 2 --chain cycle" + data + " --out " + (dir / "cyc").string()).code == 0);
  const auto y = data::read_csv(dir / "cyc" / "embedding.csv");
  REQUIRE(y.size() == 72);
  const double radius = std::hypot(y[0][0], y[0][1]);
  for (const auto& row : y) CHECK(std::abs(std::hypot(row[0], row[1]) - radius) < 1e-6);
  json diag = json::parse(slurp(dir / "cyc" / "diagnostics.json"));
  CHECK(diag["stationarity_residual"].get<double>() < 1e-8);
  CHECK(diag["states"].get<int>() == 72);
  CHECK(std::abs(diag["objective"].get<double>() - diag["j_opt"].get<double>()) < 1e-8);

  REQUIRE(tcoh_cli("closed-form --dim 2" + data + " --out " + (dir / "path").string()).code == 0);
  diag = json::parse(slurp(dir / "path" / "diagnostics.json"));
  CHECK(diag["chain"].get<std::string>() == "path");
  CHECK(diag["stationarity_residual"].get<double>() < 1e-8);

  CHECK(tcoh_cli("closed-form --dim 72" + data + " --out " + (dir / "bad").string()).code == 2);
  CHECK(tcoh_cli("closed-form --dim 2 --chain star" + data + " --out " + (dir / "bad").string()).code == 2);

  // a 90 degree rotation turns the embedding
  write_file(dir / "rot.csv", "0,-1\n1,0\n");
  REQUIRE(tcoh_cli("closed-form --dim 2 --chain cycle --rotation " + (dir / "rot.csv").string() + data + " --out " +
                   (dir / "rot").string())
              .code == 0);
  const auto yr = data::read_csv(dir / "rot" / "embedding.csv");
  for (std::size_t i = 0; i < 72; ++i) {
    CHECK(std::abs(yr[i][0] - y[i][1]) < 1e-12);
    CHECK(std::abs(yr[i][1] + y[i][0]) < 1e-12);
  }
}

TEST_CASE("gradcheck") {
  const Run ok = tcoh_cli("gradcheck --seed 1");
  CHECK(ok.code == 0);
  for (const char* suite : {"linear", "conv2d_valid", "conv2d_same", "tanh", "batch_gradient"})
    CHECK(ok.output.find(suite) != std::string::npos);
  const Run bad = tcoh_cli("gradcheck --seed 1 --corrupt tanh");
  CHECK(bad.code == 4);
  CHECK(bad.output.find("FAIL") != std::string::npos);
  CHECK(tcoh_cli("gradcheck --corrupt nonsense").code == 2);
}

TEST_CASE("eval") {
  const fs::path dir = testutil::scratch_dir("cli_eval");
  write_file(dir / "cfg.json", kRotatingConfig);
  REQUIRE(tcoh_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string()).code == 0);
  REQUIRE(tcoh_cli("gen-data rotating --seed 4 --out " + (dir / "test").string()).code == 0);
  const std::string ckpt = " --checkpoint " + (dir / "o" / "checkpoint.bin").string();
  const Run r = tcoh_cli("eval --kind decode-angle" + ckpt + " --data " + (dir / "test" / "manifest.json").string() +
                         " --out " + (dir / "eval.json").string());
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "eval.json"));
  CHECK(j["r2"].get<double>() > 0.9);
  CHECK(j.contains("total_abs_error"));

  // ground truth stripped from the manifest
  json manifest = json::parse(slurp(dir / "test" / "manifest.json"));
  for (auto& s : manifest["sequences"]) s.erase("ground_truth");
  write_file(dir / "test" / "nogt.json", manifest.dump());
  CHECK(tcoh_cli("eval --kind decode-angle" + ckpt + " --data " + (dir / "test" / "nogt.json").string()).code == 2);
  CHECK(tcoh_cli("eval --kind decode-angle --checkpoint " + (dir / "none.bin").string() + " --data " +
                 (dir / "test" / "manifest.json").string())
            .code == 2);
}
