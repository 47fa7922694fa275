#pragma once

// Subcommand implementations behind the `tcoh` executable. Each returns the
// process exit code and writes human-readable output to `out`, diagnostics to
// `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "tcoh/data.hpp"
#include "tcoh/gradcheck.hpp"

namespace tcoh::commands {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDivergence = 3,
  kCheckFailed = 4,
};

int cmd_gen_rotating(const data::RotatingPointsSpec& spec, const std::filesystem::path& out_dir, std::ostream& out,
                     std::ostream& err);
int cmd_gen_square(const data::MovingSquareSpec& spec, const std::filesystem::path& out_dir, std::ostream& out,
                   std::ostream& err);

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  std::optional<int> epochs;                   // overrides the config's total
};

/// Writes out_dir/metrics.csv and out_dir/checkpoint.bin. A resumed run
/// continues the epoch numbering of its checkpoint and appends to an existing
/// metrics file.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

enum class ChainKind { path, cycle };

struct ClosedFormArgs {
  std::filesystem::path manifest;
  std::size_t dim = 2;
  std::filesystem::path out_dir;
  ChainKind chain = ChainKind::path;
  std::optional<std::filesystem::path> rotation;  // d x d CSV
};

/// Frames become chain states (bit-identical frames share a state, in order of
/// first appearance); adjacent frames of each sequence are the observed pairs,
/// plus last-to-first when `chain` is cycle. Writes out_dir/embedding.csv and
/// out_dir/diagnostics.json.
int cmd_closed_form(const ClosedFormArgs& args, std::ostream& out, std::ostream& err);

/// Prints one line per suite; exit 4 when any suite exceeds its tolerance.
int cmd_gradcheck(const gradcheck::Options& opts, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::string kind = "decode-angle";
  std::optional<std::filesystem::path> out_json;
};

/// Prints the metrics as JSON (and writes them to out_json when given).
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

}  // namespace tcoh::commands
