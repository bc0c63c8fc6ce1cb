#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "flowbind/cli/bundle.hpp"

namespace flowbind {

/// Exit statuses shared by all commands.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kAssertionFailed = 1;
inline constexpr int kError = 2;
inline constexpr int kDiverged = 3;
}  // namespace exit_code

struct CommandOptions {
  std::string config;   // empty: built-in defaults
  std::string bundle;
  std::string out;
  std::string in;
  std::string sources;  // comma separated modality names
  std::string target;
  std::string format;   // csv | json | empty (infer)
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rows;
};

ExperimentConfig resolve_config(const CommandOptions& options);

/// Writes <out>/samples.csv (partially paired draws, absent cells empty)
/// and <out>/config.cfg (the resolved config).
int cmd_gen_world(const CommandOptions& options, std::ostream& log);

/// Writes <out>/train_log.csv, <out>/model.fbnd and periodic
/// <out>/checkpoints/step_<n>.fbnd; <out>/diagnostics.txt on divergence.
int cmd_train(const CommandOptions& options, std::ostream& log);

int cmd_translate(const CommandOptions& options, std::ostream& log);

/// which: decompose | alignment | variance | ablation | interp. Writes
/// <out>/<which>.csv and one PASS/FAIL line per assertion.
int cmd_eval(const std::string& which, const CommandOptions& options, std::ostream& log);

}  // namespace flowbind
