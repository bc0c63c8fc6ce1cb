#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbind/cli/config.hpp"

namespace flowbind {

/// Trained (or freshly initialized) model with everything needed to run
/// inference and reproduce it.
struct ModelBundle {
  static constexpr std::uint32_t kFormatVersion = 1;

  ExperimentConfig config;
  FlowBindModel model;
  std::vector<NormStats> stats;
  std::uint64_t step = 0;
};

/// Model initialized from the config's seed, with stats from its stats stream.
ModelBundle initial_bundle(const ExperimentConfig& config);

std::string encode_bundle(const ModelBundle& bundle);
ModelBundle decode_bundle(const std::string& bytes);

/// Writes to a temporary file beside `path`, then renames it into place.
void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

/// Bitwise comparison of config, stats, step and every parameter.
bool bundles_equal(const ModelBundle& a, const ModelBundle& b);

/// Atomic text/binary file write (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace flowbind
