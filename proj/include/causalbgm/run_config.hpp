#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalbgm/data.hpp"
#include "causalbgm/pipeline.hpp"
#include "causalbgm/trainer.hpp"

namespace causalbgm {

// Full configuration surface of the command-line tool. One master seed feeds
// every stage through named substreams; the data/train/estimate seeds are
// overwritten with it when the config is resolved.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string output_dir = ".";

  DgpSpec data{};             // "data" block (seed comes from the master seed)
  TrainConfig train{};        // "latent" + "train" blocks
  EstimateOptions estimate{}; // "estimate" block

  int benchmark_runs = 10;    // "benchmark" block
  int coverage_replicates = 30;  // "coverage" block
  std::vector<double> coverage_alphas{0.01, 0.05, 0.1};
  std::vector<double> coverage_grid;  // empty: median observed treatment

  int recommend_q0 = 1;  // "recommend" block
  int sir_slices = 10;

  // Pushes the master seed into the per-stage seeds.
  void resolve_seeds();
};

// Strict JSON parsing: unknown keys anywhere are an error
// (std::invalid_argument), as are wrong types. Absent keys keep defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Fully resolved config (defaults filled in), pretty-printed. Parsing the
// output reproduces the config.
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace causalbgm
