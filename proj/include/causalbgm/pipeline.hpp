#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "causalbgm/data.hpp"
#include "causalbgm/effects.hpp"
#include "causalbgm/trainer.hpp"

namespace causalbgm {

struct EstimateOptions {
  MhConfig mh{};  // burn-in 5000, 3000 retained draws, unit proposal scale
  double alpha = 0.05;
  std::uint64_t seed = 42;  // master seed for the mcmc / estimate substreams

  // Continuous treatments: evaluation grid in raw units. An explicit grid
  // wins; otherwise grid_size points span [grid_min, grid_max], defaulting to
  // the observed treatment range.
  std::vector<double> grid;
  int grid_size = 100;
  std::optional<double> grid_min;
  std::optional<double> grid_max;

  // Fresh outcome parameters per retained draw (shared across individuals) so
  // population-mean draws carry parameter uncertainty; false reuses a single
  // sampled parameter vector everywhere.
  bool resample_theta_per_draw = true;
  bool mean_only = false;          // conditional means instead of sampled outcomes
  bool use_stored_latents = true;  // start chains at the trained latents when rows match

  void validate() const;
};

struct EstimateResult {
  TreatmentKind kind = TreatmentKind::kContinuous;
  AdrfCurve adrf;                   // continuous treatment
  std::vector<EffectEstimate> ite;  // binary treatment: one per individual
  EffectEstimate ate;               // binary treatment
  double mean_acceptance = 0.0;     // average MH acceptance rate across individuals
};

// Posterior effect estimation in raw data units. Each individual gets an
// independent MH chain over its latent vector (stream mcmc.fork(i), fresh
// parameter sample per chain); sampled-outcome noise comes from
// estimate.fork(i).fork(s); per-draw outcome parameters from the
// estimate-theta stream. Individuals are streamed, so memory stays flat.
EstimateResult run_estimate(const TrainedModel& tm, const Dataset& raw,
                            const EstimateOptions& opt);

// Continuous treatments only: the per-draw population-mean table (raw units),
// so intervals can be re-derived at several significance levels.
AdrfDrawTable run_adrf_table(const TrainedModel& tm, const Dataset& raw,
                             const EstimateOptions& opt,
                             double* mean_acceptance = nullptr);

// Calibration study: replicate datasets from the generator, full train +
// estimate each, then empirical coverage of the dose-response intervals
// against the closed-form truth.
struct CoverageRequest {
  DgpSpec dgp;  // continuous generator
  int replicates = 30;
  std::vector<double> alphas{0.01, 0.05, 0.1};
  std::vector<double> grid;  // raw evaluation points (required)
  TrainConfig train;
  EstimateOptions estimate;
  std::uint64_t seed = 42;  // replicate r draws data with mix(seed, 2r+1), trains with mix(seed, 2r+2)

  void validate() const;
};

struct CoverageResult {
  std::vector<double> grid;
  std::vector<double> alphas;
  std::vector<double> truth;  // closed-form dose-response at the grid
  Mat coverage;               // alphas x K, empirical coverage proportions
  Mat mean_length;            // alphas x K, mean interval lengths
  int replicates_run = 0;
  int replicates_failed = 0;
};

// One replicate: dataset spec -> dose-response draw table. Tests inject
// synthetic runners; the default generates, trains, and estimates.
using AdrfTableRunner =
    std::function<AdrfDrawTable(const DgpSpec& dgp, std::uint64_t train_seed)>;

CoverageResult coverage_study(const CoverageRequest& req,
                              const AdrfTableRunner& runner = {});

}  // namespace causalbgm
