#pragma once

#include <span>
#include <vector>

#include "causalbgm/latent.hpp"
#include "causalbgm/model.hpp"

namespace causalbgm {

// Linear-interpolation quantile (R type 7): h = (n-1)p, result interpolates
// between the floor(h)-th and next order statistics.
double quantile_type7(std::span<const double> values, double p);

// Point estimate with a quantile posterior interval. The point is the Monte
// Carlo mean, the interval the (alpha/2, 1-alpha/2) empirical quantiles, so
// point inside [lower, upper] is not guaranteed.
struct EffectEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  int n_mc = 0;
};

EffectEstimate summarize_draws(std::span<const double> draws, double alpha);

struct AdrfCurve {
  std::vector<double> grid;
  std::vector<EffectEstimate> estimates;
};

// Per-draw outcome parameters: one shared vector, or one per retained draw.
// at(s) picks the right one; sizes other than 1 or S are rejected by callers.
struct ThetaSchedule {
  std::span<const ParamVector> thetas;

  ThetaSchedule(const ParamVector& single) : thetas(&single, 1) {}
  ThetaSchedule(std::span<const ParamVector> per_draw) : thetas(per_draw) {}
  const ParamVector& at(int s) const {
    return thetas[thetas.size() == 1 ? 0 : static_cast<std::size_t>(s)];
  }
  void check_draws(int S) const;
};

// Per-draw treated-minus-control differences for one individual with a binary
// treatment: for each retained draw s, outcomes are sampled from the outcome
// model at (x=1, z0^s, z1^s) then (x=0, z0^s, z1^s) with noise from
// rng.fork(s) (two normals, treated first). mean_only skips the noise and
// differences the conditional means instead (consuming nothing from rng).
std::vector<double> ite_draws(const CausalBgmModel& m, const PosteriorChain& chain,
                              const ThetaSchedule& theta_y, Rng& rng,
                              bool mean_only = false);

EffectEstimate estimate_ite(const CausalBgmModel& m, const PosteriorChain& chain,
                            const ParamVector& theta_y, double alpha, Rng& rng);

// ATE aggregation over individuals: point = mean of per-individual points,
// interval from quantiles of per-draw population means. Every row of diffs
// must have the same number of draws.
EffectEstimate estimate_ate(std::span<const std::vector<double>> diffs, double alpha);

// Dose-response machinery. For each individual i and retained draw s, the
// outcome model is evaluated at every grid value (columns in ascending grid
// order) under theta_y.at(s), and an outcome is sampled per grid point with
// noise from rng_i.fork(s) — one normal per grid value, ascending order
// (mean_only consumes nothing). Sampled outcomes are added into pop_sum
// (S x K), so the caller can stream individuals and discard each chain.
void adrf_accumulate_individual(const CausalBgmModel& m, const PosteriorChain& chain,
                                std::span<const double> grid,
                                const ThetaSchedule& theta_y, Rng& rng_i,
                                bool mean_only, Mat& pop_sum);

// All retained population-mean draws of the dose-response curve, kept so the
// quantile reduction can be re-run at several significance levels.
struct AdrfDrawTable {
  std::vector<double> grid;
  Mat pop_mean_draws;         // S x K: per-draw population means
  std::vector<double> point;  // K: mean over draws and individuals
  int n_individuals = 0;
};

// Builds the table from fully materialized chains: individual i's noise
// stream is rng.fork(i) (see adrf_accumulate_individual). Only forks of rng
// are consumed, never rng itself, so results do not depend on its position.
AdrfDrawTable adrf_draw_table(const CausalBgmModel& m, std::span<const double> grid,
                              std::span<const PosteriorChain> chains,
                              const ThetaSchedule& theta_y, Rng& rng,
                              bool mean_only = false);

AdrfCurve adrf_from_table(const AdrfDrawTable& table, double alpha);

AdrfCurve estimate_adrf(const CausalBgmModel& m, std::span<const double> grid,
                        std::span<const PosteriorChain> chains,
                        const ParamVector& theta_y, double alpha, Rng& rng);

// Evaluation metrics over a truth/estimate grid pair.
struct ContinuousMetrics {
  double rmse = 0.0;
  double mape = 0.0;
};

// Throws std::invalid_argument listing the offending grid indices if any
// truth value is zero (MAPE undefined there).
ContinuousMetrics metrics_continuous(std::span<const double> truth,
                                     std::span<const double> estimate);

struct BinaryMetrics {
  double ite_rmse = 0.0;
  double ate_abs_error = 0.0;
};

BinaryMetrics metrics_binary(std::span<const double> true_ite,
                             std::span<const double> est_ite);

}  // namespace causalbgm
