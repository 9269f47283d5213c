#include "causalbgm/effects.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace causalbgm {

double quantile_type7(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile_type7: no values");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile_type7: p outside [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

EffectEstimate summarize_draws(std::span<const double> draws, double alpha) {
  if (draws.empty()) throw std::invalid_argument("summarize_draws: no draws");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("summarize_draws: alpha outside (0, 1)");
  }
  EffectEstimate e;
  double sum = 0.0;
  for (double d : draws) sum += d;
  e.point = sum / static_cast<double>(draws.size());
  e.lower = quantile_type7(draws, alpha / 2.0);
  e.upper = quantile_type7(draws, 1.0 - alpha / 2.0);
  e.alpha = alpha;
  e.n_mc = static_cast<int>(draws.size());
  return e;
}

void ThetaSchedule::check_draws(int S) const {
  if (thetas.empty()) throw std::invalid_argument("ThetaSchedule: no parameter vectors");
  if (thetas.size() != 1 && thetas.size() != static_cast<std::size_t>(S)) {
    throw std::invalid_argument(
        "ThetaSchedule: need one parameter vector or one per retained draw");
  }
}

std::vector<double> ite_draws(const CausalBgmModel& m, const PosteriorChain& chain,
                              const ThetaSchedule& theta_y, Rng& rng, bool mean_only) {
  const int S = chain.num_draws();
  if (S == 0) throw std::invalid_argument("ite_draws: chain has no retained draws");
  theta_y.check_draws(S);
  const int q0 = m.latent.q0;
  const int q1 = m.latent.q1;
  std::vector<double> diffs(S);
  for (int s = 0; s < S; ++s) {
    const std::span<const double> z = chain.draw(s);
    const std::span<const double> z0 = z.subspan(0, q0);
    const std::span<const double> z1 = z.subspan(m.latent.z1_offset(), q1);
    const ParamVector& theta = theta_y.at(s);
    const OutcomeMoments treated = predict_outcome(m, 1.0, z0, z1, theta);
    const OutcomeMoments control = predict_outcome(m, 0.0, z0, z1, theta);
    if (mean_only) {
      diffs[s] = treated.mean - control.mean;
    } else {
      Rng draw_rng = rng.fork(static_cast<std::uint64_t>(s));
      const double y1 = treated.mean + std::sqrt(treated.var) * draw_rng.normal();
      const double y0 = control.mean + std::sqrt(control.var) * draw_rng.normal();
      diffs[s] = y1 - y0;
    }
  }
  return diffs;
}

EffectEstimate estimate_ite(const CausalBgmModel& m, const PosteriorChain& chain,
                            const ParamVector& theta_y, double alpha, Rng& rng) {
  return summarize_draws(ite_draws(m, chain, ThetaSchedule(theta_y), rng), alpha);
}

EffectEstimate estimate_ate(std::span<const std::vector<double>> diffs, double alpha) {
  if (diffs.empty()) throw std::invalid_argument("estimate_ate: no individuals");
  const std::size_t S = diffs.front().size();
  for (const auto& d : diffs) {
    if (d.size() != S) {
      throw std::invalid_argument("estimate_ate: draw counts differ across individuals");
    }
  }
  std::vector<double> pop(S, 0.0);
  for (const auto& d : diffs) {
    for (std::size_t s = 0; s < S; ++s) pop[s] += d[s];
  }
  for (double& v : pop) v /= static_cast<double>(diffs.size());
  return summarize_draws(pop, alpha);
}

void adrf_accumulate_individual(const CausalBgmModel& m, const PosteriorChain& chain,
                                std::span<const double> grid,
                                const ThetaSchedule& theta_y, Rng& rng_i,
                                bool mean_only, Mat& pop_sum) {
  const int S = chain.num_draws();
  const int K = static_cast<int>(grid.size());
  if (S == 0) throw std::invalid_argument("adrf_accumulate_individual: chain has no draws");
  if (K == 0) throw std::invalid_argument("adrf_accumulate_individual: empty grid");
  if (pop_sum.rows != S || pop_sum.cols != K) {
    throw std::invalid_argument("adrf_accumulate_individual: accumulator shape mismatch");
  }
  theta_y.check_draws(S);
  const int q0 = m.latent.q0;
  const int q1 = m.latent.q1;
  const MlpSpec& spec = m.net_y.spec;
  Mat inputs(1 + q0 + q1, K);
  for (int k = 0; k < K; ++k) inputs(0, k) = grid[k];
  for (int s = 0; s < S; ++s) {
    const std::span<const double> z = chain.draw(s);
    for (int i = 0; i < q0 + q1; ++i) {
      double* row = inputs.row(1 + i);
      const double zi = z[i];  // z0 then z1: contiguous prefix of the latent vector
      for (int k = 0; k < K; ++k) row[k] = zi;
    }
    const Mat out = mlp_forward_batch(spec, theta_y.at(s), inputs);
    double* acc = pop_sum.row(s);
    if (mean_only) {
      for (int k = 0; k < K; ++k) acc[k] += out(0, k);
    } else {
      Rng draw_rng = rng_i.fork(static_cast<std::uint64_t>(s));
      for (int k = 0; k < K; ++k) {
        acc[k] += out(0, k) + std::sqrt(out(1, k)) * draw_rng.normal();
      }
    }
  }
}

AdrfDrawTable adrf_draw_table(const CausalBgmModel& m, std::span<const double> grid,
                              std::span<const PosteriorChain> chains,
                              const ThetaSchedule& theta_y, Rng& rng, bool mean_only) {
  if (chains.empty()) throw std::invalid_argument("adrf_draw_table: no chains");
  if (grid.empty()) throw std::invalid_argument("adrf_draw_table: empty grid");
  const int S = chains.front().num_draws();
  for (const auto& c : chains) {
    if (c.num_draws() != S) {
      throw std::invalid_argument("adrf_draw_table: draw counts differ across individuals");
    }
  }
  AdrfDrawTable table;
  table.grid.assign(grid.begin(), grid.end());
  table.pop_mean_draws = Mat(S, static_cast<int>(grid.size()));
  table.n_individuals = static_cast<int>(chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    Rng rng_i = rng.fork(i);
    adrf_accumulate_individual(m, chains[i], grid, theta_y, rng_i, mean_only,
                               table.pop_mean_draws);
  }
  const double inv_n = 1.0 / static_cast<double>(chains.size());
  for (double& v : table.pop_mean_draws.data) v *= inv_n;
  table.point.assign(grid.size(), 0.0);
  for (int s = 0; s < S; ++s) {
    const double* row = table.pop_mean_draws.row(s);
    for (std::size_t k = 0; k < grid.size(); ++k) table.point[k] += row[k];
  }
  for (double& v : table.point) v /= static_cast<double>(S);
  return table;
}

AdrfCurve adrf_from_table(const AdrfDrawTable& table, double alpha) {
  const int S = table.pop_mean_draws.rows;
  const int K = table.pop_mean_draws.cols;
  if (S == 0 || K == 0) throw std::invalid_argument("adrf_from_table: empty table");
  AdrfCurve curve;
  curve.grid = table.grid;
  curve.estimates.resize(K);
  std::vector<double> column(S);
  for (int k = 0; k < K; ++k) {
    for (int s = 0; s < S; ++s) column[s] = table.pop_mean_draws(s, k);
    EffectEstimate e = summarize_draws(column, alpha);
    e.point = table.point[k];  // mean over (i, s), identical to the column mean
    curve.estimates[k] = e;
  }
  return curve;
}

AdrfCurve estimate_adrf(const CausalBgmModel& m, std::span<const double> grid,
                        std::span<const PosteriorChain> chains,
                        const ParamVector& theta_y, double alpha, Rng& rng) {
  return adrf_from_table(adrf_draw_table(m, grid, chains, ThetaSchedule(theta_y), rng), alpha);
}

ContinuousMetrics metrics_continuous(std::span<const double> truth,
                                     std::span<const double> estimate) {
  if (truth.size() != estimate.size() || truth.empty()) {
    throw std::invalid_argument("metrics_continuous: size mismatch or empty input");
  }
  std::vector<std::size_t> zero_idx;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k] == 0.0) zero_idx.push_back(k);
  }
  if (!zero_idx.empty()) {
    std::ostringstream oss;
    oss << "metrics_continuous: MAPE undefined, zero truth at indices";
    for (std::size_t k : zero_idx) oss << ' ' << k;
    throw std::invalid_argument(oss.str());
  }
  ContinuousMetrics met;
  double sq = 0.0, ap = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double r = estimate[k] - truth[k];
    sq += r * r;
    ap += std::abs(r / truth[k]);
  }
  met.rmse = std::sqrt(sq / static_cast<double>(truth.size()));
  met.mape = ap / static_cast<double>(truth.size());
  return met;
}

BinaryMetrics metrics_binary(std::span<const double> true_ite,
                             std::span<const double> est_ite) {
  if (true_ite.size() != est_ite.size() || true_ite.empty()) {
    throw std::invalid_argument("metrics_binary: size mismatch or empty input");
  }
  BinaryMetrics met;
  double sq = 0.0, ts = 0.0, es = 0.0;
  for (std::size_t i = 0; i < true_ite.size(); ++i) {
    const double r = est_ite[i] - true_ite[i];
    sq += r * r;
    ts += true_ite[i];
    es += est_ite[i];
  }
  const double n = static_cast<double>(true_ite.size());
  met.ite_rmse = std::sqrt(sq / n);
  met.ate_abs_error = std::abs(es / n - ts / n);
  return met;
}

}  // namespace causalbgm
