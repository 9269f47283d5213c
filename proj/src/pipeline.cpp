#include "causalbgm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace causalbgm {

void EstimateOptions::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("EstimateOptions: alpha outside (0, 1)");
  }
  if (mh.burn_in < 0 || mh.keep < 1) {
    throw std::invalid_argument("EstimateOptions: need non-negative burn-in and at least one draw");
  }
  if (!(mh.proposal_std > 0.0)) {
    throw std::invalid_argument("EstimateOptions: proposal_std must be positive");
  }
  if (grid.empty()) {
    if (grid_size < 1) throw std::invalid_argument("EstimateOptions: grid_size must be positive");
    if (grid_min && grid_max && !(*grid_min < *grid_max)) {
      throw std::invalid_argument("EstimateOptions: grid_min must be below grid_max");
    }
  } else {
    for (std::size_t k = 1; k < grid.size(); ++k) {
      if (!(grid[k] > grid[k - 1])) {
        throw std::invalid_argument("EstimateOptions: grid must be strictly increasing");
      }
    }
  }
}

namespace {

std::vector<double> resolve_grid(const EstimateOptions& opt, const Dataset& raw) {
  if (!opt.grid.empty()) return opt.grid;
  double lo = opt.grid_min.value_or(*std::min_element(raw.x.begin(), raw.x.end()));
  double hi = opt.grid_max.value_or(*std::max_element(raw.x.begin(), raw.x.end()));
  if (!(lo < hi)) throw std::invalid_argument("run_estimate: degenerate treatment grid");
  std::vector<double> grid(opt.grid_size);
  if (opt.grid_size == 1) {
    grid[0] = 0.5 * (lo + hi);
    return grid;
  }
  const double step = (hi - lo) / (opt.grid_size - 1);
  for (int k = 0; k < opt.grid_size; ++k) grid[k] = lo + step * k;
  return grid;
}

std::vector<ParamVector> draw_outcome_thetas(const TrainedModel& tm,
                                             const EstimateOptions& opt) {
  Rng theta_rng = Rng::substream(opt.seed, "estimate-theta");
  const int count = opt.resample_theta_per_draw ? opt.mh.keep : 1;
  std::vector<ParamVector> thetas;
  thetas.reserve(count);
  for (int s = 0; s < count; ++s) {
    thetas.push_back(sample_params(tm.model.net_y, theta_rng).theta);
  }
  return thetas;
}

// Shared per-individual chain loop. visit(i, chain, noise stream for i).
template <typename Visit>
double for_each_chain(const TrainedModel& tm, const Dataset& data,
                      const EstimateOptions& opt, const Visit& visit) {
  Rng mcmc_base = Rng::substream(opt.seed, "mcmc");
  Rng noise_base = Rng::substream(opt.seed, "estimate");
  const int n = data.n();
  const bool stored = opt.use_stored_latents && tm.latents.rows == n &&
                      tm.latents.cols == tm.model.latent.total();
  double accept_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Rng chain_rng = mcmc_base.fork(static_cast<std::uint64_t>(i));
    const ThetaTriple thetas = sample_thetas(tm.model, chain_rng);
    const std::span<const double> z_init =
        stored ? tm.latents.row_span(i) : std::span<const double>{};
    PosteriorChain chain = mh_sample(tm.model, data.x[i], data.y[i], data.v.row_span(i),
                                     thetas, opt.mh, chain_rng, z_init);
    accept_sum += chain.acceptance_rate();
    Rng rng_i = noise_base.fork(static_cast<std::uint64_t>(i));
    visit(i, chain, rng_i);
  }
  return accept_sum / n;
}

AdrfDrawTable adrf_table_impl(const TrainedModel& tm, const Dataset& raw,
                              const EstimateOptions& opt, double* mean_acceptance) {
  opt.validate();
  raw.validate();
  if (tm.model.kind != TreatmentKind::kContinuous || raw.kind != TreatmentKind::kContinuous) {
    throw std::invalid_argument("dose-response estimation requires a continuous treatment");
  }
  if (raw.p() != tm.model.covariate_dim) {
    throw std::invalid_argument("dataset covariate dimension does not match the model");
  }
  Dataset data = raw;
  apply_standardizer(data, tm.standardizer);

  const std::vector<double> grid_raw = resolve_grid(opt, raw);
  std::vector<double> grid_std(grid_raw.size());
  for (std::size_t k = 0; k < grid_raw.size(); ++k) {
    grid_std[k] = tm.standardizer.x_standardized
                      ? (grid_raw[k] - tm.standardizer.x_mean) / tm.standardizer.x_scale
                      : grid_raw[k];
  }

  const std::vector<ParamVector> thetas_y = draw_outcome_thetas(tm, opt);
  const ThetaSchedule schedule{std::span<const ParamVector>(thetas_y)};
  const int S = opt.mh.keep;
  const int K = static_cast<int>(grid_std.size());
  Mat pop_sum(S, K);

  const double accept =
      for_each_chain(tm, data, opt, [&](int, const PosteriorChain& chain, Rng& rng_i) {
        adrf_accumulate_individual(tm.model, chain, grid_std, schedule, rng_i,
                                   opt.mean_only, pop_sum);
      });
  if (mean_acceptance) *mean_acceptance = accept;

  AdrfDrawTable table;
  table.grid = grid_raw;
  table.n_individuals = data.n();
  table.pop_mean_draws = std::move(pop_sum);
  const double y_scale = tm.standardizer.y_scale;
  const double y_mean = tm.standardizer.y_mean;
  for (double& v : table.pop_mean_draws.data) {
    v = (v / data.n()) * y_scale + y_mean;
  }
  table.point.assign(K, 0.0);
  for (int s = 0; s < S; ++s) {
    const double* row = table.pop_mean_draws.row(s);
    for (int k = 0; k < K; ++k) table.point[k] += row[k];
  }
  for (double& v : table.point) v /= S;
  return table;
}

}  // namespace

AdrfDrawTable run_adrf_table(const TrainedModel& tm, const Dataset& raw,
                             const EstimateOptions& opt, double* mean_acceptance) {
  return adrf_table_impl(tm, raw, opt, mean_acceptance);
}

EstimateResult run_estimate(const TrainedModel& tm, const Dataset& raw,
                            const EstimateOptions& opt) {
  EstimateResult res;
  res.kind = tm.model.kind;
  if (tm.model.kind == TreatmentKind::kContinuous) {
    double accept = 0.0;
    const AdrfDrawTable table = adrf_table_impl(tm, raw, opt, &accept);
    res.adrf = adrf_from_table(table, opt.alpha);
    res.mean_acceptance = accept;
    return res;
  }

  // Binary treatment: per-individual effects and their population aggregate.
  opt.validate();
  raw.validate();
  if (raw.kind != TreatmentKind::kBinary) {
    throw std::invalid_argument("run_estimate: model expects a binary treatment");
  }
  if (raw.p() != tm.model.covariate_dim) {
    throw std::invalid_argument("dataset covariate dimension does not match the model");
  }
  Dataset data = raw;
  apply_standardizer(data, tm.standardizer);

  const std::vector<ParamVector> thetas_y = draw_outcome_thetas(tm, opt);
  const ThetaSchedule schedule{std::span<const ParamVector>(thetas_y)};
  const int S = opt.mh.keep;
  const double y_scale = tm.standardizer.y_scale;
  const int n = data.n();
  res.ite.resize(n);
  std::vector<double> pop(S, 0.0);

  res.mean_acceptance =
      for_each_chain(tm, data, opt, [&](int i, const PosteriorChain& chain, Rng& rng_i) {
        std::vector<double> diffs = ite_draws(tm.model, chain, schedule, rng_i, opt.mean_only);
        for (int s = 0; s < S; ++s) {
          diffs[s] *= y_scale;  // raw-unit difference; mean shifts cancel
          pop[s] += diffs[s];
        }
        res.ite[i] = summarize_draws(diffs, opt.alpha);
      });

  for (double& v : pop) v /= n;
  res.ate = summarize_draws(pop, opt.alpha);
  return res;
}

void CoverageRequest::validate() const {
  dgp.validate();
  train.validate();
  estimate.validate();
  if (replicates < 2) throw std::invalid_argument("CoverageRequest: need at least 2 replicates");
  if (grid.empty()) throw std::invalid_argument("CoverageRequest: evaluation grid required");
  if (alphas.empty()) throw std::invalid_argument("CoverageRequest: no significance levels");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw std::invalid_argument("CoverageRequest: alpha outside (0, 1)");
    }
  }
}

CoverageResult coverage_study(const CoverageRequest& req, const AdrfTableRunner& runner) {
  req.validate();
  AdrfTableRunner run = runner;
  if (!run) {
    run = [&req](const DgpSpec& dgp, std::uint64_t train_seed) {
      auto [data, truth] = generate(dgp);
      (void)truth;
      TrainConfig tc = req.train;
      tc.seed = train_seed;
      tc.kind = data.kind;
      const TrainedModel tm = train(data, tc);
      EstimateOptions opt = req.estimate;
      opt.seed = train_seed;
      opt.grid = req.grid;
      return run_adrf_table(tm, data, opt);
    };
  }

  CoverageResult res;
  res.grid = req.grid;
  res.alphas = req.alphas;
  const int K = static_cast<int>(req.grid.size());
  const int A = static_cast<int>(req.alphas.size());
  res.truth.resize(K);
  for (int k = 0; k < K; ++k) res.truth[k] = true_adrf(req.dgp, req.grid[k]);
  res.coverage = Mat(A, K);
  res.mean_length = Mat(A, K);

  for (int r = 0; r < req.replicates; ++r) {
    DgpSpec dgp = req.dgp;
    dgp.seed = mix_seed(req.seed, 2 * static_cast<std::uint64_t>(r) + 1);
    const std::uint64_t train_seed = mix_seed(req.seed, 2 * static_cast<std::uint64_t>(r) + 2);
    AdrfDrawTable table;
    try {
      table = run(dgp, train_seed);
    } catch (const std::exception& e) {
      std::cerr << "coverage replicate " << r << " failed: " << e.what() << "\n";
      ++res.replicates_failed;
      continue;
    }
    if (table.grid != req.grid) {
      throw std::runtime_error("coverage_study: runner returned a mismatched grid");
    }
    for (int j = 0; j < A; ++j) {
      const AdrfCurve curve = adrf_from_table(table, req.alphas[j]);
      for (int k = 0; k < K; ++k) {
        const EffectEstimate& e = curve.estimates[k];
        if (res.truth[k] >= e.lower && res.truth[k] <= e.upper) res.coverage(j, k) += 1.0;
        res.mean_length(j, k) += e.upper - e.lower;
      }
    }
    ++res.replicates_run;
  }

  if (res.replicates_run > 0) {
    for (double& v : res.coverage.data) v /= res.replicates_run;
    for (double& v : res.mean_length.data) v /= res.replicates_run;
  }
  return res;
}

}  // namespace causalbgm
