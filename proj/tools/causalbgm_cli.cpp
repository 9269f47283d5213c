// Command-line front end: simulate | recommend-dims | train | estimate |
// benchmark | coverage. JSON config with flag overrides (flags win); exit
// codes: 0 success, 2 usage/validation, 3 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "causalbgm/data.hpp"
#include "causalbgm/effects.hpp"
#include "causalbgm/pipeline.hpp"
#include "causalbgm/run_config.hpp"
#include "causalbgm/sir.hpp"
#include "causalbgm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace causalbgm;

namespace {

CLI::Validator numeric_check(const char* name, bool strict) {
  return CLI::Validator(
      [strict](std::string& s) {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(s, v) || v < 0.0 || (strict && v == 0.0)) {
          return "'" + s + "' must be a number " + (strict ? "> 0" : ">= 0");
        }
        return std::string{};
      },
      name);
}

const CLI::Validator kPositive = numeric_check("NUM>0", true);
const CLI::Validator kNonNegative = numeric_check("NUM>=0", false);

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

void echo_config(const RunConfig& cfg) {
  write_text(cfg.output_dir + "/config.resolved.json", run_config_to_json(cfg));
}

void ensure_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + cfg.output_dir + "'");
}

// Ordinary least squares y = a + b x, the "naive" dose-response every
// benchmark compares against.
std::pair<double, double> ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  const double b = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  const double a = (sy - b * sx) / n;
  return {a, b};
}

struct SeedState {
  std::optional<std::uint64_t> flag;
  bool config_had_seed = false;
};

// Precedence: --seed flag > config file > BGM_SEED env > default.
void apply_seed(RunConfig& cfg, const SeedState& seed) {
  if (seed.flag) {
    cfg.seed = *seed.flag;
  } else if (!seed.config_had_seed) {
    if (const char* env = std::getenv("BGM_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw std::invalid_argument("BGM_SEED is not an unsigned integer");
      }
    }
  }
  cfg.resolve_seeds();
}

RunConfig load_config(const std::string& config_path, const SeedState& seed) {
  RunConfig cfg;
  SeedState state = seed;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
    std::ifstream is(config_path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    state.config_had_seed = json::parse(text).contains("seed");
  }
  apply_seed(cfg, state);
  return cfg;
}

int cmd_simulate(const RunConfig& cfg) {
  auto [data, truth] = generate(cfg.data);
  ensure_output_dir(cfg);
  save_dataset_csv(data, cfg.output_dir + "/data.csv");
  save_truth_csv(truth, cfg.output_dir + "/truth.csv");
  echo_config(cfg);
  std::cout << "simulated " << cfg.data.name << ": n=" << data.n() << " p=" << data.p()
            << " treatment=" << (data.kind == TreatmentKind::kBinary ? "binary" : "continuous")
            << "\nwrote " << cfg.output_dir << "/data.csv, truth.csv\n";
  return 0;
}

int cmd_recommend(const RunConfig& cfg, const std::string& data_path) {
  Dataset data = data_path.empty() ? generate(cfg.data).first : load_dataset_csv(data_path);
  const PartitionRecommendation rec =
      recommend_partition(data.v, data.x, data.y, cfg.recommend_q0, cfg.sir_slices);
  json out;
  out["q0"] = rec.latent.q0;
  out["q1"] = rec.latent.q1;
  out["q2"] = rec.latent.q2;
  out["q3"] = rec.latent.q3;
  out["total"] = rec.total_dim;
  const std::size_t lead = std::min<std::size_t>(10, rec.cov_eigenvalues.size());
  out["cov_eigenvalues"] =
      std::vector<double>(rec.cov_eigenvalues.begin(), rec.cov_eigenvalues.begin() + lead);
  out["sir_x_used_ratio_rule"] = rec.sir_x.used_ratio_rule;
  out["sir_y_used_ratio_rule"] = rec.sir_y.used_ratio_rule;
  ensure_output_dir(cfg);
  write_text(cfg.output_dir + "/recommendation.json", out.dump(2) + "\n");
  echo_config(cfg);
  std::cout << "recommended latent partition: q0=" << rec.latent.q0 << " q1=" << rec.latent.q1
            << " q2=" << rec.latent.q2 << " q3=" << rec.latent.q3
            << " (total " << rec.total_dim << ")\n";
  return 0;
}

json report_to_json(const TrainReport& report) {
  json j;
  j["elbo_x"] = report.elbo_x;
  j["elbo_v"] = report.elbo_v;
  j["elbo_y"] = report.elbo_y;
  j["latent_logpost"] = report.latent_logpost;
  j["latent_reinits"] = report.latent_reinits;
  j["wall_time_sec"] = report.wall_time_sec;
  j["epochs_completed"] = report.epochs_completed;
  return j;
}

int cmd_train(RunConfig cfg, const std::string& data_path, const std::string& resume_path) {
  Dataset data = load_dataset_csv(data_path);
  cfg.train.kind = data.kind;
  TrainReport report;
  TrainedModel tm;
  if (resume_path.empty()) {
    tm = train(data, cfg.train, &report);
  } else {
    tm = load_checkpoint(resume_path);
    if (cfg.train.epochs < 0) {
      throw std::invalid_argument("--resume needs --epochs (total epoch count)");
    }
    continue_training(tm, data, cfg.train.epochs, &report);
  }
  ensure_output_dir(cfg);
  save_checkpoint(tm, cfg.output_dir + "/checkpoint.bgmc");
  write_text(cfg.output_dir + "/train_report.json", report_to_json(report).dump(2) + "\n");
  echo_config(cfg);
  std::cout << "trained " << tm.epochs_done << " epochs in " << report.wall_time_sec << "s";
  if (!report.elbo_y.empty()) {
    std::cout << "; final per-example ELBO x/v/y = " << report.elbo_x.back() << " / "
              << report.elbo_v.back() << " / " << report.elbo_y.back();
  }
  std::cout << "\nwrote " << cfg.output_dir << "/checkpoint.bgmc\n";
  return 0;
}

void write_adrf_csv(const AdrfCurve& curve, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "x,point,lower,upper\n";
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    const EffectEstimate& e = curve.estimates[k];
    os << fmt(curve.grid[k]) << ',' << fmt(e.point) << ',' << fmt(e.lower) << ','
       << fmt(e.upper) << '\n';
  }
}

void write_ite_csv(const std::vector<EffectEstimate>& ite, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "ite,lower,upper\n";
  for (const EffectEstimate& e : ite) {
    os << fmt(e.point) << ',' << fmt(e.lower) << ',' << fmt(e.upper) << '\n';
  }
}

int cmd_estimate(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& data_path) {
  TrainedModel tm = load_checkpoint(checkpoint_path);
  Dataset data = load_dataset_csv(data_path);
  if (data.kind != tm.model.kind) {
    throw std::invalid_argument("dataset treatment kind does not match the checkpoint");
  }
  EstimateResult res = run_estimate(tm, data, cfg.estimate);
  ensure_output_dir(cfg);
  json j;
  j["alpha"] = cfg.estimate.alpha;
  j["mean_acceptance"] = res.mean_acceptance;
  if (res.kind == TreatmentKind::kContinuous) {
    write_adrf_csv(res.adrf, cfg.output_dir + "/adrf.csv");
    j["kind"] = "continuous";
    j["adrf_csv"] = "adrf.csv";
    std::cout << "dose-response over " << res.adrf.grid.size() << " grid points";
  } else {
    write_ite_csv(res.ite, cfg.output_dir + "/ite.csv");
    j["kind"] = "binary";
    j["ite_csv"] = "ite.csv";
    j["ate"] = {{"point", res.ate.point}, {"lower", res.ate.lower}, {"upper", res.ate.upper}};
    std::cout << "ATE = " << res.ate.point << " [" << res.ate.lower << ", " << res.ate.upper
              << "] (alpha " << cfg.estimate.alpha << ")";
  }
  std::cout << ", mean MH acceptance " << res.mean_acceptance << "\n";
  write_text(cfg.output_dir + "/effects.json", j.dump(2) + "\n");
  echo_config(cfg);
  return 0;
}

struct RunMetrics {
  std::uint64_t seed = 0;
  double a = 0.0, b = 0.0;  // metric pair: rmse/mape or ite_rmse/ate_abs_error
  double naive = 0.0;       // continuous only: OLS-curve RMSE
};

json aggregate_metrics(const std::vector<RunMetrics>& runs, const char* name_a,
                       const char* name_b) {
  auto mean_sd = [&](auto pick) {
    double mean = 0.0;
    for (const auto& r : runs) mean += pick(r);
    mean /= runs.size();
    double var = 0.0;
    for (const auto& r : runs) var += (pick(r) - mean) * (pick(r) - mean);
    var = runs.size() > 1 ? var / (runs.size() - 1) : 0.0;
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  const auto [am, as] = mean_sd([](const RunMetrics& r) { return r.a; });
  const auto [bm, bs] = mean_sd([](const RunMetrics& r) { return r.b; });
  json j;
  j[std::string(name_a) + "_mean"] = am;
  j[std::string(name_a) + "_sd"] = as;
  j[std::string(name_b) + "_mean"] = bm;
  j[std::string(name_b) + "_sd"] = bs;
  return j;
}

int cmd_benchmark(const RunConfig& cfg) {
  std::vector<RunMetrics> runs;
  json per_run = json::array();
  // acic_like is the only binary generator; every other one has a dose-response truth.
  const bool continuous = cfg.data.name != "acic_like";
  for (int r = 0; r < cfg.benchmark_runs; ++r) {
    DgpSpec dgp = cfg.data;
    dgp.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1);
    auto [data, truth] = generate(dgp);
    TrainConfig tc = cfg.train;
    tc.kind = data.kind;
    tc.seed = mix_seed(cfg.seed, 0x10000 + static_cast<std::uint64_t>(r));
    const TrainedModel tm = train(data, tc);
    EstimateOptions eo = cfg.estimate;
    eo.seed = tc.seed;
    RunMetrics m;
    m.seed = dgp.seed;
    json row;
    row["seed"] = dgp.seed;
    if (data.kind == TreatmentKind::kContinuous) {
      eo.grid = truth.grid;
      const EstimateResult res = run_estimate(tm, data, eo);
      std::vector<double> points(res.adrf.estimates.size());
      for (std::size_t k = 0; k < points.size(); ++k) points[k] = res.adrf.estimates[k].point;
      const ContinuousMetrics met = metrics_continuous(truth.mu, points);
      const auto [a, b] = ols_fit(data.x, data.y);
      std::vector<double> naive(truth.grid.size());
      for (std::size_t k = 0; k < naive.size(); ++k) naive[k] = a + b * truth.grid[k];
      double sq = 0.0;
      for (std::size_t k = 0; k < naive.size(); ++k) {
        sq += (naive[k] - truth.mu[k]) * (naive[k] - truth.mu[k]);
      }
      m.a = met.rmse;
      m.b = met.mape;
      m.naive = std::sqrt(sq / naive.size());
      row["rmse"] = m.a;
      row["mape"] = m.b;
      row["naive_rmse"] = m.naive;
    } else {
      const EstimateResult res = run_estimate(tm, data, eo);
      std::vector<double> est(res.ite.size());
      for (std::size_t i = 0; i < est.size(); ++i) est[i] = res.ite[i].point;
      const BinaryMetrics met = metrics_binary(truth.ite, est);
      m.a = met.ite_rmse;
      m.b = met.ate_abs_error;
      row["ite_rmse"] = m.a;
      row["ate_abs_error"] = m.b;
    }
    runs.push_back(m);
    per_run.push_back(row);
    std::cout << "run " << (r + 1) << "/" << cfg.benchmark_runs << ": "
              << (continuous ? "rmse=" : "ite_rmse=") << m.a << "\n";
  }
  json out;
  out["dgp"] = cfg.data.name;
  out["runs"] = cfg.benchmark_runs;
  out["per_run"] = per_run;
  out["aggregate"] = continuous ? aggregate_metrics(runs, "rmse", "mape")
                                : aggregate_metrics(runs, "ite_rmse", "ate_abs_error");
  ensure_output_dir(cfg);
  write_text(cfg.output_dir + "/benchmark.json", out.dump(2) + "\n");
  echo_config(cfg);
  std::cout << "wrote " << cfg.output_dir << "/benchmark.json\n";
  return 0;
}

int cmd_coverage(const RunConfig& cfg) {
  CoverageRequest req;
  req.dgp = cfg.data;
  req.replicates = cfg.coverage_replicates;
  req.alphas = cfg.coverage_alphas;
  req.train = cfg.train;
  req.estimate = cfg.estimate;
  req.seed = cfg.seed;
  if (!cfg.coverage_grid.empty()) {
    req.grid = cfg.coverage_grid;
  } else {
    Dataset ref = generate(cfg.data).first;
    std::vector<double> xs = ref.x;
    std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
    req.grid = {xs[xs.size() / 2]};
  }
  const CoverageResult res = coverage_study(req);
  ensure_output_dir(cfg);
  std::ofstream os(cfg.output_dir + "/coverage.csv");
  os << "alpha,x,truth,coverage,mean_length\n";
  for (std::size_t j = 0; j < res.alphas.size(); ++j) {
    for (std::size_t k = 0; k < res.grid.size(); ++k) {
      os << fmt(res.alphas[j]) << ',' << fmt(res.grid[k]) << ',' << fmt(res.truth[k]) << ','
         << fmt(res.coverage(static_cast<int>(j), static_cast<int>(k))) << ','
         << fmt(res.mean_length(static_cast<int>(j), static_cast<int>(k))) << '\n';
    }
  }
  os.close();
  echo_config(cfg);
  std::cout << "coverage over " << res.replicates_run << " replicates ("
            << res.replicates_failed << " failed)\n";
  for (std::size_t j = 0; j < res.alphas.size(); ++j) {
    std::cout << "  alpha=" << res.alphas[j] << ":";
    for (std::size_t k = 0; k < res.grid.size(); ++k) {
      std::cout << " " << res.coverage(static_cast<int>(j), static_cast<int>(k));
    }
    std::cout << "\n";
  }
  std::cout << "wrote " << cfg.output_dir << "/coverage.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian generative modeling for causal effect estimation"};
  app.require_subcommand(1);

  std::string config_path, data_path, checkpoint_path, resume_path, out_dir;
  SeedState seed;
  std::uint64_t seed_value = 0;

  // Common flags registered on every subcommand.
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    auto* sopt = sub->add_option("--seed", seed_value, "master seed (overrides config)");
    sopt->each([&seed](const std::string& s) { seed.flag = std::stoull(s); });
    sub->add_option("--out", out_dir, "output directory");
    return sub;
  };

  auto* sim = add_common(app.add_subcommand("simulate", "generate a synthetic dataset"));
  std::string dgp_name;
  int n_override = -1, p_override = -1;
  double noise_override = -1.0;
  sim->add_option("--name", dgp_name, "generator name");
  sim->add_option("--n", n_override, "sample size")->check(kPositive);
  sim->add_option("--p", p_override, "covariate dimension")->check(kPositive);
  sim->add_option("--noise-scale", noise_override, "noise multiplier")
      ->check(kNonNegative);

  auto* rec = add_common(app.add_subcommand("recommend-dims", "latent dimension recommendation"));
  rec->add_option("--data", data_path, "dataset CSV (default: simulate from config)");
  int q0_override = -1, slices_override = -1;
  rec->add_option("--q0", q0_override, "shared-confounder dimension (1-5)")
      ->check(kPositive);
  rec->add_option("--slices", slices_override, "slice count")->check(kPositive);

  auto* trn = add_common(app.add_subcommand("train", "fit the generative model"));
  trn->add_option("--data", data_path, "dataset CSV")->required();
  trn->add_option("--resume", resume_path, "checkpoint to continue from");
  int epochs_override = std::numeric_limits<int>::min();
  int egm_override = -1;
  std::string init_override;
  trn->add_option("--epochs", epochs_override, "total epochs");
  trn->add_option("--init", init_override, "egm | random");
  trn->add_option("--egm-batches", egm_override, "adversarial init batches")
      ->check(kNonNegative);
  int q_override[4] = {-1, -1, -1, -1};
  trn->add_option("--q0", q_override[0])->check(kNonNegative);
  trn->add_option("--q1", q_override[1])->check(kNonNegative);
  trn->add_option("--q2", q_override[2])->check(kNonNegative);
  trn->add_option("--q3", q_override[3])->check(kNonNegative);

  auto* est = add_common(app.add_subcommand("estimate", "posterior effect estimation"));
  est->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  est->add_option("--data", data_path, "dataset CSV")->required();
  double alpha_override = -1.0;
  int draws_override = -1, burnin_override = -1, grid_size_override = -1;
  est->add_option("--alpha", alpha_override, "significance level")
      ->check(CLI::Range(0.0, 1.0));
  est->add_option("--draws", draws_override, "retained MH draws")->check(kPositive);
  est->add_option("--burn-in", burnin_override, "discarded MH iterations")
      ->check(kNonNegative);
  est->add_option("--grid-size", grid_size_override, "dose-response grid points")
      ->check(kPositive);
  bool mean_only_flag = false;
  est->add_flag("--mean-only", mean_only_flag, "conditional means instead of sampled outcomes");

  auto* bench = add_common(app.add_subcommand("benchmark", "replicate runs against truth"));
  std::string bench_name;
  int runs_override = -1;
  bench->add_option("--name", bench_name, "generator name");
  bench->add_option("--runs", runs_override, "replicate count")->check(kPositive);
  bench->add_option("--n", n_override, "sample size")->check(kPositive);
  bench->add_option("--p", p_override, "covariate dimension")->check(kPositive);

  auto* cov = add_common(app.add_subcommand("coverage", "interval calibration study"));
  int reps_override = -1;
  cov->add_option("--replicates", reps_override, "replicate count")
      ->check(kPositive);
  cov->add_option("--name", dgp_name, "generator name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_config(config_path, seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!dgp_name.empty()) cfg.data.name = dgp_name;
    if (!bench_name.empty()) cfg.data.name = bench_name;
    if (n_override > 0) cfg.data.n = n_override;
    if (p_override > 0) cfg.data.p = p_override;
    if (noise_override >= 0.0) cfg.data.noise_scale = noise_override;
    if (q0_override > 0) cfg.recommend_q0 = q0_override;
    if (slices_override > 0) cfg.sir_slices = slices_override;
    if (epochs_override != std::numeric_limits<int>::min()) cfg.train.epochs = epochs_override;
    if (egm_override >= 0) cfg.train.egm_batches = egm_override;
    if (!init_override.empty()) {
      if (init_override == "egm") {
        cfg.train.init = InitStrategy::kEgm;
      } else if (init_override == "random") {
        cfg.train.init = InitStrategy::kRandom;
      } else {
        throw std::invalid_argument("--init must be 'egm' or 'random'");
      }
    }
    if (q_override[0] >= 0) cfg.train.latent.q0 = q_override[0];
    if (q_override[1] >= 0) cfg.train.latent.q1 = q_override[1];
    if (q_override[2] >= 0) cfg.train.latent.q2 = q_override[2];
    if (q_override[3] >= 0) cfg.train.latent.q3 = q_override[3];
    if (alpha_override > 0.0) cfg.estimate.alpha = alpha_override;
    if (draws_override > 0) cfg.estimate.mh.keep = draws_override;
    if (burnin_override >= 0) cfg.estimate.mh.burn_in = burnin_override;
    if (grid_size_override > 0) cfg.estimate.grid_size = grid_size_override;
    if (mean_only_flag) cfg.estimate.mean_only = true;
    if (runs_override > 0) cfg.benchmark_runs = runs_override;
    if (reps_override > 0) cfg.coverage_replicates = reps_override;
    cfg.data.validate();

    if (sim->parsed()) return cmd_simulate(cfg);
    if (rec->parsed()) return cmd_recommend(cfg, data_path);
    if (trn->parsed()) return cmd_train(cfg, data_path, resume_path);
    if (est->parsed()) return cmd_estimate(cfg, checkpoint_path, data_path);
    if (bench->parsed()) return cmd_benchmark(cfg);
    if (cov->parsed()) return cmd_coverage(cfg);
    throw std::invalid_argument("no subcommand given");
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
