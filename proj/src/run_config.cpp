#include "causalbgm/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace causalbgm {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const char* where, std::set<std::string> allowed) {
  if (!obj.is_object()) {
    throw std::invalid_argument(std::string("config: '") + where + "' must be an object");
  }
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw std::invalid_argument(std::string("config: unknown key '") + item.key() +
                                  "' in '" + where + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for '") + key + "'");
  }
}

void read_optional(const json& obj, const char* key, std::optional<double>& out) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  if (!obj.at(key).is_number()) {
    throw std::invalid_argument(std::string("config: '") + key + "' must be a number or null");
  }
  out = obj.at(key).get<double>();
}

void parse_data(const json& j, DgpSpec& spec) {
  check_keys(j, "data", {"name", "n", "p", "noise_scale"});
  read(j, "name", spec.name);
  read(j, "n", spec.n);
  read(j, "p", spec.p);
  read(j, "noise_scale", spec.noise_scale);
}

void parse_latent(const json& j, LatentConfig& lc) {
  check_keys(j, "latent", {"q0", "q1", "q2", "q3"});
  read(j, "q0", lc.q0);
  read(j, "q1", lc.q1);
  read(j, "q2", lc.q2);
  read(j, "q3", lc.q3);
}

void parse_train(const json& j, TrainConfig& tc) {
  check_keys(j, "train",
             {"init", "epochs", "batch_size", "lr", "latent_lr", "beta1", "beta2", "adam_eps",
              "egm_batches", "variance_penalty", "adversarial_weight", "sigma_init", "xi_draws",
              "v_hidden", "xy_hidden", "encoder_hidden", "discriminator_hidden"});
  if (j.contains("init")) {
    const std::string init = j.at("init").get<std::string>();
    if (init == "egm") {
      tc.init = InitStrategy::kEgm;
    } else if (init == "random") {
      tc.init = InitStrategy::kRandom;
    } else {
      throw std::invalid_argument("config: init must be 'egm' or 'random'");
    }
  }
  read(j, "epochs", tc.epochs);
  read(j, "batch_size", tc.batch_size);
  read(j, "lr", tc.lr);
  read(j, "latent_lr", tc.latent_lr);
  read(j, "beta1", tc.adam.beta1);
  read(j, "beta2", tc.adam.beta2);
  read(j, "adam_eps", tc.adam.eps);
  read(j, "egm_batches", tc.egm_batches);
  read(j, "variance_penalty", tc.variance_penalty);
  read(j, "adversarial_weight", tc.adversarial_weight);
  read(j, "sigma_init", tc.sigma_init);
  read(j, "xi_draws", tc.xi_draws);
  read(j, "v_hidden", tc.arch.v_hidden);
  read(j, "xy_hidden", tc.arch.xy_hidden);
  read(j, "encoder_hidden", tc.encoder_hidden);
  read(j, "discriminator_hidden", tc.discriminator_hidden);
}

void parse_estimate(const json& j, EstimateOptions& eo) {
  check_keys(j, "estimate",
             {"alpha", "burn_in", "draws", "proposal_std", "tune_proposal", "grid", "grid_size",
              "grid_min", "grid_max", "resample_theta_per_draw", "mean_only",
              "use_stored_latents"});
  read(j, "alpha", eo.alpha);
  read(j, "burn_in", eo.mh.burn_in);
  read(j, "draws", eo.mh.keep);
  read(j, "proposal_std", eo.mh.proposal_std);
  read(j, "tune_proposal", eo.mh.tune_during_burn_in);
  read(j, "grid", eo.grid);
  read(j, "grid_size", eo.grid_size);
  read_optional(j, "grid_min", eo.grid_min);
  read_optional(j, "grid_max", eo.grid_max);
  read(j, "resample_theta_per_draw", eo.resample_theta_per_draw);
  read(j, "mean_only", eo.mean_only);
  read(j, "use_stored_latents", eo.use_stored_latents);
}

}  // namespace

void RunConfig::resolve_seeds() {
  data.seed = seed;
  train.seed = seed;
  estimate.seed = seed;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "<root>",
             {"seed", "output_dir", "data", "latent", "train", "estimate", "benchmark",
              "coverage", "recommend"});
  RunConfig cfg;
  read(j, "seed", cfg.seed);
  read(j, "output_dir", cfg.output_dir);
  if (j.contains("data")) parse_data(j.at("data"), cfg.data);
  if (j.contains("latent")) parse_latent(j.at("latent"), cfg.train.latent);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("estimate")) parse_estimate(j.at("estimate"), cfg.estimate);
  if (j.contains("benchmark")) {
    check_keys(j.at("benchmark"), "benchmark", {"runs"});
    read(j.at("benchmark"), "runs", cfg.benchmark_runs);
  }
  if (j.contains("coverage")) {
    check_keys(j.at("coverage"), "coverage", {"replicates", "alphas", "grid"});
    read(j.at("coverage"), "replicates", cfg.coverage_replicates);
    read(j.at("coverage"), "alphas", cfg.coverage_alphas);
    read(j.at("coverage"), "grid", cfg.coverage_grid);
  }
  if (j.contains("recommend")) {
    check_keys(j.at("recommend"), "recommend", {"q0", "slices"});
    read(j.at("recommend"), "q0", cfg.recommend_q0);
    read(j.at("recommend"), "slices", cfg.sir_slices);
  }
  cfg.resolve_seeds();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream oss;
  oss << is.rdbuf();
  return parse_run_config(oss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["data"] = {{"name", cfg.data.name},
               {"n", cfg.data.n},
               {"p", cfg.data.p},
               {"noise_scale", cfg.data.noise_scale}};
  j["latent"] = {{"q0", cfg.train.latent.q0},
                 {"q1", cfg.train.latent.q1},
                 {"q2", cfg.train.latent.q2},
                 {"q3", cfg.train.latent.q3}};
  j["train"] = {{"init", cfg.train.init == InitStrategy::kEgm ? "egm" : "random"},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr", cfg.train.lr},
                {"latent_lr", cfg.train.latent_lr},
                {"beta1", cfg.train.adam.beta1},
                {"beta2", cfg.train.adam.beta2},
                {"adam_eps", cfg.train.adam.eps},
                {"egm_batches", cfg.train.egm_batches},
                {"variance_penalty", cfg.train.variance_penalty},
                {"adversarial_weight", cfg.train.adversarial_weight},
                {"sigma_init", cfg.train.sigma_init},
                {"xi_draws", cfg.train.xi_draws},
                {"v_hidden", cfg.train.arch.v_hidden},
                {"xy_hidden", cfg.train.arch.xy_hidden},
                {"encoder_hidden", cfg.train.encoder_hidden},
                {"discriminator_hidden", cfg.train.discriminator_hidden}};
  j["estimate"] = {{"alpha", cfg.estimate.alpha},
                   {"burn_in", cfg.estimate.mh.burn_in},
                   {"draws", cfg.estimate.mh.keep},
                   {"proposal_std", cfg.estimate.mh.proposal_std},
                   {"tune_proposal", cfg.estimate.mh.tune_during_burn_in},
                   {"grid", cfg.estimate.grid},
                   {"grid_size", cfg.estimate.grid_size},
                   {"grid_min", cfg.estimate.grid_min ? json(*cfg.estimate.grid_min) : json()},
                   {"grid_max", cfg.estimate.grid_max ? json(*cfg.estimate.grid_max) : json()},
                   {"resample_theta_per_draw", cfg.estimate.resample_theta_per_draw},
                   {"mean_only", cfg.estimate.mean_only},
                   {"use_stored_latents", cfg.estimate.use_stored_latents}};
  j["benchmark"] = {{"runs", cfg.benchmark_runs}};
  j["coverage"] = {{"replicates", cfg.coverage_replicates},
                   {"alphas", cfg.coverage_alphas},
                   {"grid", cfg.coverage_grid}};
  j["recommend"] = {{"q0", cfg.recommend_q0}, {"slices", cfg.sir_slices}};
  return j.dump(2) + "\n";
}

}  // namespace causalbgm
