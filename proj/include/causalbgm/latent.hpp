#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "causalbgm/adam.hpp"
#include "causalbgm/model.hpp"

namespace causalbgm {

// One sampled parameter set for each of the three networks.
struct ThetaTriple {
  ParamVector v;
  ParamVector x;
  ParamVector y;
};

ThetaTriple sample_thetas(const CausalBgmModel& m, Rng& rng);

// Unnormalized log posterior of one individual's latent vector:
// log pi(z) + log P(v|z) + log P(x|z0,z2) + log P(y|x,z0,z1), under fixed
// sampled parameters. For binary treatment, rng supplies the latent logit
// draws.
struct LlpTerms {
  double prior = 0.0;
  double v = 0.0;
  double x = 0.0;
  double y = 0.0;
  double total() const { return prior + v + x + y; }
};

LlpTerms latent_log_posterior_terms(const CausalBgmModel& m, std::span<const double> z,
                                    double x, double y, std::span<const double> v,
                                    const ThetaTriple& thetas, Rng& rng);

double latent_log_posterior(const CausalBgmModel& m, std::span<const double> z,
                            double x, double y, std::span<const double> v,
                            const ThetaTriple& thetas, Rng& rng);

struct LlpGrad {
  double value = 0.0;
  std::vector<double> d_z;
};

LlpGrad latent_log_posterior_grad(const CausalBgmModel& m, std::span<const double> z,
                                  double x, double y, std::span<const double> v,
                                  const ThetaTriple& thetas, Rng& rng);

// Batched log posterior over a panel of individuals sharing one parameter
// sample. Z is q x B (columns are individuals); V rows are individuals.
struct BatchLlp {
  std::vector<double> value;  // per column
  Mat d_z;                    // q x B, empty unless want_grad
};

BatchLlp latent_log_posterior_batch(const CausalBgmModel& m, const Mat& Z,
                                    std::span<const double> xs, std::span<const double> ys,
                                    const Mat& V, std::span<const int> rows,
                                    const ThetaTriple& thetas, Rng& rng, bool want_grad);

// One Adam ascent step on z maximizing the latent log posterior. If the
// gradient is non-finite, z is re-initialized from the standard-normal prior
// (and the Adam state reset) instead of stepping; returns true in that case.
bool latent_sgd_step(const CausalBgmModel& m, std::span<double> z, AdamState& adam,
                     double x, double y, std::span<const double> v,
                     const ThetaTriple& thetas, Rng& rng);

// Random-walk Metropolis-Hastings over z with N(0, proposal_std^2 I) steps.
struct MhConfig {
  int burn_in = 5000;
  int keep = 3000;
  int thin = 1;  // keep every thin-th post-burn-in state
  double proposal_std = 1.0;
  bool tune_during_burn_in = false;  // Robbins-Monro scale adaptation, burn-in only
};

struct PosteriorChain {
  int q = 0;
  int burn_in = 0;
  std::vector<double> draws;  // keep x q, row-major
  std::int64_t accepted = 0;
  std::int64_t proposed = 0;

  int num_draws() const { return q == 0 ? 0 : static_cast<int>(draws.size()) / q; }
  std::span<const double> draw(int s) const {
    return {draws.data() + static_cast<std::size_t>(s) * q, static_cast<std::size_t>(q)};
  }
  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

// The Metropolis accept/reject rule on log densities (shared by tests).
bool mh_accept(double log_target_proposed, double log_target_current, Rng& rng);

// Generic random-walk chain over an arbitrary log target; mh_sample wraps
// this with the model's latent log posterior. Draw order per iteration: q
// proposal normals, any draws the target itself consumes, one acceptance
// uniform.
PosteriorChain mh_chain(int q, const std::function<double(std::span<const double>)>& log_target,
                        const MhConfig& config, Rng& rng,
                        std::span<const double> z_init = {});

// Samples one individual's latent posterior. z_init empty means "draw the
// initial state from the prior". Throws std::runtime_error if the chain
// stalls (more than 10*keep consecutive rejections).
PosteriorChain mh_sample(const CausalBgmModel& m, double x, double y,
                         std::span<const double> v, const ThetaTriple& thetas,
                         const MhConfig& config, Rng& rng,
                         std::span<const double> z_init = {});

}  // namespace causalbgm
