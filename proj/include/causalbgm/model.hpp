#pragma once

#include <span>
#include <vector>

#include "causalbgm/bayes_net.hpp"
#include "causalbgm/mlp.hpp"
#include "causalbgm/rng.hpp"

namespace causalbgm {

// Latent partition Z = (Z0, Z1, Z2, Z3), stored concatenated in that order:
// Z0 drives both treatment and outcome, Z1 only the outcome, Z2 only the
// treatment, Z3 only the covariates.
struct LatentConfig {
  int q0 = 1;
  int q1 = 1;
  int q2 = 1;
  int q3 = 0;

  int total() const { return q0 + q1 + q2 + q3; }
  int z1_offset() const { return q0; }
  int z2_offset() const { return q0 + q1; }
  int z3_offset() const { return q0 + q1 + q2; }
  void validate() const;  // throws std::invalid_argument
};

enum class TreatmentKind { kContinuous, kBinary };

struct ModelArch {
  std::vector<int> v_hidden{64, 64, 64, 64, 64};
  std::vector<int> xy_hidden{64, 32, 8};
};

// Generative model: V | Z ~ N(mu_v(Z), sigma2_v(Z) I), outcome
// Y | X, Z0, Z1 ~ N(mu_y, sigma2_y), and treatment X | Z0, Z2 either Gaussian
// (continuous) or Bernoulli with a Gaussian latent logit (binary). Each
// network's final output digit is its variance (Softplus, floored).
struct CausalBgmModel {
  LatentConfig latent;
  TreatmentKind kind = TreatmentKind::kContinuous;
  int covariate_dim = 0;
  int xi_draws = 1;  // binary treatment: logit draws averaged per likelihood evaluation

  VariationalNet net_v;  // [q] -> [p + 1]
  VariationalNet net_x;  // [q0 + q2] -> [2]
  VariationalNet net_y;  // [1 + q0 + q1] -> [2]

  static CausalBgmModel init(const LatentConfig& latent, TreatmentKind kind,
                             int covariate_dim, const ModelArch& arch, Rng& rng,
                             double sigma_init = 0.05);
  void validate() const;
};

// Canonical network input layouts. The treatment network reads [z0 | z2]; the
// outcome network reads [x | z0 | z1].
void build_xnet_input(const LatentConfig& latent, std::span<const double> z,
                      std::span<double> out);
void build_ynet_input(const LatentConfig& latent, double x,
                      std::span<const double> z, std::span<double> out);

// Log-likelihood terms under fixed sampled parameters. Throw
// std::runtime_error if a network emits non-finite values.
double loglik_v(const CausalBgmModel& m, std::span<const double> v,
                std::span<const double> z, const ParamVector& theta_v);
// For binary treatment the latent logit is drawn by reparameterization from
// rng (m.xi_draws draws, probability-averaged); continuous ignores rng.
double loglik_x(const CausalBgmModel& m, double x, std::span<const double> z,
                const ParamVector& theta_x, Rng& rng);
double loglik_y(const CausalBgmModel& m, double y, double x,
                std::span<const double> z, const ParamVector& theta_y);

struct OutcomeMoments {
  double mean = 0.0;
  double var = 0.0;
};

OutcomeMoments predict_outcome(const CausalBgmModel& m, double x,
                               std::span<const double> z0,
                               std::span<const double> z1,
                               const ParamVector& theta_y);

// Deterministic helper networks used by the adversarial initializer.
struct DeterministicNet {
  MlpSpec spec;
  ParamVector params;
};

std::vector<double> encoder_forward(const DeterministicNet& net, std::span<const double> v);
double discriminator_forward(const DeterministicNet& net, std::span<const double> z);

}  // namespace causalbgm
