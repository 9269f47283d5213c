#pragma once

#include <span>
#include <vector>

#include "causalbgm/mlp.hpp"
#include "causalbgm/rng.hpp"

namespace causalbgm {

inline constexpr double kSigmaFloor = 1e-12;

inline double sigma_from_rho(double rho) {
  const double s = softplus(rho);
  return s > kSigmaFloor ? s : kSigmaFloor;
}

// Mean-field Gaussian posterior over one network's flat parameter vector:
// theta_i ~ N(mu_i, sigma(rho_i)^2) with a standard-normal prior.
struct VariationalNet {
  MlpSpec spec;
  ParamVector mu;
  ParamVector rho;

  std::size_t dim() const { return mu.size(); }

  // Xavier-uniform means, constant posterior scale sigma_init.
  static VariationalNet init(const MlpSpec& spec, Rng& rng, double sigma_init = 0.05);
};

struct SampledParams {
  ParamVector theta;
  ParamVector epsilon;  // the standard-normal draw, theta = mu + sigma*eps
};

SampledParams sample_params(const VariationalNet& net, Rng& rng);

// KL(q || N(0, I)) summed over coordinates: -log(sigma) + (sigma^2 + mu^2 - 1)/2.
double kl_standard_normal(std::span<const double> mu, std::span<const double> sigma);
double kl_value(const VariationalNet& net);

// Adds weight * dKL/d(mu, rho) into the accumulators.
void accumulate_kl_grads(const VariationalNet& net, double weight,
                         std::span<double> d_mu, std::span<double> d_rho);

// Flipout minibatch evaluation: a single shared Gaussian perturbation per
// parameter is decorrelated across examples with per-example, per-layer
// Rademacher sign vectors. Example n of layer l sees the effective weights
//   W_eff = W_mean + DeltaW .* (s_n r_n^T),  b_eff = b_mean + Deltab .* s_n
// where DeltaW = sigma .* E. Marginally each example's effective parameters
// are an exact draw from the mean-field posterior.
struct FlipoutNoise {
  ParamVector eps;             // shared N(0,1), one per parameter
  std::vector<Mat> in_signs;   // per layer: widths[l] x batch
  std::vector<Mat> out_signs;  // per layer: widths[l+1] x batch

  static FlipoutNoise draw(const MlpSpec& spec, int batch, Rng& rng);
};

struct FlipoutTape {
  BatchTape base;               // pre/act panels of the perturbed forward pass
  FlipoutNoise noise;
  std::vector<Mat> delta_w;     // per layer: widths[l+1] x widths[l], sigma .* eps
  std::vector<ParamVector> delta_b;
};

struct FlipoutResult {
  Mat outputs;  // output_width x batch
  double kl = 0.0;
};

FlipoutResult flipout_forward(const VariationalNet& net, const Mat& inputs,
                              const FlipoutNoise& noise, FlipoutTape* tape = nullptr);
FlipoutResult flipout_forward(const VariationalNet& net, const Mat& inputs,
                              Rng& rng, FlipoutTape* tape = nullptr);

struct FlipoutGrads {
  std::vector<double> d_mu;
  std::vector<double> d_rho;
};

// Gradients of <cotangents, outputs> w.r.t. the variational parameters.
// (KL gradients are separate; see accumulate_kl_grads.)
FlipoutGrads flipout_backward(const VariationalNet& net, const FlipoutTape& tape,
                              const Mat& cotangents);

}  // namespace causalbgm
