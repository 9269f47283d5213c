#include "causalbgm/likelihoods.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "causalbgm/mlp.hpp"

namespace causalbgm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

void check_var(double var) {
  if (!(var > 0.0)) throw std::invalid_argument("gaussian log-likelihood: variance must be positive");
}
}  // namespace

ScalarGaussLik gaussian_loglik(double y, double mean, double var) {
  check_var(var);
  const double r = y - mean;
  ScalarGaussLik out;
  out.value = -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
  out.d_mean = r / var;
  out.d_var = -0.5 / var + 0.5 * r * r / (var * var);
  return out;
}

IsoGaussLik gaussian_iso_loglik(std::span<const double> v,
                                std::span<const double> mean, double var) {
  check_var(var);
  if (v.size() != mean.size()) {
    throw std::invalid_argument("gaussian_iso_loglik: dimension mismatch");
  }
  const double p = static_cast<double>(v.size());
  IsoGaussLik out;
  out.d_mean.resize(v.size());
  double ss = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double r = v[j] - mean[j];
    ss += r * r;
    out.d_mean[j] = r / var;
  }
  out.value = -0.5 * p * (kLog2Pi + std::log(var)) - 0.5 * ss / var;
  out.d_var = -0.5 * p / var + 0.5 * ss / (var * var);
  return out;
}

LogisticLik bernoulli_logistic_loglik(double x, double mean, double var, double eps) {
  check_var(var);
  if (x != 0.0 && x != 1.0) {
    throw std::invalid_argument("bernoulli_logistic_loglik: treatment must be 0 or 1");
  }
  const double sd = std::sqrt(var);
  const double xi = mean + sd * eps;
  LogisticLik out;
  out.value = x * xi - softplus(xi);
  const double d_xi = x - sigmoid(xi);
  out.d_mean = d_xi;
  out.d_var = d_xi * eps / (2.0 * sd);
  return out;
}

BinaryTreatmentLik binary_treatment_loglik(double x, double mean, double var,
                                           int draws, Rng& rng) {
  check_var(var);
  if (x != 0.0 && x != 1.0) {
    throw std::invalid_argument("binary_treatment_loglik: treatment must be 0 or 1");
  }
  if (draws < 1) throw std::invalid_argument("binary_treatment_loglik: draws must be positive");
  const double sd = std::sqrt(var);
  double prob = 0.0, d_mean = 0.0, d_var = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double eps = rng.normal();
    const double p = sigmoid(mean + sd * eps);
    const double dp = p * (1.0 - p);
    prob += p;
    d_mean += dp;
    d_var += dp * eps / (2.0 * sd);
  }
  const double inv = 1.0 / draws;
  prob *= inv;
  d_mean *= inv;
  d_var *= inv;
  // Clamp away from {0,1} so the log stays finite.
  prob = std::min(std::max(prob, 1e-12), 1.0 - 1e-12);
  BinaryTreatmentLik out;
  if (x == 1.0) {
    out.value = std::log(prob);
    out.d_mean = d_mean / prob;
    out.d_var = d_var / prob;
  } else {
    out.value = std::log1p(-prob);
    out.d_mean = -d_mean / (1.0 - prob);
    out.d_var = -d_var / (1.0 - prob);
  }
  return out;
}

}  // namespace causalbgm
