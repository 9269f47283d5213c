#pragma once

#include <span>
#include <vector>

#include "causalbgm/rng.hpp"

namespace causalbgm {

// Log-density values with gradients w.r.t. the distribution parameters. All
// variances are plain variances (not standard deviations).

struct ScalarGaussLik {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
};

// log N(y | mean, var)
ScalarGaussLik gaussian_loglik(double y, double mean, double var);

struct IsoGaussLik {
  double value = 0.0;
  std::vector<double> d_mean;
  double d_var = 0.0;
};

// log N(v | mean, var * I), the isotropic multivariate case.
IsoGaussLik gaussian_iso_loglik(std::span<const double> v,
                                std::span<const double> mean, double var);

struct LogisticLik {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
};

// Binary log-likelihood x*xi - log(1+e^xi) with latent logit
// xi = mean + sqrt(var) * eps (reparameterized Gaussian draw).
LogisticLik bernoulli_logistic_loglik(double x, double mean, double var, double eps);

struct BinaryTreatmentLik {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
};

// Binary treatment likelihood with the latent logit integrated by Monte
// Carlo: success probability averaged over `draws` reparameterized logit
// draws from rng, then scored against x in {0, 1}.
BinaryTreatmentLik binary_treatment_loglik(double x, double mean, double var,
                                           int draws, Rng& rng);

}  // namespace causalbgm
