#pragma once

#include <span>
#include <vector>

#include "causalbgm/linalg.hpp"
#include "causalbgm/model.hpp"

namespace causalbgm {

// Sliced inverse regression of a response on covariates V (n x p).
struct SirResult {
  std::vector<double> eigenvalues;      // descending, length p
  Mat directions;                       // p x p, column j in original V space
  std::vector<double> cumulative_var;   // prefix sums of eigenvalues / total
  int recommended_k = 0;
  bool used_ratio_rule = true;          // false when the cumulative-variance fallback fired
};

// Equal-count slicing (sizes differ by at most one after sorting by the
// response). The recommended dimension is the largest eigenvalue-ratio elbow
// k = argmax lambda_k / lambda_{k+1}; when the best ratio is below
// ratio_threshold the rule falls back to the smallest k whose cumulative
// variance reaches cumvar_threshold.
SirResult sliced_inverse_regression(const Mat& v, std::span<const double> response,
                                    int n_slices = 10, double ratio_threshold = 2.0,
                                    double cumvar_threshold = 0.9);

// The same elbow rule applied to raw eigenvalues (used for the total latent
// dimension, on the spectrum of cov(V)).
int elbow_dimension(std::span<const double> eigenvalues, double ratio_threshold = 2.0,
                    double cumvar_threshold = 0.9, bool* used_ratio_rule = nullptr);

struct PartitionRecommendation {
  LatentConfig latent;
  SirResult sir_x;                      // directions informing the treatment
  SirResult sir_y;                      // directions informing the outcome
  std::vector<double> cov_eigenvalues;  // spectrum of cov(V)
  int total_dim = 0;
};

// q2 from SIR of X on V, q1 from SIR of Y on V, total latent dimension from
// the covariance spectrum of V, q0 chosen by the user (1..5), and q3 the
// remainder (clamped at 0).
PartitionRecommendation recommend_partition(const Mat& v, std::span<const double> x,
                                            std::span<const double> y, int q0,
                                            int n_slices = 10);

}  // namespace causalbgm
