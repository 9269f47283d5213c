#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace causalbgm {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second-moment accumulators for one parameter vector. Owned by a single
// writer; steps mutate the caller's state and parameters in place.
struct AdamState {
  AdamConfig cfg;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  AdamState() = default;
  AdamState(std::size_t dim, const AdamConfig& config)
      : cfg(config), m(dim, 0.0), v(dim, 0.0) {}
};

// One bias-corrected Adam descent step: params -= lr * mhat / (sqrt(vhat) + eps).
// Throws std::runtime_error naming the first offending index if grads contain
// NaN or Inf.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// Ascent variant used by maximization objectives (equivalent to descending on
// the negated gradient).
void adam_ascent(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace causalbgm
