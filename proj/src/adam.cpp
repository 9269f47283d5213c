#include "causalbgm/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace causalbgm {

namespace {

void adam_impl(AdamState& state, std::span<double> params,
               std::span<const double> grads, double sign) {
  if (params.size() != state.m.size() || grads.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: size mismatch between state, params, and grads");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  state.t += 1;
  const AdamConfig& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = sign * grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  adam_impl(state, params, grads, 1.0);
}

void adam_ascent(AdamState& state, std::span<double> params, std::span<const double> grads) {
  adam_impl(state, params, grads, -1.0);
}

}  // namespace causalbgm
