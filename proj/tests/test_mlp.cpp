#include <cmath>
#include <vector>
#include <stdexcept>

#include "causalbgm/mlp.hpp"
#include "causalbgm/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace causalbgm;

namespace {

std::vector<double> random_input(int width, Rng& rng) {
  std::vector<double> x(width);
  for (double& v : x) v = rng.normal();
  return x;
}

std::vector<double> random_cotangent(int width, Rng& rng) {
  std::vector<double> c(width);
  for (double& v : c) v = rng.normal();
  return c;
}

double dot_forward(const MlpSpec& spec, const std::vector<double>& params,
                   const std::vector<double>& input, const std::vector<double>& cot) {
  const std::vector<double> out = mlp_forward(spec, params, input);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
  return s;
}

}  // namespace

TEST_CASE("spec bookkeeping") {
  const MlpSpec spec = MlpSpec::dense(3, {5, 4}, 2, 1, 2);
  CHECK(spec.param_count() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2));
  CHECK(spec.weight_offset(0) == 0);
  CHECK(spec.bias_offset(0) == 15);
  CHECK(spec.weight_offset(1) == 20);
  CHECK(spec.num_layers() == 3);
  CHECK(spec.has_variance_slot());
  CHECK_THROWS_AS(MlpSpec::dense(0, {3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(MlpSpec::dense(2, {3}, 1, 1, 3), std::invalid_argument);
}

TEST_CASE("xavier bounds and zero biases") {
  const MlpSpec spec = MlpSpec::dense(4, {8}, 3);
  Rng rng(5);
  const ParamVector p = xavier_uniform(spec, rng);
  const double lim0 = std::sqrt(6.0 / (4 + 8));
  for (std::size_t i = spec.weight_offset(0); i < spec.bias_offset(0); ++i) {
    CHECK(std::abs(p[i]) <= lim0);
  }
  for (std::size_t i = spec.bias_offset(0); i < spec.weight_offset(1); ++i) {
    CHECK(p[i] == 0.0);
  }
}

TEST_CASE("variance outputs pass through softplus with a floor") {
  const MlpSpec spec = MlpSpec::dense(2, {}, 2, 1, 2);
  // One linear layer; force a very negative pre-activation on digit 1.
  ParamVector params(spec.param_count(), 0.0);
  params[spec.bias_offset(0) + 0] = -3.0;
  params[spec.bias_offset(0) + 1] = -50.0;
  const std::vector<double> out = mlp_forward(spec, params, std::vector<double>{0.0, 0.0});
  CHECK(out[0] == -3.0);                 // identity slot untouched
  CHECK(out[1] == kVarianceFloor);       // softplus(-50) underflows to the floor
  params[spec.bias_offset(0) + 1] = 2.0;
  const std::vector<double> out2 = mlp_forward(spec, params, std::vector<double>{0.0, 0.0});
  CHECK(out2[1] == doctest::Approx(softplus(2.0)).epsilon(1e-12));
}

TEST_CASE("gradient check across architectures and seeds") {
  const std::vector<MlpSpec> specs = {
      MlpSpec::dense(3, {6, 5}, 2, 1, 2),
      MlpSpec::dense(2, {4}, 2, 1, 2),
      MlpSpec::dense(5, {8, 8, 8}, 6, 5, 6),
      MlpSpec::dense(4, {}, 3),
  };
  for (const MlpSpec& spec : specs) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(1000 + seed);
      ParamVector params = xavier_uniform(spec, rng);
      for (double& v : params) v += 0.05 * rng.normal();  // non-zero biases too
      const std::vector<double> input = random_input(spec.input_width(), rng);
      const std::vector<double> cot = random_cotangent(spec.output_width(), rng);

      const MlpGrads grads = mlp_backward(spec, params, input, cot);

      const double worst_p = testutil::max_grad_err(
          params, grads.params,
          [&](const std::vector<double>& p) { return dot_forward(spec, p, input, cot); });
      CHECK(worst_p < 1e-4);

      std::vector<double> in_copy = input;
      const double worst_i = testutil::max_grad_err(
          in_copy, grads.input,
          [&](const std::vector<double>& x) { return dot_forward(spec, params, x, cot); });
      CHECK(worst_i < 1e-4);
    }
  }
}

TEST_CASE("batched forward equals single-example forward") {
  const MlpSpec spec = MlpSpec::dense(4, {7, 6}, 3, 2, 3);
  Rng rng(77);
  const ParamVector params = xavier_uniform(spec, rng);
  const int B = 9;
  Mat inputs(4, B);
  for (double& v : inputs.data) v = rng.normal();
  const Mat out = mlp_forward_batch(spec, params, inputs);
  MlpWorkspace ws;
  for (int b = 0; b < B; ++b) {
    std::vector<double> x(4);
    for (int i = 0; i < 4; ++i) x[i] = inputs(i, b);
    const std::vector<double> single = mlp_forward(spec, params, x);
    const std::span<const double> fast = mlp_forward(spec, params, x, ws);
    for (int o = 0; o < 3; ++o) {
      CHECK(out(o, b) == doctest::Approx(single[o]).epsilon(1e-12));
      CHECK(fast[o] == single[o]);
    }
  }
}

TEST_CASE("batched backward equals single-example backward") {
  const MlpSpec spec = MlpSpec::dense(3, {5}, 2, 1, 2);
  Rng rng(78);
  const ParamVector params = xavier_uniform(spec, rng);
  const int B = 5;
  Mat inputs(3, B), cots(2, B);
  for (double& v : inputs.data) v = rng.normal();
  for (double& v : cots.data) v = rng.normal();

  BatchTape tape;
  mlp_forward_batch(spec, params, inputs, &tape);
  const BatchGrads batch = mlp_backward_batch(spec, params, tape, cots);

  ParamVector want_params(spec.param_count(), 0.0);
  for (int b = 0; b < B; ++b) {
    std::vector<double> x(3), c(2);
    for (int i = 0; i < 3; ++i) x[i] = inputs(i, b);
    for (int o = 0; o < 2; ++o) c[o] = cots(o, b);
    const MlpGrads g = mlp_backward(spec, params, x, c);
    for (std::size_t k = 0; k < want_params.size(); ++k) want_params[k] += g.params[k];
    for (int i = 0; i < 3; ++i) {
      CHECK(batch.input(i, b) == doctest::Approx(g.input[i]).epsilon(1e-12));
    }
  }
  for (std::size_t k = 0; k < want_params.size(); ++k) {
    CHECK(batch.params[k] == doctest::Approx(want_params[k]).epsilon(1e-12));
  }
}

TEST_CASE("softplus_inv inverts softplus") {
  for (double y : {1e-5, 0.1, 0.5, 1.0, 10.0, 40.0}) {
    CHECK(softplus(softplus_inv(y)) == doctest::Approx(y).epsilon(1e-10));
  }
}
