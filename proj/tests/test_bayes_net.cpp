#include <cmath>
#include <vector>

#include "causalbgm/bayes_net.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace causalbgm;

namespace {

VariationalNet small_net(std::uint64_t seed) {
  const MlpSpec spec = MlpSpec::dense(3, {5}, 2, 1, 2);
  Rng rng(seed);
  return VariationalNet::init(spec, rng, 0.05);
}

}  // namespace

TEST_CASE("sampled parameters reproduce mu + sigma * eps exactly") {
  VariationalNet net = small_net(1);
  Rng rng(2);
  const SampledParams sp = sample_params(net, rng);
  REQUIRE(sp.theta.size() == net.dim());
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const double want = net.mu[i] + sigma_from_rho(net.rho[i]) * sp.epsilon[i];
    CHECK(sp.theta[i] == want);
  }
}

TEST_CASE("KL to the standard normal matches the closed form") {
  std::vector<double> mu{0.0, 1.0, -2.0, 0.3};
  std::vector<double> sigma{1.0, 0.5, 2.0, 0.05};
  double want = 0.0;
  for (int i = 0; i < 4; ++i) {
    want += -std::log(sigma[i]) + (sigma[i] * sigma[i] + mu[i] * mu[i] - 1.0) / 2.0;
  }
  CHECK(kl_standard_normal(mu, sigma) == doctest::Approx(want).epsilon(1e-14));
  // mu=0, sigma=1 gives exactly zero.
  std::vector<double> zero{0.0}, one{1.0};
  CHECK(kl_standard_normal(zero, one) == 0.0);
}

TEST_CASE("KL gradients match finite differences") {
  VariationalNet net = small_net(3);
  const auto kl_of = [&net](const std::vector<double>& mu, const std::vector<double>& rho) {
    VariationalNet copy = net;
    copy.mu = mu;
    copy.rho = rho;
    return kl_value(copy);
  };
  std::vector<double> d_mu(net.dim(), 0.0), d_rho(net.dim(), 0.0);
  accumulate_kl_grads(net, 1.0, d_mu, d_rho);
  std::vector<double> mu = net.mu, rho = net.rho;
  for (std::size_t i = 0; i < net.dim(); i += 7) {
    const double fd_mu = testutil::fd_at(mu, i, [&](const std::vector<double>& m) {
      return kl_of(m, net.rho);
    });
    const double fd_rho = testutil::fd_at(rho, i, [&](const std::vector<double>& r) {
      return kl_of(net.mu, r);
    });
    CHECK(testutil::rel_err(d_mu[i], fd_mu) < 1e-6);
    CHECK(testutil::rel_err(d_rho[i], fd_rho) < 1e-6);
  }
}

TEST_CASE("flipout result reports the net's KL") {
  VariationalNet net = small_net(4);
  Rng rng(5);
  Mat inputs(3, 4);
  for (double& v : inputs.data) v = rng.normal();
  const FlipoutResult res = flipout_forward(net, inputs, rng);
  CHECK(res.kl == doctest::Approx(kl_value(net)).epsilon(1e-12));
  CHECK(res.outputs.rows == 2);
  CHECK(res.outputs.cols == 4);
}

TEST_CASE("flipout gives identical examples different effective parameters") {
  VariationalNet net = small_net(6);
  Rng rng(7);
  Mat inputs(3, 2);
  for (int i = 0; i < 3; ++i) inputs(i, 0) = inputs(i, 1) = 0.7 * (i + 1);
  const FlipoutResult res = flipout_forward(net, inputs, rng);
  bool differs = false;
  for (int o = 0; o < 2; ++o) {
    if (res.outputs(o, 0) != res.outputs(o, 1)) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("flipout matches plain reparameterized sampling in distribution") {
  // For a single example the flipout perturbation is an exact posterior draw,
  // so output moments must agree with explicit theta = mu + sigma * eps
  // sampling up to MC error.
  VariationalNet net = small_net(8);
  for (double& r : net.rho) r += 1.0;  // widen sigma so variance dominates MC error
  Rng rng(9);
  const std::vector<double> x{0.4, -1.2, 0.9};
  Mat xin(3, 1);
  for (int i = 0; i < 3; ++i) xin(i, 0) = x[i];

  const int draws = 20000;
  double f_mean = 0.0, f_var = 0.0, r_mean = 0.0, r_var = 0.0;
  for (int d = 0; d < draws; ++d) {
    const double yf = flipout_forward(net, xin, rng).outputs(0, 0);
    f_mean += yf;
    f_var += yf * yf;
    const SampledParams sp = sample_params(net, rng);
    const double yr = mlp_forward(net.spec, sp.theta, x)[0];
    r_mean += yr;
    r_var += yr * yr;
  }
  f_mean /= draws;
  r_mean /= draws;
  f_var = f_var / draws - f_mean * f_mean;
  r_var = r_var / draws - r_mean * r_mean;
  const double sd = std::sqrt(r_var);
  CHECK(std::abs(f_mean - r_mean) < 5.0 * sd / std::sqrt(static_cast<double>(draws)));
  CHECK(f_var / r_var == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("flipout gradients match finite differences under fixed noise") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    VariationalNet net = small_net(20 + seed);
    Rng rng(30 + seed);
    const int B = 4;
    Mat inputs(3, B);
    for (double& v : inputs.data) v = rng.normal();
    Mat cot(2, B);
    for (double& v : cot.data) v = rng.normal();
    const FlipoutNoise noise = FlipoutNoise::draw(net.spec, B, rng);

    FlipoutTape tape;
    flipout_forward(net, inputs, noise, &tape);
    const FlipoutGrads grads = flipout_backward(net, tape, cot);

    const auto value = [&](const std::vector<double>& mu, const std::vector<double>& rho) {
      VariationalNet copy = net;
      copy.mu = mu;
      copy.rho = rho;
      const FlipoutResult r = flipout_forward(copy, inputs, noise);
      double s = 0.0;
      for (int o = 0; o < 2; ++o) {
        for (int b = 0; b < B; ++b) s += cot(o, b) * r.outputs(o, b);
      }
      return s;
    };
    std::vector<double> mu = net.mu, rho = net.rho;
    double worst = 0.0;
    for (std::size_t i = 0; i < net.dim(); i += 3) {
      const double fd_mu = testutil::fd_at(
          mu, i, [&](const std::vector<double>& m) { return value(m, net.rho); });
      const double fd_rho = testutil::fd_at(
          rho, i, [&](const std::vector<double>& r) { return value(net.mu, r); });
      worst = std::max(worst, testutil::rel_err(grads.d_mu[i], fd_mu, 1e-4));
      worst = std::max(worst, testutil::rel_err(grads.d_rho[i], fd_rho, 1e-4));
    }
    CHECK(worst < 1e-4);
  }
}
