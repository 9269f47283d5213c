#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "causalbgm/latent.hpp"
#include "causalbgm/likelihoods.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace causalbgm;

namespace {

CausalBgmModel tiny_model(TreatmentKind kind, std::uint64_t seed) {
  LatentConfig lat{2, 1, 1, 1};
  ModelArch arch;
  arch.v_hidden = {6};
  arch.xy_hidden = {5};
  Rng rng(seed);
  return CausalBgmModel::init(lat, kind, 3, arch, rng);
}

struct Problem {
  CausalBgmModel m;
  ThetaTriple thetas;
  std::vector<double> z;
  std::vector<double> v;
  double x = 0.0;
  double y = 0.0;
};

Problem make_problem(TreatmentKind kind, std::uint64_t seed) {
  Problem p{tiny_model(kind, seed), {}, {}, {}, 0.0, 0.0};
  Rng rng(seed + 1000);
  p.thetas = sample_thetas(p.m, rng);
  p.z.resize(p.m.latent.total());
  for (double& c : p.z) c = rng.normal();
  p.v.resize(p.m.covariate_dim);
  for (double& c : p.v) c = rng.normal();
  p.x = kind == TreatmentKind::kBinary ? 1.0 : rng.normal();
  p.y = rng.normal();
  return p;
}

}  // namespace

TEST_CASE("log posterior decomposes into prior and likelihood terms") {
  Problem p = make_problem(TreatmentKind::kContinuous, 1);
  Rng rng(2);
  const LlpTerms terms =
      latent_log_posterior_terms(p.m, p.z, p.x, p.y, p.v, p.thetas, rng);

  double prior = 0.0;
  for (double c : p.z) prior += gaussian_loglik(c, 0.0, 1.0).value;
  CHECK(terms.prior == doctest::Approx(prior).epsilon(1e-14));
  CHECK(terms.v == doctest::Approx(loglik_v(p.m, p.v, p.z, p.thetas.v)).epsilon(1e-14));
  Rng unused(3);
  CHECK(terms.x ==
        doctest::Approx(loglik_x(p.m, p.x, p.z, p.thetas.x, unused)).epsilon(1e-14));
  CHECK(terms.y ==
        doctest::Approx(loglik_y(p.m, p.y, p.x, p.z, p.thetas.y)).epsilon(1e-14));

  Rng again(4);
  CHECK(latent_log_posterior(p.m, p.z, p.x, p.y, p.v, p.thetas, again) ==
        doctest::Approx(terms.total()).epsilon(1e-14));
}

TEST_CASE("latent gradient matches finite differences (continuous)") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Problem p = make_problem(TreatmentKind::kContinuous, 10 + seed);
    Rng rng(1);
    const LlpGrad g = latent_log_posterior_grad(p.m, p.z, p.x, p.y, p.v, p.thetas, rng);
    CHECK(g.d_z.size() == p.z.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < p.z.size(); ++i) {
      const double fd = testutil::fd_at(p.z, i, [&](const std::vector<double>& zz) {
        Rng r2(1);
        return latent_log_posterior(p.m, zz, p.x, p.y, p.v, p.thetas, r2);
      });
      worst = std::max(worst, testutil::rel_err(g.d_z[i], fd, 1e-4));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("latent gradient matches finite differences (binary, common random numbers)") {
  Problem p = make_problem(TreatmentKind::kBinary, 20);
  p.m.xi_draws = 5;
  Rng rng(9);
  const LlpGrad g = latent_log_posterior_grad(p.m, p.z, p.x, p.y, p.v, p.thetas, rng);
  double worst = 0.0;
  for (std::size_t i = 0; i < p.z.size(); ++i) {
    const double fd = testutil::fd_at(p.z, i, [&](const std::vector<double>& zz) {
      Rng r2(9);  // identical logit draws on both sides of the difference
      return latent_log_posterior(p.m, zz, p.x, p.y, p.v, p.thetas, r2);
    });
    worst = std::max(worst, testutil::rel_err(g.d_z[i], fd, 1e-4));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("batched log posterior equals per-individual evaluation") {
  Problem p = make_problem(TreatmentKind::kContinuous, 30);
  Rng rng(31);
  const int B = 6, q = p.m.latent.total();
  Mat Z(q, B), V(B, p.m.covariate_dim);
  std::vector<double> xs(B), ys(B);
  std::vector<int> rows(B);
  for (int b = 0; b < B; ++b) {
    rows[b] = b;
    xs[b] = rng.normal();
    ys[b] = rng.normal();
    for (int i = 0; i < q; ++i) Z(i, b) = rng.normal();
    for (int j = 0; j < p.m.covariate_dim; ++j) V(b, j) = rng.normal();
  }
  Rng batch_rng(32);
  const BatchLlp got = latent_log_posterior_batch(p.m, Z, xs, ys, V, rows,
                                                  p.thetas, batch_rng, true);
  REQUIRE(got.value.size() == static_cast<std::size_t>(B));
  REQUIRE(got.d_z.rows == q);
  REQUIRE(got.d_z.cols == B);
  for (int b = 0; b < B; ++b) {
    std::vector<double> z(q);
    for (int i = 0; i < q; ++i) z[i] = Z(i, b);
    std::vector<double> v(V.row(b), V.row(b) + p.m.covariate_dim);
    Rng r(33);
    const LlpGrad single =
        latent_log_posterior_grad(p.m, z, xs[b], ys[b], v, p.thetas, r);
    CHECK(got.value[b] == doctest::Approx(single.value).epsilon(1e-12));
    for (int i = 0; i < q; ++i) {
      CHECK(got.d_z(i, b) == doctest::Approx(single.d_z[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("metropolis acceptance rule") {
  Rng rng(40);
  // Uphill moves always accepted, and exactly one uniform consumed per call.
  Rng a(41), b(41);
  CHECK(mh_accept(1.0, 0.0, a));
  (void)b.uniform();
  CHECK(a.uniform() == b.uniform());

  // Downhill acceptance frequency approximates exp(delta).
  const double delta = -0.7;
  int accepted = 0;
  const int trials = 200000;
  for (int t = 0; t < trials; ++t) {
    if (mh_accept(delta, 0.0, rng)) ++accepted;
  }
  const double p_hat = static_cast<double>(accepted) / trials;
  const double p_true = std::exp(delta);
  CHECK(std::abs(p_hat - p_true) < 4.0 * std::sqrt(p_true * (1.0 - p_true) / trials));

  // Non-finite proposals are rejected outright.
  Rng c(42);
  CHECK_FALSE(mh_accept(-std::numeric_limits<double>::infinity(), 0.0, c));
}

TEST_CASE("flat target accepts every proposal and random-walks") {
  const auto flat = [](std::span<const double>) { return 0.0; };
  MhConfig cfg;
  cfg.burn_in = 50;
  cfg.keep = 200;
  cfg.proposal_std = 0.5;
  Rng rng(50);
  std::vector<double> init{0.0, 0.0};
  const PosteriorChain chain = mh_chain(2, flat, cfg, rng, init);
  CHECK(chain.q == 2);
  CHECK(chain.num_draws() == 200);
  CHECK(chain.accepted == chain.proposed);
  CHECK(chain.proposed == 250);
  // Consecutive draws differ (every proposal accepted, steps are nonzero).
  CHECK(chain.draw(0)[0] != chain.draw(1)[0]);
}

TEST_CASE("thinning keeps every thin-th post-burn-in state") {
  // Rng consumption per iteration does not depend on storage, so a thinned
  // chain visits exactly the same states as an unthinned one with the same
  // seed and keeps every thin-th of them.
  const auto target = [](std::span<const double> z) { return -0.5 * z[0] * z[0]; };
  std::vector<double> init{0.2};
  MhConfig all;
  all.burn_in = 30;
  all.keep = 8;
  all.proposal_std = 0.7;
  MhConfig thinned = all;
  thinned.keep = 4;
  thinned.thin = 2;
  Rng r1(91), r2(91);
  const PosteriorChain dense = mh_chain(1, target, all, r1, init);
  const PosteriorChain sparse = mh_chain(1, target, thinned, r2, init);
  REQUIRE(sparse.num_draws() == 4);
  CHECK(sparse.proposed == dense.proposed);
  for (int s = 0; s < 4; ++s) {
    CHECK(sparse.draw(s)[0] == dense.draw(2 * s + 1)[0]);
  }
  MhConfig bad = all;
  bad.thin = 0;
  Rng r3(91);
  CHECK_THROWS_AS(mh_chain(1, target, bad, r3, init), std::invalid_argument);
}

TEST_CASE("chain that cannot move stalls with an error") {
  // Target is -inf everywhere except the exact starting point, so every
  // proposal is rejected and the stall guard must fire.
  std::vector<double> init{0.3};
  const auto spike = [&init](std::span<const double> z) {
    return z[0] == init[0] ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  MhConfig cfg;
  cfg.burn_in = 100;  // stall threshold is 10*keep consecutive rejections
  cfg.keep = 3;
  Rng rng(60);
  CHECK_THROWS_AS(mh_chain(1, spike, cfg, rng, init), std::runtime_error);
}

TEST_CASE("standard-normal target: empirical moments match") {
  // Gaussian target through the generic chain; checked again at acceptance
  // scale in the acceptance suite.
  const auto log_norm = [](std::span<const double> z) {
    double s = 0.0;
    for (double c : z) s -= 0.5 * c * c;
    return s;
  };
  MhConfig cfg;
  cfg.burn_in = 2000;
  cfg.keep = 4000;
  cfg.proposal_std = 1.0;
  Rng rng(70);
  const PosteriorChain chain = mh_chain(3, log_norm, cfg, rng);
  REQUIRE(chain.num_draws() == 4000);
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0, second = 0.0;
    for (int s = 0; s < chain.num_draws(); ++s) {
      mean += chain.draw(s)[i];
      second += chain.draw(s)[i] * chain.draw(s)[i];
    }
    mean /= chain.num_draws();
    second /= chain.num_draws();
    CHECK(std::abs(mean) < 0.15);
    CHECK(second - mean * mean == doctest::Approx(1.0).epsilon(0.15));
  }
  const double rate = chain.acceptance_rate();
  CHECK(rate > 0.1);
  CHECK(rate < 0.9);
}

TEST_CASE("burn-in tuning adapts the proposal scale") {
  const auto log_norm = [](std::span<const double> z) {
    return -0.5 * z[0] * z[0];
  };
  MhConfig cfg;
  cfg.burn_in = 3000;
  cfg.keep = 2000;
  cfg.proposal_std = 25.0;  // far too wide; tuning must rescue it
  cfg.tune_during_burn_in = true;
  Rng rng(80);
  const PosteriorChain chain = mh_chain(1, log_norm, cfg, rng);
  double kept_rate = static_cast<double>(chain.accepted) / chain.proposed;
  CHECK(kept_rate > 0.12);

  // Without tuning the same setup barely moves.
  cfg.tune_during_burn_in = false;
  Rng rng2(80);
  bool stalled = false;
  double untended_rate = 1.0;
  try {
    const PosteriorChain raw = mh_chain(1, log_norm, cfg, rng2);
    untended_rate = static_cast<double>(raw.accepted) / raw.proposed;
  } catch (const std::runtime_error&) {
    stalled = true;
  }
  CHECK((stalled || untended_rate < kept_rate));
}

TEST_CASE("model-target sampler runs and respects z_init") {
  Problem p = make_problem(TreatmentKind::kContinuous, 90);
  MhConfig cfg;
  cfg.burn_in = 20;
  cfg.keep = 30;
  cfg.proposal_std = 0.4;
  Rng rng(91), rng_same(91);
  const PosteriorChain a = mh_sample(p.m, p.x, p.y, p.v, p.thetas, cfg, rng, p.z);
  const PosteriorChain b = mh_sample(p.m, p.x, p.y, p.v, p.thetas, cfg, rng_same, p.z);
  CHECK(a.draws == b.draws);  // fully deterministic given the rng
  CHECK(a.num_draws() == 30);
  CHECK(a.q == p.m.latent.total());

  Rng rng2(92);
  const PosteriorChain c = mh_sample(p.m, p.x, p.y, p.v, p.thetas, cfg, rng2, p.z);
  CHECK(a.draws != c.draws);

  std::vector<double> bad_init(p.m.latent.total() + 1, 0.0);
  Rng rng3(93);
  CHECK_THROWS_AS(mh_sample(p.m, p.x, p.y, p.v, p.thetas, cfg, rng3, bad_init),
                  std::invalid_argument);
}

TEST_CASE("latent ascent step improves the log posterior") {
  Problem p = make_problem(TreatmentKind::kContinuous, 100);
  AdamConfig acfg;
  acfg.lr = 0.01;
  AdamState adam(p.z.size(), acfg);
  Rng rng(101);
  std::vector<double> z = p.z;
  Rng eval(1);
  const double before = latent_log_posterior(p.m, z, p.x, p.y, p.v, p.thetas, eval);
  double after = before;
  for (int t = 0; t < 50; ++t) {
    const bool reinit = latent_sgd_step(p.m, z, adam, p.x, p.y, p.v, p.thetas, rng);
    CHECK_FALSE(reinit);
  }
  Rng eval2(1);
  after = latent_log_posterior(p.m, z, p.x, p.y, p.v, p.thetas, eval2);
  CHECK(after > before);
}
