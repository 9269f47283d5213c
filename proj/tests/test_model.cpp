#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "causalbgm/likelihoods.hpp"
#include "causalbgm/model.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace causalbgm;

namespace {

CausalBgmModel tiny_model(TreatmentKind kind, std::uint64_t seed) {
  LatentConfig lat{2, 1, 1, 2};
  ModelArch arch;
  arch.v_hidden = {6};
  arch.xy_hidden = {5};
  Rng rng(seed);
  return CausalBgmModel::init(lat, kind, 4, arch, rng);
}

}  // namespace

TEST_CASE("latent partition offsets and validation") {
  LatentConfig lat{3, 2, 5, 7};
  CHECK(lat.total() == 17);
  CHECK(lat.z1_offset() == 3);
  CHECK(lat.z2_offset() == 5);
  CHECK(lat.z3_offset() == 10);
  lat.validate();

  LatentConfig no_confounder{0, 1, 1, 1};
  CHECK_THROWS_AS(no_confounder.validate(), std::invalid_argument);
  LatentConfig negative{1, -1, 0, 0};
  CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
  LatentConfig only_confounder{1, 0, 0, 0};
  only_confounder.validate();  // smallest legal partition
}

TEST_CASE("network input layouts pick the right latent blocks") {
  LatentConfig lat{2, 1, 1, 2};
  // z = [z0 | z1 | z2 | z3] with distinguishable values.
  std::vector<double> z{10.0, 11.0, 20.0, 30.0, 40.0, 41.0};
  std::vector<double> xin(3), yin(4);
  build_xnet_input(lat, z, xin);
  CHECK(xin == std::vector<double>{10.0, 11.0, 30.0});
  build_ynet_input(lat, 7.5, z, yin);
  CHECK(yin == std::vector<double>{7.5, 10.0, 11.0, 20.0});

  std::vector<double> wrong(2);
  CHECK_THROWS_AS(build_xnet_input(lat, z, wrong), std::invalid_argument);
}

TEST_CASE("initialization shapes match the partition and is seed-reproducible") {
  CausalBgmModel m = tiny_model(TreatmentKind::kContinuous, 11);
  m.validate();
  CHECK(m.net_v.spec.input_width() == 6);
  CHECK(m.net_v.spec.output_width() == 5);  // p + 1, variance in the last digit
  CHECK(m.net_v.spec.var_begin == 4);
  CHECK(m.net_x.spec.input_width() == 3);   // q0 + q2
  CHECK(m.net_y.spec.input_width() == 4);   // 1 + q0 + q1
  CHECK(m.net_x.spec.output_width() == 2);
  CHECK(m.net_y.spec.output_width() == 2);

  CausalBgmModel same = tiny_model(TreatmentKind::kContinuous, 11);
  CausalBgmModel other = tiny_model(TreatmentKind::kContinuous, 12);
  CHECK(same.net_v.mu == m.net_v.mu);
  CHECK(same.net_y.mu == m.net_y.mu);
  CHECK(other.net_v.mu != m.net_v.mu);
}

TEST_CASE("covariate log-likelihood composes the net with the isotropic Gaussian") {
  CausalBgmModel m = tiny_model(TreatmentKind::kContinuous, 21);
  Rng rng(22);
  std::vector<double> z(6), v(4);
  for (double& c : z) c = rng.normal();
  for (double& c : v) c = rng.normal();
  const ParamVector theta = sample_params(m.net_v, rng).theta;

  const std::vector<double> out = mlp_forward(m.net_v.spec, theta, z);
  const IsoGaussLik want =
      gaussian_iso_loglik(v, std::span(out).first(4), out[4]);
  CHECK(loglik_v(m, v, z, theta) == doctest::Approx(want.value).epsilon(1e-14));
}

TEST_CASE("continuous treatment log-likelihood composes the net with the Gaussian") {
  CausalBgmModel m = tiny_model(TreatmentKind::kContinuous, 31);
  Rng rng(32);
  std::vector<double> z(6);
  for (double& c : z) c = rng.normal();
  const ParamVector theta = sample_params(m.net_x, rng).theta;

  std::vector<double> xin(3);
  build_xnet_input(m.latent, z, xin);
  const std::vector<double> out = mlp_forward(m.net_x.spec, theta, xin);
  const ScalarGaussLik want = gaussian_loglik(0.8, out[0], out[1]);
  Rng unused(1);
  CHECK(loglik_x(m, 0.8, z, theta, unused) == doctest::Approx(want.value).epsilon(1e-14));
}

TEST_CASE("binary treatment log-likelihood uses the MC logit average") {
  CausalBgmModel m = tiny_model(TreatmentKind::kBinary, 41);
  m.xi_draws = 7;
  Rng rng(42);
  std::vector<double> z(6);
  for (double& c : z) c = rng.normal();
  const ParamVector theta = sample_params(m.net_x, rng).theta;

  std::vector<double> xin(3);
  build_xnet_input(m.latent, z, xin);
  const std::vector<double> out = mlp_forward(m.net_x.spec, theta, xin);

  for (double x : {0.0, 1.0}) {
    Rng a(77), b(77);
    const BinaryTreatmentLik want =
        binary_treatment_loglik(x, out[0], out[1], m.xi_draws, a);
    CHECK(loglik_x(m, x, z, theta, b) == doctest::Approx(want.value).epsilon(1e-14));
  }
}

TEST_CASE("outcome log-likelihood and moment prediction agree with the net") {
  CausalBgmModel m = tiny_model(TreatmentKind::kContinuous, 51);
  Rng rng(52);
  std::vector<double> z(6);
  for (double& c : z) c = rng.normal();
  const ParamVector theta = sample_params(m.net_y, rng).theta;
  const double x = 0.4, y = -1.1;

  std::vector<double> yin(4);
  build_ynet_input(m.latent, x, z, yin);
  const std::vector<double> out = mlp_forward(m.net_y.spec, theta, yin);
  CHECK(loglik_y(m, y, x, z, theta) ==
        doctest::Approx(gaussian_loglik(y, out[0], out[1]).value).epsilon(1e-14));

  const OutcomeMoments mom = predict_outcome(m, x, std::span(z).first(2),
                                             std::span(z).subspan(2, 1), theta);
  CHECK(mom.mean == out[0]);
  CHECK(mom.var == out[1]);
  CHECK(mom.var >= kVarianceFloor);
}

TEST_CASE("non-finite network output is reported, not propagated") {
  CausalBgmModel m = tiny_model(TreatmentKind::kContinuous, 61);
  Rng rng(62);
  std::vector<double> z(6, 0.3), v(4, 0.1);
  ParamVector theta = sample_params(m.net_v, rng).theta;
  theta[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(loglik_v(m, v, z, theta), std::runtime_error);
}

TEST_CASE("encoder and discriminator wrappers evaluate their specs") {
  Rng rng(71);
  DeterministicNet enc;
  enc.spec = MlpSpec::dense(4, {6}, 3);
  enc.params = xavier_uniform(enc.spec, rng);
  std::vector<double> v{0.2, -0.4, 1.1, 0.0};
  CHECK(encoder_forward(enc, v) == mlp_forward(enc.spec, enc.params, v));

  DeterministicNet disc;
  disc.spec = MlpSpec::dense(3, {5}, 1);
  disc.params = xavier_uniform(disc.spec, rng);
  std::vector<double> zz{0.5, -0.2, 0.9};
  CHECK(discriminator_forward(disc, zz) == mlp_forward(disc.spec, disc.params, zz)[0]);
}
