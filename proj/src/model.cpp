#include "causalbgm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "causalbgm/likelihoods.hpp"

namespace causalbgm {

void LatentConfig::validate() const {
  if (q0 < 1) throw std::invalid_argument("LatentConfig: q0 must be at least 1");
  if (q1 < 0 || q2 < 0 || q3 < 0) {
    throw std::invalid_argument("LatentConfig: dimensions must be non-negative");
  }
  if (total() < 1) throw std::invalid_argument("LatentConfig: empty latent space");
}

CausalBgmModel CausalBgmModel::init(const LatentConfig& latent, TreatmentKind kind,
                                    int covariate_dim, const ModelArch& arch,
                                    Rng& rng, double sigma_init) {
  latent.validate();
  if (covariate_dim < 1) throw std::invalid_argument("CausalBgmModel: covariate_dim must be positive");
  CausalBgmModel m;
  m.latent = latent;
  m.kind = kind;
  m.covariate_dim = covariate_dim;
  const int q = latent.total();
  // Final output digit of each net is its variance.
  const MlpSpec v_spec = MlpSpec::dense(q, arch.v_hidden, covariate_dim + 1,
                                        covariate_dim, covariate_dim + 1);
  const MlpSpec x_spec = MlpSpec::dense(latent.q0 + latent.q2, arch.xy_hidden, 2, 1, 2);
  const MlpSpec y_spec = MlpSpec::dense(1 + latent.q0 + latent.q1, arch.xy_hidden, 2, 1, 2);
  m.net_v = VariationalNet::init(v_spec, rng, sigma_init);
  m.net_x = VariationalNet::init(x_spec, rng, sigma_init);
  m.net_y = VariationalNet::init(y_spec, rng, sigma_init);
  return m;
}

void CausalBgmModel::validate() const {
  latent.validate();
  if (covariate_dim < 1) throw std::invalid_argument("CausalBgmModel: covariate_dim must be positive");
  if (xi_draws < 1) throw std::invalid_argument("CausalBgmModel: xi_draws must be at least 1");
  if (net_v.spec.input_width() != latent.total() ||
      net_v.spec.output_width() != covariate_dim + 1) {
    throw std::invalid_argument("CausalBgmModel: covariate network shape mismatch");
  }
  if (net_x.spec.input_width() != latent.q0 + latent.q2 || net_x.spec.output_width() != 2) {
    throw std::invalid_argument("CausalBgmModel: treatment network shape mismatch");
  }
  if (net_y.spec.input_width() != 1 + latent.q0 + latent.q1 || net_y.spec.output_width() != 2) {
    throw std::invalid_argument("CausalBgmModel: outcome network shape mismatch");
  }
}

void build_xnet_input(const LatentConfig& latent, std::span<const double> z,
                      std::span<double> out) {
  if (z.size() != static_cast<std::size_t>(latent.total()) ||
      out.size() != static_cast<std::size_t>(latent.q0 + latent.q2)) {
    throw std::invalid_argument("build_xnet_input: size mismatch");
  }
  for (int i = 0; i < latent.q0; ++i) out[i] = z[i];
  for (int i = 0; i < latent.q2; ++i) out[latent.q0 + i] = z[latent.z2_offset() + i];
}

void build_ynet_input(const LatentConfig& latent, double x,
                      std::span<const double> z, std::span<double> out) {
  if (z.size() != static_cast<std::size_t>(latent.total()) ||
      out.size() != static_cast<std::size_t>(1 + latent.q0 + latent.q1)) {
    throw std::invalid_argument("build_ynet_input: size mismatch");
  }
  out[0] = x;
  for (int i = 0; i < latent.q0 + latent.q1; ++i) out[1 + i] = z[i];
}

namespace {

void check_finite(std::span<const double> values, const char* net_name) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(net_name) + " network produced non-finite output");
    }
  }
}

}  // namespace

double loglik_v(const CausalBgmModel& m, std::span<const double> v,
                std::span<const double> z, const ParamVector& theta_v) {
  if (v.size() != static_cast<std::size_t>(m.covariate_dim)) {
    throw std::invalid_argument("loglik_v: covariate size mismatch");
  }
  const std::vector<double> out = mlp_forward(m.net_v.spec, theta_v, z);
  check_finite(out, "covariate");
  const std::span<const double> mean(out.data(), m.covariate_dim);
  return gaussian_iso_loglik(v, mean, out[m.covariate_dim]).value;
}

double loglik_x(const CausalBgmModel& m, double x, std::span<const double> z,
                const ParamVector& theta_x, Rng& rng) {
  std::vector<double> in(m.latent.q0 + m.latent.q2);
  build_xnet_input(m.latent, z, in);
  const std::vector<double> out = mlp_forward(m.net_x.spec, theta_x, in);
  check_finite(out, "treatment");
  if (m.kind == TreatmentKind::kContinuous) {
    return gaussian_loglik(x, out[0], out[1]).value;
  }
  return binary_treatment_loglik(x, out[0], out[1], m.xi_draws, rng).value;
}

double loglik_y(const CausalBgmModel& m, double y, double x,
                std::span<const double> z, const ParamVector& theta_y) {
  std::vector<double> in(1 + m.latent.q0 + m.latent.q1);
  build_ynet_input(m.latent, x, z, in);
  const std::vector<double> out = mlp_forward(m.net_y.spec, theta_y, in);
  check_finite(out, "outcome");
  return gaussian_loglik(y, out[0], out[1]).value;
}

OutcomeMoments predict_outcome(const CausalBgmModel& m, double x,
                               std::span<const double> z0,
                               std::span<const double> z1,
                               const ParamVector& theta_y) {
  if (z0.size() != static_cast<std::size_t>(m.latent.q0) ||
      z1.size() != static_cast<std::size_t>(m.latent.q1)) {
    throw std::invalid_argument("predict_outcome: latent slice size mismatch");
  }
  std::vector<double> in(1 + m.latent.q0 + m.latent.q1);
  in[0] = x;
  for (int i = 0; i < m.latent.q0; ++i) in[1 + i] = z0[i];
  for (int i = 0; i < m.latent.q1; ++i) in[1 + m.latent.q0 + i] = z1[i];
  const std::vector<double> out = mlp_forward(m.net_y.spec, theta_y, in);
  check_finite(out, "outcome");
  return {out[0], out[1]};
}

std::vector<double> encoder_forward(const DeterministicNet& net, std::span<const double> v) {
  return mlp_forward(net.spec, net.params, v);
}

double discriminator_forward(const DeterministicNet& net, std::span<const double> z) {
  const std::vector<double> out = mlp_forward(net.spec, net.params, z);
  if (out.size() != 1) throw std::invalid_argument("discriminator_forward: output must be scalar");
  return out[0];
}

}  // namespace causalbgm
