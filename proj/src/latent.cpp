#include "causalbgm/latent.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "causalbgm/likelihoods.hpp"

namespace causalbgm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double prior_loglik(std::span<const double> z) {
  double ss = 0.0;
  for (double zi : z) ss += zi * zi;
  return -0.5 * static_cast<double>(z.size()) * kLog2Pi - 0.5 * ss;
}

void check_obs_sizes(const CausalBgmModel& m, std::span<const double> z,
                     std::span<const double> v) {
  if (z.size() != static_cast<std::size_t>(m.latent.total())) {
    throw std::invalid_argument("latent vector size mismatch");
  }
  if (v.size() != static_cast<std::size_t>(m.covariate_dim)) {
    throw std::invalid_argument("covariate size mismatch");
  }
}

}  // namespace

ThetaTriple sample_thetas(const CausalBgmModel& m, Rng& rng) {
  ThetaTriple t;
  t.v = sample_params(m.net_v, rng).theta;
  t.x = sample_params(m.net_x, rng).theta;
  t.y = sample_params(m.net_y, rng).theta;
  return t;
}

LlpTerms latent_log_posterior_terms(const CausalBgmModel& m, std::span<const double> z,
                                    double x, double y, std::span<const double> v,
                                    const ThetaTriple& thetas, Rng& rng) {
  check_obs_sizes(m, z, v);
  LlpTerms t;
  t.prior = prior_loglik(z);
  t.v = loglik_v(m, v, z, thetas.v);
  t.x = loglik_x(m, x, z, thetas.x, rng);
  t.y = loglik_y(m, y, x, z, thetas.y);
  return t;
}

double latent_log_posterior(const CausalBgmModel& m, std::span<const double> z,
                            double x, double y, std::span<const double> v,
                            const ThetaTriple& thetas, Rng& rng) {
  return latent_log_posterior_terms(m, z, x, y, v, thetas, rng).total();
}

LlpGrad latent_log_posterior_grad(const CausalBgmModel& m, std::span<const double> z,
                                  double x, double y, std::span<const double> v,
                                  const ThetaTriple& thetas, Rng& rng) {
  check_obs_sizes(m, z, v);
  const LatentConfig& lc = m.latent;
  const int q = lc.total();
  LlpGrad g;
  g.d_z.assign(q, 0.0);

  // Prior.
  g.value = prior_loglik(z);
  for (int i = 0; i < q; ++i) g.d_z[i] -= z[i];

  // Covariate term.
  {
    const std::vector<double> out = mlp_forward(m.net_v.spec, thetas.v, z);
    for (double o : out) {
      if (!std::isfinite(o)) throw std::runtime_error("covariate network produced non-finite output");
    }
    const std::span<const double> mean(out.data(), m.covariate_dim);
    IsoGaussLik lik = gaussian_iso_loglik(v, mean, out[m.covariate_dim]);
    g.value += lik.value;
    std::vector<double> cot(out.size());
    for (int j = 0; j < m.covariate_dim; ++j) cot[j] = lik.d_mean[j];
    cot[m.covariate_dim] = lik.d_var;
    MlpGrads back = mlp_backward(m.net_v.spec, thetas.v, z, cot);
    for (int i = 0; i < q; ++i) g.d_z[i] += back.input[i];
  }

  // Treatment term, input [z0 | z2].
  {
    std::vector<double> in(lc.q0 + lc.q2);
    build_xnet_input(lc, z, in);
    const std::vector<double> out = mlp_forward(m.net_x.spec, thetas.x, in);
    for (double o : out) {
      if (!std::isfinite(o)) throw std::runtime_error("treatment network produced non-finite output");
    }
    double value, d_mean, d_var;
    if (m.kind == TreatmentKind::kContinuous) {
      ScalarGaussLik lik = gaussian_loglik(x, out[0], out[1]);
      value = lik.value;
      d_mean = lik.d_mean;
      d_var = lik.d_var;
    } else {
      BinaryTreatmentLik lik = binary_treatment_loglik(x, out[0], out[1], m.xi_draws, rng);
      value = lik.value;
      d_mean = lik.d_mean;
      d_var = lik.d_var;
    }
    g.value += value;
    const std::vector<double> cot{d_mean, d_var};
    MlpGrads back = mlp_backward(m.net_x.spec, thetas.x, in, cot);
    for (int i = 0; i < lc.q0; ++i) g.d_z[i] += back.input[i];
    for (int i = 0; i < lc.q2; ++i) g.d_z[lc.z2_offset() + i] += back.input[lc.q0 + i];
  }

  // Outcome term, input [x | z0 | z1].
  {
    std::vector<double> in(1 + lc.q0 + lc.q1);
    build_ynet_input(lc, x, z, in);
    const std::vector<double> out = mlp_forward(m.net_y.spec, thetas.y, in);
    for (double o : out) {
      if (!std::isfinite(o)) throw std::runtime_error("outcome network produced non-finite output");
    }
    ScalarGaussLik lik = gaussian_loglik(y, out[0], out[1]);
    g.value += lik.value;
    const std::vector<double> cot{lik.d_mean, lik.d_var};
    MlpGrads back = mlp_backward(m.net_y.spec, thetas.y, in, cot);
    for (int i = 0; i < lc.q0 + lc.q1; ++i) g.d_z[i] += back.input[1 + i];
  }
  return g;
}

BatchLlp latent_log_posterior_batch(const CausalBgmModel& m, const Mat& Z,
                                    std::span<const double> xs, std::span<const double> ys,
                                    const Mat& V, std::span<const int> rows,
                                    const ThetaTriple& thetas, Rng& rng, bool want_grad) {
  const LatentConfig& lc = m.latent;
  const int q = lc.total();
  const int B = Z.cols;
  if (Z.rows != q) throw std::invalid_argument("latent panel height mismatch");
  if (static_cast<int>(xs.size()) != B || static_cast<int>(ys.size()) != B ||
      static_cast<int>(rows.size()) != B) {
    throw std::invalid_argument("batch size mismatch");
  }
  if (V.cols != m.covariate_dim) throw std::invalid_argument("covariate width mismatch");

  BatchLlp out;
  out.value.assign(B, 0.0);
  if (want_grad) out.d_z = Mat(q, B);

  // Prior.
  for (int b = 0; b < B; ++b) {
    double ss = 0.0;
    for (int i = 0; i < q; ++i) ss += Z(i, b) * Z(i, b);
    out.value[b] = -0.5 * q * kLog2Pi - 0.5 * ss;
  }
  if (want_grad) {
    for (int i = 0; i < q; ++i) {
      const double* zr = Z.row(i);
      double* gr = out.d_z.row(i);
      for (int b = 0; b < B; ++b) gr[b] = -zr[b];
    }
  }

  // Covariate term.
  {
    BatchTape tape;
    Mat net_out = mlp_forward_batch(m.net_v.spec, thetas.v, Z, want_grad ? &tape : nullptr);
    const int p = m.covariate_dim;
    Mat cot;
    if (want_grad) cot = Mat(p + 1, B);
    for (int b = 0; b < B; ++b) {
      const double var = net_out(p, b);
      if (!(var > 0.0) || !std::isfinite(var)) {
        throw std::runtime_error("covariate network produced invalid variance");
      }
      double ss = 0.0;
      const double* vrow = V.row(rows[b]);
      for (int j = 0; j < p; ++j) {
        const double r = vrow[j] - net_out(j, b);
        ss += r * r;
        if (want_grad) cot(j, b) = r / var;
      }
      out.value[b] += -0.5 * p * (kLog2Pi + std::log(var)) - 0.5 * ss / var;
      if (want_grad) cot(p, b) = -0.5 * p / var + 0.5 * ss / (var * var);
    }
    if (want_grad) {
      BatchGrads back = mlp_backward_batch(m.net_v.spec, thetas.v, tape, cot,
                                           /*want_params=*/false, /*want_input=*/true);
      for (int i = 0; i < q; ++i) {
        const double* br = back.input.row(i);
        double* gr = out.d_z.row(i);
        for (int b = 0; b < B; ++b) gr[b] += br[b];
      }
    }
  }

  // Treatment term.
  {
    Mat in(lc.q0 + lc.q2, B);
    for (int i = 0; i < lc.q0; ++i) {
      const double* zr = Z.row(i);
      double* ir = in.row(i);
      for (int b = 0; b < B; ++b) ir[b] = zr[b];
    }
    for (int i = 0; i < lc.q2; ++i) {
      const double* zr = Z.row(lc.z2_offset() + i);
      double* ir = in.row(lc.q0 + i);
      for (int b = 0; b < B; ++b) ir[b] = zr[b];
    }
    BatchTape tape;
    Mat net_out = mlp_forward_batch(m.net_x.spec, thetas.x, in, want_grad ? &tape : nullptr);
    Mat cot;
    if (want_grad) cot = Mat(2, B);
    for (int b = 0; b < B; ++b) {
      const double mean = net_out(0, b);
      const double var = net_out(1, b);
      if (!std::isfinite(mean) || !(var > 0.0) || !std::isfinite(var)) {
        throw std::runtime_error("treatment network produced invalid output");
      }
      double value, d_mean, d_var;
      if (m.kind == TreatmentKind::kContinuous) {
        ScalarGaussLik lik = gaussian_loglik(xs[b], mean, var);
        value = lik.value;
        d_mean = lik.d_mean;
        d_var = lik.d_var;
      } else {
        BinaryTreatmentLik lik = binary_treatment_loglik(xs[b], mean, var, m.xi_draws, rng);
        value = lik.value;
        d_mean = lik.d_mean;
        d_var = lik.d_var;
      }
      out.value[b] += value;
      if (want_grad) {
        cot(0, b) = d_mean;
        cot(1, b) = d_var;
      }
    }
    if (want_grad) {
      BatchGrads back = mlp_backward_batch(m.net_x.spec, thetas.x, tape, cot, false, true);
      for (int i = 0; i < lc.q0; ++i) {
        const double* br = back.input.row(i);
        double* gr = out.d_z.row(i);
        for (int b = 0; b < B; ++b) gr[b] += br[b];
      }
      for (int i = 0; i < lc.q2; ++i) {
        const double* br = back.input.row(lc.q0 + i);
        double* gr = out.d_z.row(lc.z2_offset() + i);
        for (int b = 0; b < B; ++b) gr[b] += br[b];
      }
    }
  }

  // Outcome term.
  {
    Mat in(1 + lc.q0 + lc.q1, B);
    {
      double* ir = in.row(0);
      for (int b = 0; b < B; ++b) ir[b] = xs[b];
    }
    for (int i = 0; i < lc.q0 + lc.q1; ++i) {
      const double* zr = Z.row(i);
      double* ir = in.row(1 + i);
      for (int b = 0; b < B; ++b) ir[b] = zr[b];
    }
    BatchTape tape;
    Mat net_out = mlp_forward_batch(m.net_y.spec, thetas.y, in, want_grad ? &tape : nullptr);
    Mat cot;
    if (want_grad) cot = Mat(2, B);
    for (int b = 0; b < B; ++b) {
      const double mean = net_out(0, b);
      const double var = net_out(1, b);
      if (!std::isfinite(mean) || !(var > 0.0) || !std::isfinite(var)) {
        throw std::runtime_error("outcome network produced invalid output");
      }
      ScalarGaussLik lik = gaussian_loglik(ys[b], mean, var);
      out.value[b] += lik.value;
      if (want_grad) {
        cot(0, b) = lik.d_mean;
        cot(1, b) = lik.d_var;
      }
    }
    if (want_grad) {
      BatchGrads back = mlp_backward_batch(m.net_y.spec, thetas.y, tape, cot, false, true);
      for (int i = 0; i < lc.q0 + lc.q1; ++i) {
        const double* br = back.input.row(1 + i);
        double* gr = out.d_z.row(i);
        for (int b = 0; b < B; ++b) gr[b] += br[b];
      }
    }
  }
  return out;
}

bool latent_sgd_step(const CausalBgmModel& m, std::span<double> z, AdamState& adam,
                     double x, double y, std::span<const double> v,
                     const ThetaTriple& thetas, Rng& rng) {
  LlpGrad g = latent_log_posterior_grad(m, z, x, y, v, thetas, rng);
  bool finite = std::isfinite(g.value);
  for (double gi : g.d_z) finite = finite && std::isfinite(gi);
  if (!finite) {
    for (double& zi : z) zi = rng.normal();
    std::fill(adam.m.begin(), adam.m.end(), 0.0);
    std::fill(adam.v.begin(), adam.v.end(), 0.0);
    adam.t = 0;
    return true;
  }
  adam_ascent(adam, z, g.d_z);
  return false;
}

bool mh_accept(double log_target_proposed, double log_target_current, Rng& rng) {
  // One uniform is consumed per call regardless of the outcome, keeping draw
  // sequences aligned across chains.
  const double log_u = std::log(rng.uniform_pos());
  return log_u < log_target_proposed - log_target_current;
}

PosteriorChain mh_chain(int q, const std::function<double(std::span<const double>)>& log_target,
                        const MhConfig& config, Rng& rng,
                        std::span<const double> z_init) {
  if (config.burn_in < 0 || config.keep <= 0) {
    throw std::invalid_argument("mh_chain: burn_in must be >= 0 and keep > 0");
  }
  if (config.thin < 1) throw std::invalid_argument("mh_chain: thin must be >= 1");
  if (!(config.proposal_std > 0.0)) {
    throw std::invalid_argument("mh_chain: proposal_std must be positive");
  }
  if (q < 1) throw std::invalid_argument("mh_chain: dimension must be positive");
  std::vector<double> z(q);
  if (z_init.empty()) {
    for (double& zi : z) zi = rng.normal();
  } else {
    if (z_init.size() != static_cast<std::size_t>(q)) {
      throw std::invalid_argument("mh_chain: z_init size mismatch");
    }
    std::copy(z_init.begin(), z_init.end(), z.begin());
  }

  PosteriorChain chain;
  chain.q = q;
  chain.burn_in = config.burn_in;
  chain.draws.reserve(static_cast<std::size_t>(config.keep) * q);

  double logp = log_target(z);
  double scale = config.proposal_std;
  std::vector<double> prop(q);
  const std::int64_t stall_limit = 10LL * config.keep * config.thin;
  std::int64_t consecutive_rejects = 0;
  const int total = config.burn_in + config.keep * config.thin;
  for (int it = 0; it < total; ++it) {
    for (int i = 0; i < q; ++i) prop[i] = z[i] + scale * rng.normal();
    const double logp_prop = log_target(prop);
    chain.proposed += 1;
    const bool accepted = mh_accept(logp_prop, logp, rng);
    if (accepted) {
      z.swap(prop);
      logp = logp_prop;
      chain.accepted += 1;
      consecutive_rejects = 0;
    } else {
      consecutive_rejects += 1;
      if (consecutive_rejects > stall_limit) {
        throw std::runtime_error(
            "mh_chain: chain stalled after " + std::to_string(consecutive_rejects) +
            " consecutive rejections (acceptance rate " +
            std::to_string(chain.acceptance_rate()) + ", proposal std " +
            std::to_string(scale) + ")");
      }
    }
    if (config.tune_during_burn_in && it < config.burn_in) {
      // Robbins-Monro drift toward a 0.234 acceptance rate.
      const double step = 1.0 / std::pow(static_cast<double>(it + 1), 0.6);
      scale *= std::exp(step * ((accepted ? 1.0 : 0.0) - 0.234));
    }
    if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0) {
      chain.draws.insert(chain.draws.end(), z.begin(), z.end());
    }
  }
  return chain;
}

PosteriorChain mh_sample(const CausalBgmModel& m, double x, double y,
                         std::span<const double> v, const ThetaTriple& thetas,
                         const MhConfig& config, Rng& rng,
                         std::span<const double> z_init) {
  const int q = m.latent.total();
  // Allocation-free likelihood evaluation.
  MlpWorkspace ws_v, ws_x, ws_y;
  std::vector<double> in_x(m.latent.q0 + m.latent.q2);
  std::vector<double> in_y(1 + m.latent.q0 + m.latent.q1);
  const LatentConfig& lc = m.latent;
  auto log_target = [&](std::span<const double> zz) {
    double lp = prior_loglik(zz);
    const std::span<const double> v_out = mlp_forward(m.net_v.spec, thetas.v, zz, ws_v);
    const double v_var = v_out[m.covariate_dim];
    if (!(v_var > 0.0) || !std::isfinite(v_var)) {
      throw std::runtime_error("covariate network produced invalid variance");
    }
    double ss = 0.0;
    for (int j = 0; j < m.covariate_dim; ++j) {
      const double r = v[j] - v_out[j];
      ss += r * r;
    }
    lp += -0.5 * m.covariate_dim * (kLog2Pi + std::log(v_var)) - 0.5 * ss / v_var;

    build_xnet_input(lc, zz, in_x);
    const std::span<const double> x_out = mlp_forward(m.net_x.spec, thetas.x, in_x, ws_x);
    if (m.kind == TreatmentKind::kContinuous) {
      lp += gaussian_loglik(x, x_out[0], x_out[1]).value;
    } else {
      lp += binary_treatment_loglik(x, x_out[0], x_out[1], m.xi_draws, rng).value;
    }

    build_ynet_input(lc, x, zz, in_y);
    const std::span<const double> y_out = mlp_forward(m.net_y.spec, thetas.y, in_y, ws_y);
    lp += gaussian_loglik(y, y_out[0], y_out[1]).value;
    if (!std::isfinite(lp)) throw std::runtime_error("latent log posterior is non-finite");
    return lp;
  };
  return mh_chain(q, log_target, config, rng, z_init);
}

}  // namespace causalbgm
