#include "causalbgm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "causalbgm/likelihoods.hpp"

namespace causalbgm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_positive_var(double var, const char* what) {
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw std::runtime_error(std::string(what) + " network produced invalid variance");
  }
}

// Per-column log-likelihood evaluations over output panels. Each writes
// d loglik / d output into cot (overwriting) and returns the summed value.

double v_panel_loglik(const Mat& out, const Mat& vt, Mat& cot) {
  const int p = out.rows - 1;
  const int B = out.cols;
  double total = 0.0;
  std::vector<double> ss(B, 0.0);
  std::vector<double> inv_var(B);
  for (int b = 0; b < B; ++b) {
    check_positive_var(out(p, b), "covariate");
    inv_var[b] = 1.0 / out(p, b);
  }
  for (int j = 0; j < p; ++j) {
    const double* orow = out.row(j);
    const double* trow = vt.row(j);
    double* crow = cot.row(j);
    for (int b = 0; b < B; ++b) {
      const double r = trow[b] - orow[b];
      ss[b] += r * r;
      crow[b] = r * inv_var[b];
    }
  }
  for (int b = 0; b < B; ++b) {
    const double var = out(p, b);
    total += -0.5 * p * (kLog2Pi + std::log(var)) - 0.5 * ss[b] * inv_var[b];
    cot(p, b) = -0.5 * p * inv_var[b] + 0.5 * ss[b] * inv_var[b] * inv_var[b];
  }
  return total;
}

double scalar_panel_loglik(const Mat& out, std::span<const double> targets, Mat& cot,
                           const char* what) {
  const int B = out.cols;
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    check_positive_var(out(1, b), what);
    const ScalarGaussLik lik = gaussian_loglik(targets[b], out(0, b), out(1, b));
    total += lik.value;
    cot(0, b) = lik.d_mean;
    cot(1, b) = lik.d_var;
  }
  return total;
}

double binary_panel_loglik(const Mat& out, std::span<const double> targets, int draws,
                           Rng& rng, Mat& cot) {
  const int B = out.cols;
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    check_positive_var(out(1, b), "treatment");
    const BinaryTreatmentLik lik =
        binary_treatment_loglik(targets[b], out(0, b), out(1, b), draws, rng);
    total += lik.value;
    cot(0, b) = lik.d_mean;
    cot(1, b) = lik.d_var;
  }
  return total;
}

// Subtracts weight * sum(var^2) from the objective: used by the adversarial
// initializer to keep conditional variances from collapsing the likelihood.
double apply_variance_penalty(const MlpSpec& spec, const Mat& out, Mat& cot, double weight) {
  if (weight == 0.0 || !spec.has_variance_slot()) return 0.0;
  double penalty = 0.0;
  for (int d = spec.var_begin; d < spec.var_end; ++d) {
    const double* orow = out.row(d);
    double* crow = cot.row(d);
    for (int b = 0; b < out.cols; ++b) {
      penalty += weight * orow[b] * orow[b];
      crow[b] -= 2.0 * weight * orow[b];
    }
  }
  return -penalty;
}

// Panel gathers: latents are stored n x q (row per individual), network math
// wants q x B columns.
Mat gather_latents(const Mat& latents, std::span<const int> idx) {
  Mat z(latents.cols, static_cast<int>(idx.size()));
  for (int b = 0; b < z.cols; ++b) {
    const double* row = latents.row(idx[b]);
    for (int k = 0; k < z.rows; ++k) z(k, b) = row[k];
  }
  return z;
}

void scatter_latents(const Mat& z, std::span<const int> idx, Mat& latents) {
  for (int b = 0; b < z.cols; ++b) {
    double* row = latents.row(idx[b]);
    for (int k = 0; k < z.rows; ++k) row[k] = z(k, b);
  }
}

Mat gather_covariates(const Mat& v, std::span<const int> idx) {
  Mat panel(v.cols, static_cast<int>(idx.size()));
  for (int b = 0; b < panel.cols; ++b) {
    const double* row = v.row(idx[b]);
    for (int j = 0; j < panel.rows; ++j) panel(j, b) = row[j];
  }
  return panel;
}

Mat xnet_panel(const LatentConfig& lc, const Mat& z) {
  Mat in(lc.q0 + lc.q2, z.cols);
  for (int i = 0; i < lc.q0; ++i) {
    std::copy(z.row(i), z.row(i) + z.cols, in.row(i));
  }
  for (int i = 0; i < lc.q2; ++i) {
    std::copy(z.row(lc.z2_offset() + i), z.row(lc.z2_offset() + i) + z.cols, in.row(lc.q0 + i));
  }
  return in;
}

Mat ynet_panel(const LatentConfig& lc, std::span<const double> xs, const Mat& z) {
  Mat in(1 + lc.q0 + lc.q1, z.cols);
  std::copy(xs.begin(), xs.end(), in.row(0));
  for (int i = 0; i < lc.q0 + lc.q1; ++i) {
    std::copy(z.row(i), z.row(i) + z.cols, in.row(1 + i));
  }
  return in;
}

void scatter_add_xnet_input_grads(const LatentConfig& lc, const Mat& gin, Mat& dz) {
  for (int i = 0; i < lc.q0; ++i) {
    const double* g = gin.row(i);
    double* d = dz.row(i);
    for (int b = 0; b < gin.cols; ++b) d[b] += g[b];
  }
  for (int i = 0; i < lc.q2; ++i) {
    const double* g = gin.row(lc.q0 + i);
    double* d = dz.row(lc.z2_offset() + i);
    for (int b = 0; b < gin.cols; ++b) d[b] += g[b];
  }
}

void scatter_add_ynet_input_grads(const LatentConfig& lc, const Mat& gin, Mat& dz) {
  for (int i = 0; i < lc.q0 + lc.q1; ++i) {
    const double* g = gin.row(1 + i);
    double* d = dz.row(i);
    for (int b = 0; b < gin.cols; ++b) d[b] += g[b];
  }
}

AdamConfig with_lr(const AdamConfig& base, double lr) {
  AdamConfig c = base;
  c.lr = lr;
  return c;
}

VarAdam make_var_adam(const VariationalNet& net, const TrainConfig& config) {
  const AdamConfig cfg = with_lr(config.adam, config.lr);
  return {AdamState(net.dim(), cfg), AdamState(net.dim(), cfg)};
}

}  // namespace

void TrainConfig::validate() const {
  latent.validate();
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(lr > 0.0) || !(latent_lr > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  }
  if (egm_batches < 0) throw std::invalid_argument("TrainConfig: egm_batches must be non-negative");
  if (!(sigma_init > 0.0)) throw std::invalid_argument("TrainConfig: sigma_init must be positive");
  if (xi_draws < 1) throw std::invalid_argument("TrainConfig: xi_draws must be positive");
  if (variance_penalty < 0.0) {
    throw std::invalid_argument("TrainConfig: variance_penalty must be non-negative");
  }
}

ElboResult elbo_step(VariationalNet& net, const Mat& inputs, const PanelLoglik& loglik,
                     double kl_weight, VarAdam& adam, Rng& rng) {
  if (adam.mu.m.size() != net.dim() || adam.rho.m.size() != net.dim()) {
    throw std::invalid_argument("elbo_step: Adam state does not match network size");
  }
  FlipoutTape tape;
  const FlipoutResult fr = flipout_forward(net, inputs, rng, &tape);
  Mat cot(fr.outputs.rows, fr.outputs.cols);
  const double sum_loglik = loglik(fr.outputs, cot);
  FlipoutGrads g = flipout_backward(net, tape, cot);
  accumulate_kl_grads(net, -kl_weight, g.d_mu, g.d_rho);
  adam_ascent(adam.mu, net.mu, g.d_mu);
  adam_ascent(adam.rho, net.rho, g.d_rho);
  ElboResult res;
  res.sum_loglik = sum_loglik;
  res.kl = fr.kl;
  res.elbo = sum_loglik - kl_weight * fr.kl;
  return res;
}

EgmResult egm_initialize(const Dataset& data, const TrainConfig& config, Rng& rng) {
  config.validate();
  data.validate();
  const int n = data.n();
  const int p = data.p();
  const int q = config.latent.total();
  const int B = std::min(config.batch_size, n);

  EgmResult res;
  res.model = CausalBgmModel::init(config.latent, config.kind, p, config.arch, rng,
                                   config.sigma_init);
  res.model.xi_draws = config.xi_draws;
  res.encoder.spec = MlpSpec::dense(p, config.encoder_hidden, q);
  res.encoder.params = xavier_uniform(res.encoder.spec, rng);
  res.discriminator.spec = MlpSpec::dense(q, config.discriminator_hidden, 1);
  res.discriminator.params = xavier_uniform(res.discriminator.spec, rng);

  const AdamConfig opt_cfg = with_lr(config.adam, config.lr);
  AdamState adam_enc(res.encoder.params.size(), opt_cfg);
  AdamState adam_disc(res.discriminator.params.size(), opt_cfg);
  AdamState adam_v(res.model.net_v.dim(), opt_cfg);
  AdamState adam_x(res.model.net_x.dim(), opt_cfg);
  AdamState adam_y(res.model.net_y.dim(), opt_cfg);

  const LatentConfig& lc = config.latent;
  std::vector<int> idx(B);
  std::vector<double> xs(B), ys(B);

  for (int step = 0; step < config.egm_batches; ++step) {
    for (int b = 0; b < B; ++b) {
      idx[b] = std::min(static_cast<int>(rng.uniform() * n), n - 1);
      xs[b] = data.x[idx[b]];
      ys[b] = data.y[idx[b]];
    }
    const Mat vt = gather_covariates(data.v, idx);

    // Encode.
    BatchTape tape_enc;
    const Mat z = mlp_forward_batch(res.encoder.spec, res.encoder.params, vt, &tape_enc);

    // Likelihood steps for the three generative networks at their posterior
    // means, collecting reconstruction gradients w.r.t. z.
    Mat dz(q, B);
    {
      BatchTape tape;
      const Mat out = mlp_forward_batch(res.model.net_v.spec, res.model.net_v.mu, z, &tape);
      Mat cot(out.rows, out.cols);
      v_panel_loglik(out, vt, cot);
      apply_variance_penalty(res.model.net_v.spec, out, cot, config.variance_penalty);
      BatchGrads g = mlp_backward_batch(res.model.net_v.spec, res.model.net_v.mu, tape, cot,
                                        true, true);
      adam_ascent(adam_v, res.model.net_v.mu, g.params);
      for (int k = 0; k < q; ++k) {
        const double* gr = g.input.row(k);
        double* dr = dz.row(k);
        for (int b = 0; b < B; ++b) dr[b] += gr[b];
      }
    }
    {
      const Mat in = xnet_panel(lc, z);
      BatchTape tape;
      const Mat out = mlp_forward_batch(res.model.net_x.spec, res.model.net_x.mu, in, &tape);
      Mat cot(out.rows, out.cols);
      if (config.kind == TreatmentKind::kContinuous) {
        scalar_panel_loglik(out, xs, cot, "treatment");
      } else {
        binary_panel_loglik(out, xs, config.xi_draws, rng, cot);
      }
      apply_variance_penalty(res.model.net_x.spec, out, cot, config.variance_penalty);
      BatchGrads g = mlp_backward_batch(res.model.net_x.spec, res.model.net_x.mu, tape, cot,
                                        true, true);
      adam_ascent(adam_x, res.model.net_x.mu, g.params);
      scatter_add_xnet_input_grads(lc, g.input, dz);
    }
    {
      const Mat in = ynet_panel(lc, xs, z);
      BatchTape tape;
      const Mat out = mlp_forward_batch(res.model.net_y.spec, res.model.net_y.mu, in, &tape);
      Mat cot(out.rows, out.cols);
      scalar_panel_loglik(out, ys, cot, "outcome");
      apply_variance_penalty(res.model.net_y.spec, out, cot, config.variance_penalty);
      BatchGrads g = mlp_backward_batch(res.model.net_y.spec, res.model.net_y.mu, tape, cot,
                                        true, true);
      adam_ascent(adam_y, res.model.net_y.mu, g.params);
      scatter_add_ynet_input_grads(lc, g.input, dz);
    }

    // Discriminator step: prior draws against encoded covariates.
    Mat z_prior(q, B);
    for (double& v : z_prior.data) v = rng.normal();
    {
      BatchTape tape_p, tape_q;
      const Mat lp = mlp_forward_batch(res.discriminator.spec, res.discriminator.params,
                                       z_prior, &tape_p);
      const Mat lq = mlp_forward_batch(res.discriminator.spec, res.discriminator.params,
                                       z, &tape_q);
      Mat cot_p(1, B), cot_q(1, B);
      for (int b = 0; b < B; ++b) {
        cot_p(0, b) = 1.0 - sigmoid(lp(0, b));
        cot_q(0, b) = -sigmoid(lq(0, b));
      }
      BatchGrads gp = mlp_backward_batch(res.discriminator.spec, res.discriminator.params,
                                         tape_p, cot_p, true, false);
      BatchGrads gq = mlp_backward_batch(res.discriminator.spec, res.discriminator.params,
                                         tape_q, cot_q, true, false);
      for (std::size_t i = 0; i < gp.params.size(); ++i) gp.params[i] += gq.params[i];
      adam_ascent(adam_disc, res.discriminator.params, gp.params);
    }

    // Encoder step: reconstruction gradients plus the non-saturating
    // adversarial term against the updated discriminator.
    {
      BatchTape tape_g;
      const Mat lg = mlp_forward_batch(res.discriminator.spec, res.discriminator.params,
                                       z, &tape_g);
      Mat cot_g(1, B);
      for (int b = 0; b < B; ++b) cot_g(0, b) = 1.0 - sigmoid(lg(0, b));
      BatchGrads gadv = mlp_backward_batch(res.discriminator.spec, res.discriminator.params,
                                           tape_g, cot_g, false, true);
      for (int k = 0; k < q; ++k) {
        const double* ar = gadv.input.row(k);
        double* dr = dz.row(k);
        for (int b = 0; b < B; ++b) dr[b] += config.adversarial_weight * ar[b];
      }
      BatchGrads genc = mlp_backward_batch(res.encoder.spec, res.encoder.params, tape_enc,
                                           dz, true, false);
      adam_ascent(adam_enc, res.encoder.params, genc.params);
    }
  }

  // Latents: encoder output for every individual, in chunks.
  res.latents = Mat(n, q);
  const int chunk = 256;
  std::vector<int> all_idx(chunk);
  for (int start = 0; start < n; start += chunk) {
    const int count = std::min(chunk, n - start);
    all_idx.resize(count);
    for (int i = 0; i < count; ++i) all_idx[i] = start + i;
    const Mat vt = gather_covariates(data.v, all_idx);
    const Mat z = mlp_forward_batch(res.encoder.spec, res.encoder.params, vt);
    for (int i = 0; i < count; ++i) {
      double* row = res.latents.row(start + i);
      for (int k = 0; k < q; ++k) row[k] = z(k, i);
    }
  }
  return res;
}

namespace {

void latent_adam_ascent_rows(Mat& latents, LatentAdam& la, const AdamConfig& cfg,
                             std::span<const int> idx, const Mat& dz,
                             std::span<const double> values, Rng& rng, int* reinits) {
  const int q = latents.cols;
  for (int b = 0; b < static_cast<int>(idx.size()); ++b) {
    const int i = idx[b];
    bool finite = std::isfinite(values[b]);
    for (int k = 0; k < q && finite; ++k) finite = std::isfinite(dz(k, b));
    double* z = latents.row(i);
    if (!finite) {
      for (int k = 0; k < q; ++k) z[k] = rng.normal();
      double* mr = la.m.row(i);
      double* vr = la.v.row(i);
      for (int k = 0; k < q; ++k) mr[k] = vr[k] = 0.0;
      la.t[i] = 0;
      ++*reinits;
      std::cerr << "warning: non-finite latent gradient for individual " << i
                << "; re-initialized from the prior\n";
      continue;
    }
    la.t[i] += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(la.t[i]));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(la.t[i]));
    double* mr = la.m.row(i);
    double* vr = la.v.row(i);
    for (int k = 0; k < q; ++k) {
      const double g = -dz(k, b);  // ascent
      mr[k] = cfg.beta1 * mr[k] + (1.0 - cfg.beta1) * g;
      vr[k] = cfg.beta2 * vr[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = mr[k] / bc1;
      const double vhat = vr[k] / bc2;
      z[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void run_epochs(TrainedModel& tm, const Dataset& data, int first_epoch, int last_epoch,
                Rng& rng, TrainReport* report, const TrainHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = data.n();
  const int B = std::min(tm.config.batch_size, n);
  const LatentConfig& lc = tm.model.latent;
  const AdamConfig latent_cfg = with_lr(tm.config.adam, tm.config.latent_lr);

  std::vector<int> perm(n);
  std::uint64_t param_version = 0;
  std::uint64_t latent_version = 0;

  for (int epoch = first_epoch; epoch < last_epoch; ++epoch) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = std::min(static_cast<int>(rng.uniform() * (i + 1)), i);
      std::swap(perm[i], perm[j]);
    }

    double epoch_llp = 0.0;
    double epoch_elbo_x = 0.0, epoch_elbo_v = 0.0, epoch_elbo_y = 0.0;
    int batch_index = 0;
    for (int start = 0; start < n; start += B, ++batch_index) {
      const int count = std::min(B, n - start);
      const std::span<const int> idx(perm.data() + start, static_cast<std::size_t>(count));
      std::vector<double> xs(count), ys(count);
      for (int b = 0; b < count; ++b) {
        xs[b] = data.x[idx[b]];
        ys[b] = data.y[idx[b]];
      }

      // (a) Latent ascent under the current parameter sample.
      Mat z = gather_latents(tm.latents, idx);
      BatchLlp llp = latent_log_posterior_batch(tm.model, z, xs, ys, data.v, idx,
                                                tm.thetas, rng, /*want_grad=*/true);
      for (double v : llp.value) epoch_llp += v;
      int reinits = 0;
      latent_adam_ascent_rows(tm.latents, tm.latent_adam, latent_cfg, idx, llp.d_z,
                              llp.value, rng, &reinits);
      if (report) report->latent_reinits += reinits;
      latent_version += 1;
      if (hooks.on_latent_step) hooks.on_latent_step(epoch, batch_index, param_version);

      // (b) Sequential variational updates, re-sampling each network's
      // parameters immediately after its step.
      const double kl_weight = static_cast<double>(count) / n;
      const Mat z_new = gather_latents(tm.latents, idx);
      {
        const Mat in = xnet_panel(lc, z_new);
        PanelLoglik lik;
        if (tm.model.kind == TreatmentKind::kContinuous) {
          lik = [&xs](const Mat& out, Mat& cot) {
            return scalar_panel_loglik(out, xs, cot, "treatment");
          };
        } else {
          lik = [&xs, &rng, &tm](const Mat& out, Mat& cot) {
            return binary_panel_loglik(out, xs, tm.model.xi_draws, rng, cot);
          };
        }
        const ElboResult r = elbo_step(tm.model.net_x, in, lik, kl_weight, tm.adam_x, rng);
        epoch_elbo_x += r.elbo;
        tm.thetas.x = sample_params(tm.model.net_x, rng).theta;
        param_version += 1;
        if (hooks.on_elbo_step) hooks.on_elbo_step(epoch, batch_index, 0, latent_version);
      }
      {
        const Mat vt = gather_covariates(data.v, idx);
        PanelLoglik lik = [&vt](const Mat& out, Mat& cot) {
          return v_panel_loglik(out, vt, cot);
        };
        const ElboResult r = elbo_step(tm.model.net_v, z_new, lik, kl_weight, tm.adam_v, rng);
        epoch_elbo_v += r.elbo;
        tm.thetas.v = sample_params(tm.model.net_v, rng).theta;
        param_version += 1;
        if (hooks.on_elbo_step) hooks.on_elbo_step(epoch, batch_index, 1, latent_version);
      }
      {
        const Mat in = ynet_panel(lc, xs, z_new);
        PanelLoglik lik = [&ys](const Mat& out, Mat& cot) {
          return scalar_panel_loglik(out, ys, cot, "outcome");
        };
        const ElboResult r = elbo_step(tm.model.net_y, in, lik, kl_weight, tm.adam_y, rng);
        epoch_elbo_y += r.elbo;
        tm.thetas.y = sample_params(tm.model.net_y, rng).theta;
        param_version += 1;
        if (hooks.on_elbo_step) hooks.on_elbo_step(epoch, batch_index, 2, latent_version);
      }
    }

    if (report) {
      report->elbo_x.push_back(epoch_elbo_x / n);
      report->elbo_v.push_back(epoch_elbo_v / n);
      report->elbo_y.push_back(epoch_elbo_y / n);
      report->latent_logpost.push_back(epoch_llp / n);
    }
  }
  tm.epochs_done = last_epoch;
  if (report) {
    report->epochs_completed = last_epoch;
    report->wall_time_sec +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
}

}  // namespace

TrainedModel train(const Dataset& raw_data, const TrainConfig& config,
                   TrainReport* report, const TrainHooks& hooks) {
  config.validate();
  raw_data.validate();
  if (raw_data.kind != config.kind) {
    throw std::invalid_argument("train: dataset treatment kind does not match the configuration");
  }
  Dataset data = raw_data;
  TrainedModel tm;
  tm.config = config;
  tm.standardizer = standardize(data);

  Rng init_rng = Rng::substream(config.seed, "init");
  const int q = config.latent.total();
  if (config.init == InitStrategy::kEgm) {
    EgmResult egm = egm_initialize(data, config, init_rng);
    tm.model = std::move(egm.model);
    tm.latents = std::move(egm.latents);
  } else {
    tm.model = CausalBgmModel::init(config.latent, config.kind, data.p(), config.arch,
                                    init_rng, config.sigma_init);
    tm.model.xi_draws = config.xi_draws;
    tm.latents = Mat(data.n(), q);
    for (double& v : tm.latents.data) v = init_rng.normal();
  }

  tm.adam_v = make_var_adam(tm.model.net_v, config);
  tm.adam_x = make_var_adam(tm.model.net_x, config);
  tm.adam_y = make_var_adam(tm.model.net_y, config);
  tm.latent_adam.m = Mat(data.n(), q);
  tm.latent_adam.v = Mat(data.n(), q);
  tm.latent_adam.t.assign(data.n(), 0);

  Rng train_rng = Rng::substream(config.seed, "train");
  tm.thetas = sample_thetas(tm.model, train_rng);
  run_epochs(tm, data, 0, config.resolved_epochs(), train_rng, report, hooks);
  tm.train_rng_state = train_rng.serialize();
  return tm;
}

void continue_training(TrainedModel& tm, const Dataset& raw_data, int total_epochs,
                       TrainReport* report, const TrainHooks& hooks) {
  raw_data.validate();
  if (total_epochs < tm.epochs_done) {
    throw std::invalid_argument("continue_training: model already trained past the requested epochs");
  }
  if (total_epochs == tm.epochs_done) return;
  Dataset data = raw_data;
  apply_standardizer(data, tm.standardizer);
  if (data.n() != tm.latents.rows) {
    throw std::invalid_argument("continue_training: dataset size does not match the stored latents");
  }
  Rng train_rng = Rng::deserialize(tm.train_rng_state);
  run_epochs(tm, data, tm.epochs_done, total_epochs, train_rng, report, hooks);
  tm.train_rng_state = train_rng.serialize();
}

// ---------------------------------------------------------------------------
// Checkpoint format "BGMC" v1 (little-endian): see docs/checkpoint-format.md.

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_vec(std::ostream& os, const std::vector<double>& v) {
  put_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}
void put_ivec(std::ostream& os, const std::vector<int>& v) {
  put_u64(os, v.size());
  for (int x : v) put_u32(os, static_cast<std::uint32_t>(x));
}
void put_i64vec(std::ostream& os, const std::vector<std::int64_t>& v) {
  put_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(std::int64_t)));
}
void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint truncated");
  }
  return v;
}
std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint truncated");
  }
  return v;
}
std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint truncated");
  }
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint truncated");
  }
  return v;
}
std::vector<double> get_vec(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint field too large");
  std::vector<double> v(n);
  if (n && !is.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(n * sizeof(double)))) {
    throw std::runtime_error("checkpoint truncated");
  }
  return v;
}
std::vector<int> get_ivec(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ULL << 20)) throw std::runtime_error("checkpoint field too large");
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(get_u32(is));
  return v;
}
std::vector<std::int64_t> get_i64vec(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint field too large");
  std::vector<std::int64_t> v(n);
  if (n && !is.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(n * sizeof(std::int64_t)))) {
    throw std::runtime_error("checkpoint truncated");
  }
  return v;
}
std::string get_str(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ULL << 24)) throw std::runtime_error("checkpoint field too large");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw std::runtime_error("checkpoint truncated");
  }
  return s;
}

void put_adam(std::ostream& os, const AdamState& a) {
  put_vec(os, a.m);
  put_vec(os, a.v);
  put_i64(os, a.t);
}

AdamState get_adam(std::istream& is, const AdamConfig& cfg) {
  AdamState a;
  a.cfg = cfg;
  a.m = get_vec(is);
  a.v = get_vec(is);
  a.t = get_i64(is);
  if (a.m.size() != a.v.size()) throw std::runtime_error("checkpoint: Adam state size mismatch");
  return a;
}

constexpr char kMagic[4] = {'B', 'G', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const TrainedModel& tm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);

  const TrainConfig& c = tm.config;
  put_u32(os, tm.model.kind == TreatmentKind::kBinary ? 1 : 0);
  put_u32(os, static_cast<std::uint32_t>(tm.model.xi_draws));
  put_u32(os, static_cast<std::uint32_t>(tm.model.latent.q0));
  put_u32(os, static_cast<std::uint32_t>(tm.model.latent.q1));
  put_u32(os, static_cast<std::uint32_t>(tm.model.latent.q2));
  put_u32(os, static_cast<std::uint32_t>(tm.model.latent.q3));
  put_u32(os, static_cast<std::uint32_t>(tm.model.covariate_dim));
  put_ivec(os, c.arch.v_hidden);
  put_ivec(os, c.arch.xy_hidden);

  put_vec(os, tm.model.net_v.mu);
  put_vec(os, tm.model.net_v.rho);
  put_vec(os, tm.model.net_x.mu);
  put_vec(os, tm.model.net_x.rho);
  put_vec(os, tm.model.net_y.mu);
  put_vec(os, tm.model.net_y.rho);

  put_u64(os, static_cast<std::uint64_t>(tm.latents.rows));
  put_u64(os, static_cast<std::uint64_t>(tm.latents.cols));
  os.write(reinterpret_cast<const char*>(tm.latents.data.data()),
           static_cast<std::streamsize>(tm.latents.data.size() * sizeof(double)));

  put_vec(os, tm.standardizer.v_mean);
  put_vec(os, tm.standardizer.v_scale);
  put_f64(os, tm.standardizer.x_mean);
  put_f64(os, tm.standardizer.x_scale);
  put_f64(os, tm.standardizer.y_mean);
  put_f64(os, tm.standardizer.y_scale);
  put_u32(os, tm.standardizer.x_standardized ? 1 : 0);

  // Training configuration.
  put_u32(os, c.init == InitStrategy::kEgm ? 0 : 1);
  put_u32(os, static_cast<std::uint32_t>(c.epochs < 0 ? 0xffffffffu : c.epochs));
  put_u32(os, static_cast<std::uint32_t>(c.batch_size));
  put_f64(os, c.lr);
  put_f64(os, c.latent_lr);
  put_f64(os, c.adam.beta1);
  put_f64(os, c.adam.beta2);
  put_f64(os, c.adam.eps);
  put_u32(os, static_cast<std::uint32_t>(c.egm_batches));
  put_f64(os, c.variance_penalty);
  put_f64(os, c.adversarial_weight);
  put_f64(os, c.sigma_init);
  put_u32(os, static_cast<std::uint32_t>(c.xi_draws));
  put_u64(os, c.seed);
  put_ivec(os, c.encoder_hidden);
  put_ivec(os, c.discriminator_hidden);

  put_u32(os, static_cast<std::uint32_t>(tm.epochs_done));

  put_adam(os, tm.adam_v.mu);
  put_adam(os, tm.adam_v.rho);
  put_adam(os, tm.adam_x.mu);
  put_adam(os, tm.adam_x.rho);
  put_adam(os, tm.adam_y.mu);
  put_adam(os, tm.adam_y.rho);
  put_vec(os, tm.latent_adam.m.data);
  put_vec(os, tm.latent_adam.v.data);
  put_i64vec(os, tm.latent_adam.t);

  put_vec(os, tm.thetas.v);
  put_vec(os, tm.thetas.x);
  put_vec(os, tm.thetas.y);
  put_str(os, tm.train_rng_state);
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a model checkpoint");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }

  TrainedModel tm;
  tm.model.kind = get_u32(is) == 1 ? TreatmentKind::kBinary : TreatmentKind::kContinuous;
  tm.model.xi_draws = static_cast<int>(get_u32(is));
  tm.model.latent.q0 = static_cast<int>(get_u32(is));
  tm.model.latent.q1 = static_cast<int>(get_u32(is));
  tm.model.latent.q2 = static_cast<int>(get_u32(is));
  tm.model.latent.q3 = static_cast<int>(get_u32(is));
  tm.model.covariate_dim = static_cast<int>(get_u32(is));
  ModelArch arch;
  arch.v_hidden = get_ivec(is);
  arch.xy_hidden = get_ivec(is);

  const LatentConfig& lc = tm.model.latent;
  const int p = tm.model.covariate_dim;
  tm.model.net_v.spec = MlpSpec::dense(lc.total(), arch.v_hidden, p + 1, p, p + 1);
  tm.model.net_x.spec = MlpSpec::dense(lc.q0 + lc.q2, arch.xy_hidden, 2, 1, 2);
  tm.model.net_y.spec = MlpSpec::dense(1 + lc.q0 + lc.q1, arch.xy_hidden, 2, 1, 2);
  tm.model.net_v.mu = get_vec(is);
  tm.model.net_v.rho = get_vec(is);
  tm.model.net_x.mu = get_vec(is);
  tm.model.net_x.rho = get_vec(is);
  tm.model.net_y.mu = get_vec(is);
  tm.model.net_y.rho = get_vec(is);

  const int n = static_cast<int>(get_u64(is));
  const int q = static_cast<int>(get_u64(is));
  if (q != lc.total()) throw std::runtime_error("checkpoint: latent width mismatch");
  tm.latents = Mat(n, q);
  if (!is.read(reinterpret_cast<char*>(tm.latents.data.data()),
               static_cast<std::streamsize>(tm.latents.data.size() * sizeof(double)))) {
    throw std::runtime_error("checkpoint truncated");
  }

  tm.standardizer.v_mean = get_vec(is);
  tm.standardizer.v_scale = get_vec(is);
  tm.standardizer.x_mean = get_f64(is);
  tm.standardizer.x_scale = get_f64(is);
  tm.standardizer.y_mean = get_f64(is);
  tm.standardizer.y_scale = get_f64(is);
  tm.standardizer.x_standardized = get_u32(is) == 1;

  TrainConfig c;
  c.latent = lc;
  c.kind = tm.model.kind;
  c.arch = arch;
  c.init = get_u32(is) == 0 ? InitStrategy::kEgm : InitStrategy::kRandom;
  const std::uint32_t epochs_raw = get_u32(is);
  c.epochs = epochs_raw == 0xffffffffu ? -1 : static_cast<int>(epochs_raw);
  c.batch_size = static_cast<int>(get_u32(is));
  c.lr = get_f64(is);
  c.latent_lr = get_f64(is);
  c.adam.beta1 = get_f64(is);
  c.adam.beta2 = get_f64(is);
  c.adam.eps = get_f64(is);
  c.egm_batches = static_cast<int>(get_u32(is));
  c.variance_penalty = get_f64(is);
  c.adversarial_weight = get_f64(is);
  c.sigma_init = get_f64(is);
  c.xi_draws = static_cast<int>(get_u32(is));
  c.seed = get_u64(is);
  c.encoder_hidden = get_ivec(is);
  c.discriminator_hidden = get_ivec(is);
  tm.config = c;

  tm.epochs_done = static_cast<int>(get_u32(is));

  const AdamConfig net_cfg = with_lr(c.adam, c.lr);
  const AdamConfig lat_cfg = with_lr(c.adam, c.latent_lr);
  tm.adam_v.mu = get_adam(is, net_cfg);
  tm.adam_v.rho = get_adam(is, net_cfg);
  tm.adam_x.mu = get_adam(is, net_cfg);
  tm.adam_x.rho = get_adam(is, net_cfg);
  tm.adam_y.mu = get_adam(is, net_cfg);
  tm.adam_y.rho = get_adam(is, net_cfg);
  (void)lat_cfg;
  tm.latent_adam.m = Mat(n, q);
  tm.latent_adam.m.data = get_vec(is);
  tm.latent_adam.v = Mat(n, q);
  tm.latent_adam.v.data = get_vec(is);
  tm.latent_adam.t = get_i64vec(is);

  tm.thetas.v = get_vec(is);
  tm.thetas.x = get_vec(is);
  tm.thetas.y = get_vec(is);
  tm.train_rng_state = get_str(is);

  tm.model.validate();
  if (tm.model.net_v.mu.size() != tm.model.net_v.spec.param_count() ||
      tm.model.net_x.mu.size() != tm.model.net_x.spec.param_count() ||
      tm.model.net_y.mu.size() != tm.model.net_y.spec.param_count()) {
    throw std::runtime_error("checkpoint: parameter vector sizes do not match the architecture");
  }
  return tm;
}

}  // namespace causalbgm
