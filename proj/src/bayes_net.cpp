#include "causalbgm/bayes_net.hpp"

#include <cmath>
#include <stdexcept>

namespace causalbgm {

namespace {

inline double output_transform(const MlpSpec& spec, int digit, double pre) {
  if (spec.has_variance_slot() && digit >= spec.var_begin && digit < spec.var_end) {
    const double s = softplus(pre);
    return s > kVarianceFloor ? s : kVarianceFloor;
  }
  return pre;
}

inline double output_transform_grad(const MlpSpec& spec, int digit, double pre) {
  if (spec.has_variance_slot() && digit >= spec.var_begin && digit < spec.var_end) {
    return softplus(pre) > kVarianceFloor ? sigmoid(pre) : 0.0;
  }
  return 1.0;
}

}  // namespace

VariationalNet VariationalNet::init(const MlpSpec& spec, Rng& rng, double sigma_init) {
  spec.validate();
  if (!(sigma_init > 0.0)) {
    throw std::invalid_argument("VariationalNet::init: sigma_init must be positive");
  }
  VariationalNet net;
  net.spec = spec;
  net.mu = xavier_uniform(spec, rng);
  net.rho.assign(net.mu.size(), softplus_inv(sigma_init));
  return net;
}

SampledParams sample_params(const VariationalNet& net, Rng& rng) {
  SampledParams s;
  s.epsilon.resize(net.dim());
  s.theta.resize(net.dim());
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const double e = rng.normal();
    s.epsilon[i] = e;
    s.theta[i] = net.mu[i] + sigma_from_rho(net.rho[i]) * e;
  }
  return s;
}

double kl_standard_normal(std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != sigma.size()) {
    throw std::invalid_argument("kl_standard_normal: size mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) {
      throw std::invalid_argument("kl_standard_normal: sigma must be positive");
    }
    kl += -std::log(sigma[i]) + 0.5 * (sigma[i] * sigma[i] + mu[i] * mu[i] - 1.0);
  }
  return kl;
}

double kl_value(const VariationalNet& net) {
  double kl = 0.0;
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const double s = sigma_from_rho(net.rho[i]);
    kl += -std::log(s) + 0.5 * (s * s + net.mu[i] * net.mu[i] - 1.0);
  }
  return kl;
}

void accumulate_kl_grads(const VariationalNet& net, double weight,
                         std::span<double> d_mu, std::span<double> d_rho) {
  if (d_mu.size() != net.dim() || d_rho.size() != net.dim()) {
    throw std::invalid_argument("accumulate_kl_grads: size mismatch");
  }
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const double s = softplus(net.rho[i]);
    d_mu[i] += weight * net.mu[i];
    if (s > kSigmaFloor) {
      // dKL/dsigma = sigma - 1/sigma, dsigma/drho = sigmoid(rho).
      d_rho[i] += weight * (s - 1.0 / s) * sigmoid(net.rho[i]);
    }
  }
}

FlipoutNoise FlipoutNoise::draw(const MlpSpec& spec, int batch, Rng& rng) {
  if (batch <= 0) throw std::invalid_argument("FlipoutNoise::draw: batch must be positive");
  FlipoutNoise n;
  n.eps.resize(spec.param_count());
  for (double& e : n.eps) e = rng.normal();
  const int L = spec.num_layers();
  n.in_signs.reserve(L);
  n.out_signs.reserve(L);
  for (int l = 0; l < L; ++l) {
    Mat in(spec.widths[l], batch);
    for (double& v : in.data) v = rng.rademacher();
    n.in_signs.push_back(std::move(in));
    Mat out(spec.widths[l + 1], batch);
    for (double& v : out.data) v = rng.rademacher();
    n.out_signs.push_back(std::move(out));
  }
  return n;
}

FlipoutResult flipout_forward(const VariationalNet& net, const Mat& inputs,
                              Rng& rng, FlipoutTape* tape) {
  return flipout_forward(net, inputs, FlipoutNoise::draw(net.spec, inputs.cols, rng), tape);
}

FlipoutResult flipout_forward(const VariationalNet& net, const Mat& inputs,
                              const FlipoutNoise& noise, FlipoutTape* tape) {
  const MlpSpec& spec = net.spec;
  if (net.mu.size() != spec.param_count() || net.rho.size() != spec.param_count()) {
    throw std::invalid_argument("flipout_forward: variational parameter size mismatch");
  }
  if (inputs.rows != spec.input_width()) {
    throw std::invalid_argument("flipout_forward: input panel height mismatch");
  }
  const int L = spec.num_layers();
  const int B = inputs.cols;
  if (static_cast<int>(noise.in_signs.size()) != L || noise.eps.size() != spec.param_count()) {
    throw std::invalid_argument("flipout_forward: noise does not match spec");
  }

  FlipoutTape local;
  FlipoutTape& t = tape ? *tape : local;
  t.noise = noise;
  t.base.pre.assign(L, Mat());
  t.base.act.assign(L + 1, Mat());
  t.base.act[0] = inputs;
  t.delta_w.assign(L, Mat());
  t.delta_b.assign(L, ParamVector());

  for (int l = 0; l < L; ++l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const double* mu_w = net.mu.data() + spec.weight_offset(l);
    const double* mu_b = net.mu.data() + spec.bias_offset(l);
    const double* rho_w = net.rho.data() + spec.weight_offset(l);
    const double* rho_b = net.rho.data() + spec.bias_offset(l);
    const double* eps_w = noise.eps.data() + spec.weight_offset(l);
    const double* eps_b = noise.eps.data() + spec.bias_offset(l);

    Mat& dw = t.delta_w[l];
    dw = Mat(out_w, in_w);
    for (int o = 0; o < out_w; ++o) {
      double* dwr = dw.row(o);
      const double* rr = rho_w + static_cast<std::size_t>(o) * in_w;
      const double* er = eps_w + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) dwr[i] = sigma_from_rho(rr[i]) * er[i];
    }
    ParamVector& db = t.delta_b[l];
    db.resize(out_w);
    for (int o = 0; o < out_w; ++o) db[o] = sigma_from_rho(rho_b[o]) * eps_b[o];

    const Mat& a = t.base.act[l];
    const Mat& r = noise.in_signs[l];
    const Mat& s = noise.out_signs[l];
    if (r.rows != in_w || r.cols != B || s.rows != out_w || s.cols != B) {
      throw std::invalid_argument("flipout_forward: sign panel shape mismatch");
    }

    // h = a .* r (per-example input sign flips).
    Mat h(in_w, B);
    for (int i = 0; i < in_w; ++i) {
      const double* ar = a.row(i);
      const double* rr = r.row(i);
      double* hr = h.row(i);
      for (int b = 0; b < B; ++b) hr[b] = ar[b] * rr[b];
    }

    Mat& pre = t.base.pre[l];
    pre = Mat(out_w, B);
    for (int o = 0; o < out_w; ++o) {
      double* pr = pre.row(o);
      const double* mwr = mu_w + static_cast<std::size_t>(o) * in_w;
      const double* dwr = dw.row(o);
      const double bo = mu_b[o];
      for (int b = 0; b < B; ++b) pr[b] = bo;
      // Mean path.
      for (int i = 0; i < in_w; ++i) {
        const double wv = mwr[i];
        const double* ar = a.row(i);
        for (int b = 0; b < B; ++b) pr[b] += wv * ar[b];
      }
      // Perturbation path: (DeltaW h) .* s + Deltab .* s.
      double* urow = pr;  // accumulate u into a scratch first
      Mat u(1, B);
      double* ur = u.row(0);
      for (int b = 0; b < B; ++b) ur[b] = 0.0;
      for (int i = 0; i < in_w; ++i) {
        const double wv = dwr[i];
        const double* hr = h.row(i);
        for (int b = 0; b < B; ++b) ur[b] += wv * hr[b];
      }
      const double* sr = s.row(o);
      const double dbo = db[o];
      for (int b = 0; b < B; ++b) urow[b] += (ur[b] + dbo) * sr[b];
    }

    Mat& out = t.base.act[l + 1];
    out = Mat(out_w, B);
    const bool last = (l == L - 1);
    for (int o = 0; o < out_w; ++o) {
      const double* pr = pre.row(o);
      double* orow = out.row(o);
      if (last) {
        for (int b = 0; b < B; ++b) orow[b] = output_transform(spec, o, pr[b]);
      } else {
        for (int b = 0; b < B; ++b) orow[b] = leaky_relu(pr[b]);
      }
    }
  }

  FlipoutResult res;
  res.outputs = t.base.act[L];
  res.kl = kl_value(net);
  return res;
}

FlipoutGrads flipout_backward(const VariationalNet& net, const FlipoutTape& tape,
                              const Mat& cotangents) {
  const MlpSpec& spec = net.spec;
  const int L = spec.num_layers();
  if (static_cast<int>(tape.base.pre.size()) != L) {
    throw std::invalid_argument("flipout_backward: tape does not match spec");
  }
  const int B = cotangents.cols;
  if (cotangents.rows != spec.output_width() || tape.base.act[0].cols != B) {
    throw std::invalid_argument("flipout_backward: cotangent panel shape mismatch");
  }

  FlipoutGrads grads;
  grads.d_mu.assign(spec.param_count(), 0.0);
  grads.d_rho.assign(spec.param_count(), 0.0);

  Mat delta = cotangents;
  for (int l = L - 1; l >= 0; --l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const bool last = (l == L - 1);
    const Mat& pre = tape.base.pre[l];
    for (int o = 0; o < out_w; ++o) {
      double* dr = delta.row(o);
      const double* pr = pre.row(o);
      if (last) {
        for (int b = 0; b < B; ++b) dr[b] *= output_transform_grad(spec, o, pr[b]);
      } else {
        for (int b = 0; b < B; ++b) dr[b] *= leaky_relu_grad(pr[b]);
      }
    }

    const Mat& a = tape.base.act[l];
    const Mat& r = tape.noise.in_signs[l];
    const Mat& s = tape.noise.out_signs[l];
    const Mat& dw = tape.delta_w[l];
    const double* rho_w = net.rho.data() + spec.weight_offset(l);
    const double* rho_b = net.rho.data() + spec.bias_offset(l);
    const double* eps_w = tape.noise.eps.data() + spec.weight_offset(l);
    const double* eps_b = tape.noise.eps.data() + spec.bias_offset(l);

    // dS = delta .* s (gradient flowing through the perturbation path).
    Mat ds(out_w, B);
    for (int o = 0; o < out_w; ++o) {
      const double* dr = delta.row(o);
      const double* sr = s.row(o);
      double* dsr = ds.row(o);
      for (int b = 0; b < B; ++b) dsr[b] = dr[b] * sr[b];
    }
    // h = a .* r.
    Mat h(in_w, B);
    for (int i = 0; i < in_w; ++i) {
      const double* ar = a.row(i);
      const double* rr = r.row(i);
      double* hr = h.row(i);
      for (int b = 0; b < B; ++b) hr[b] = ar[b] * rr[b];
    }

    double* g_mu_w = grads.d_mu.data() + spec.weight_offset(l);
    double* g_mu_b = grads.d_mu.data() + spec.bias_offset(l);
    double* g_rho_w = grads.d_rho.data() + spec.weight_offset(l);
    double* g_rho_b = grads.d_rho.data() + spec.bias_offset(l);

    for (int o = 0; o < out_w; ++o) {
      const double* dr = delta.row(o);
      const double* dsr = ds.row(o);
      double* gmw = g_mu_w + static_cast<std::size_t>(o) * in_w;
      double* grw = g_rho_w + static_cast<std::size_t>(o) * in_w;
      const double* rr = rho_w + static_cast<std::size_t>(o) * in_w;
      const double* er = eps_w + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) {
        const double* ar = a.row(i);
        const double* hr = h.row(i);
        double sm = 0.0, sd = 0.0;
        for (int b = 0; b < B; ++b) {
          sm += dr[b] * ar[b];
          sd += dsr[b] * hr[b];
        }
        gmw[i] += sm;
        // d sigma = d DeltaW * eps; d rho = d sigma * sigmoid(rho) unless floored.
        if (softplus(rr[i]) > kSigmaFloor) grw[i] += sd * er[i] * sigmoid(rr[i]);
      }
      double sb = 0.0, sdb = 0.0;
      for (int b = 0; b < B; ++b) {
        sb += dr[b];
        sdb += dsr[b];
      }
      g_mu_b[o] += sb;
      if (softplus(rho_b[o]) > kSigmaFloor) g_rho_b[o] += sdb * eps_b[o] * sigmoid(rho_b[o]);
    }

    if (l == 0) break;
    // d a = W_mean^T delta + (DeltaW^T dS) .* r.
    Mat prev(in_w, B);
    const double* mu_w = net.mu.data() + spec.weight_offset(l);
    for (int o = 0; o < out_w; ++o) {
      const double* dr = delta.row(o);
      const double* dsr = ds.row(o);
      const double* mwr = mu_w + static_cast<std::size_t>(o) * in_w;
      const double* dwr = dw.row(o);
      for (int i = 0; i < in_w; ++i) {
        const double wv = mwr[i];
        const double dv = dwr[i];
        double* pr = prev.row(i);
        for (int b = 0; b < B; ++b) pr[b] += wv * dr[b] + dv * dsr[b] * r(i, b);
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

}  // namespace causalbgm
