#include "causalbgm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace causalbgm {

double softplus(double x) {
  // log(1 + e^x), stable for large |x|.
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double softplus_inv(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("softplus_inv: argument must be positive");
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

MlpSpec MlpSpec::dense(int input, const std::vector<int>& hidden, int output,
                       int var_begin, int var_end) {
  MlpSpec spec;
  spec.widths.reserve(hidden.size() + 2);
  spec.widths.push_back(input);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(output);
  spec.var_begin = var_begin;
  spec.var_end = var_end;
  spec.validate();
  return spec;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MlpSpec: need at least input and output widths");
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("MlpSpec: widths must be positive");
  }
  if (var_begin >= 0) {
    if (var_end <= var_begin || var_end > widths.back()) {
      throw std::invalid_argument("MlpSpec: variance slot out of range");
    }
  } else if (var_end >= 0) {
    throw std::invalid_argument("MlpSpec: var_end set without var_begin");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
  }
  return n;
}

std::size_t MlpSpec::weight_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
  }
  return off;
}

std::size_t MlpSpec::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(widths[layer + 1]) * widths[layer];
}

ParamVector xavier_uniform(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector params(spec.param_count(), 0.0);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int fan_in = spec.widths[l];
    const int fan_out = spec.widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = params.data() + spec.weight_offset(l);
    const std::size_t n = static_cast<std::size_t>(fan_in) * fan_out;
    for (std::size_t i = 0; i < n; ++i) w[i] = (2.0 * rng.uniform() - 1.0) * limit;
    // Biases stay zero.
  }
  return params;
}

namespace {

void check_sizes(const MlpSpec& spec, const ParamVector& params, std::size_t input_size) {
  if (params.size() != spec.param_count()) {
    throw std::invalid_argument("mlp: parameter vector has size " + std::to_string(params.size()) +
                                ", expected " + std::to_string(spec.param_count()));
  }
  if (input_size != static_cast<std::size_t>(spec.input_width())) {
    throw std::invalid_argument("mlp: input has size " + std::to_string(input_size) +
                                ", expected " + std::to_string(spec.input_width()));
  }
}

// Applies the output transform in place; pre is the pre-activation.
inline double output_transform(const MlpSpec& spec, int digit, double pre) {
  if (spec.has_variance_slot() && digit >= spec.var_begin && digit < spec.var_end) {
    return std::max(softplus(pre), kVarianceFloor);
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

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input) {
  check_sizes(spec, params, input.size());
  std::vector<double> act(input.begin(), input.end());
  std::vector<double> next;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const double* w = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    next.assign(out_w, 0.0);
    for (int o = 0; o < out_w; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * in_w;
      double s = b[o];
      for (int i = 0; i < in_w; ++i) s += wr[i] * act[i];
      next[o] = s;
    }
    const bool last = (l == spec.num_layers() - 1);
    if (last) {
      for (int o = 0; o < out_w; ++o) next[o] = output_transform(spec, o, next[o]);
    } else {
      for (int o = 0; o < out_w; ++o) next[o] = leaky_relu(next[o]);
    }
    act.swap(next);
  }
  return act;
}

std::span<const double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                    std::span<const double> input, MlpWorkspace& ws) {
  check_sizes(spec, params, input.size());
  int max_w = 0;
  for (int w : spec.widths) max_w = std::max(max_w, w);
  if (ws.a.size() < static_cast<std::size_t>(max_w)) ws.a.resize(max_w);
  if (ws.b.size() < static_cast<std::size_t>(max_w)) ws.b.resize(max_w);
  const double* cur = input.data();
  bool write_a = true;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const double* w = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    const bool last = (l == spec.num_layers() - 1);
    double* next = write_a ? ws.a.data() : ws.b.data();
    for (int o = 0; o < out_w; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * in_w;
      double s = b[o];
      for (int i = 0; i < in_w; ++i) s += wr[i] * cur[i];
      next[o] = last ? output_transform(spec, o, s) : leaky_relu(s);
    }
    cur = next;
    write_a = !write_a;
  }
  return {cur, static_cast<std::size_t>(spec.output_width())};
}

MlpGrads mlp_backward(const MlpSpec& spec, const ParamVector& params,
                      std::span<const double> input,
                      std::span<const double> cotangent) {
  check_sizes(spec, params, input.size());
  if (cotangent.size() != static_cast<std::size_t>(spec.output_width())) {
    throw std::invalid_argument("mlp_backward: cotangent size mismatch");
  }
  const int L = spec.num_layers();
  // Forward, keeping activations and pre-activations.
  std::vector<std::vector<double>> act(L + 1);
  std::vector<std::vector<double>> pre(L);
  act[0].assign(input.begin(), input.end());
  for (int l = 0; l < L; ++l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const double* w = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    pre[l].assign(out_w, 0.0);
    for (int o = 0; o < out_w; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * in_w;
      double s = b[o];
      for (int i = 0; i < in_w; ++i) s += wr[i] * act[l][i];
      pre[l][o] = s;
    }
    act[l + 1].assign(out_w, 0.0);
    const bool last = (l == L - 1);
    for (int o = 0; o < out_w; ++o) {
      act[l + 1][o] = last ? output_transform(spec, o, pre[l][o]) : leaky_relu(pre[l][o]);
    }
  }

  MlpGrads grads;
  grads.params.assign(spec.param_count(), 0.0);
  std::vector<double> delta(cotangent.begin(), cotangent.end());
  for (int l = L - 1; l >= 0; --l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const bool last = (l == L - 1);
    for (int o = 0; o < out_w; ++o) {
      delta[o] *= last ? output_transform_grad(spec, o, pre[l][o])
                       : leaky_relu_grad(pre[l][o]);
    }
    double* gw = grads.params.data() + spec.weight_offset(l);
    double* gb = grads.params.data() + spec.bias_offset(l);
    for (int o = 0; o < out_w; ++o) {
      double* gwr = gw + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) gwr[i] += delta[o] * act[l][i];
      gb[o] += delta[o];
    }
    std::vector<double> prev(in_w, 0.0);
    const double* w = params.data() + spec.weight_offset(l);
    for (int o = 0; o < out_w; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) prev[i] += wr[i] * delta[o];
    }
    delta.swap(prev);
  }
  grads.input = std::move(delta);
  return grads;
}

Mat mlp_forward_batch(const MlpSpec& spec, const ParamVector& params,
                      const Mat& inputs, BatchTape* tape) {
  check_sizes(spec, params, static_cast<std::size_t>(inputs.rows));
  const int L = spec.num_layers();
  const int B = inputs.cols;
  BatchTape local;
  BatchTape& t = tape ? *tape : local;
  t.pre.assign(L, Mat());
  t.act.assign(L + 1, Mat());
  t.act[0] = inputs;
  for (int l = 0; l < L; ++l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const double* w = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    Mat& pre = t.pre[l];
    pre = Mat(out_w, B);
    const Mat& a = t.act[l];
    for (int o = 0; o < out_w; ++o) {
      double* pr = pre.row(o);
      const double* wr = w + static_cast<std::size_t>(o) * in_w;
      const double bo = b[o];
      for (int bcol = 0; bcol < B; ++bcol) pr[bcol] = bo;
      for (int i = 0; i < in_w; ++i) {
        const double wv = wr[i];
        const double* ar = a.row(i);
        for (int bcol = 0; bcol < B; ++bcol) pr[bcol] += wv * ar[bcol];
      }
    }
    Mat& out = t.act[l + 1];
    out = Mat(out_w, B);
    const bool last = (l == L - 1);
    for (int o = 0; o < out_w; ++o) {
      const double* pr = pre.row(o);
      double* orow = out.row(o);
      if (last) {
        for (int bcol = 0; bcol < B; ++bcol) orow[bcol] = output_transform(spec, o, pr[bcol]);
      } else {
        for (int bcol = 0; bcol < B; ++bcol) orow[bcol] = leaky_relu(pr[bcol]);
      }
    }
  }
  return t.act[L];
}

BatchGrads mlp_backward_batch(const MlpSpec& spec, const ParamVector& params,
                              const BatchTape& tape, const Mat& cotangents,
                              bool want_params, bool want_input) {
  const int L = spec.num_layers();
  if (static_cast<int>(tape.pre.size()) != L || static_cast<int>(tape.act.size()) != L + 1) {
    throw std::invalid_argument("mlp_backward_batch: tape does not match spec");
  }
  const int B = cotangents.cols;
  if (cotangents.rows != spec.output_width() || tape.act[0].cols != B) {
    throw std::invalid_argument("mlp_backward_batch: cotangent panel shape mismatch");
  }
  BatchGrads grads;
  if (want_params) grads.params.assign(spec.param_count(), 0.0);
  Mat delta = cotangents;
  for (int l = L - 1; l >= 0; --l) {
    const int in_w = spec.widths[l];
    const int out_w = spec.widths[l + 1];
    const bool last = (l == L - 1);
    const Mat& pre = tape.pre[l];
    for (int o = 0; o < out_w; ++o) {
      double* dr = delta.row(o);
      const double* pr = pre.row(o);
      if (last) {
        for (int b = 0; b < B; ++b) dr[b] *= output_transform_grad(spec, o, pr[b]);
      } else {
        for (int b = 0; b < B; ++b) dr[b] *= leaky_relu_grad(pr[b]);
      }
    }
    if (want_params) {
      double* gw = grads.params.data() + spec.weight_offset(l);
      double* gb = grads.params.data() + spec.bias_offset(l);
      const Mat& a = tape.act[l];
      for (int o = 0; o < out_w; ++o) {
        const double* dr = delta.row(o);
        double* gwr = gw + static_cast<std::size_t>(o) * in_w;
        for (int i = 0; i < in_w; ++i) {
          const double* ar = a.row(i);
          double s = 0.0;
          for (int b = 0; b < B; ++b) s += dr[b] * ar[b];
          gwr[i] += s;
        }
        double s = 0.0;
        for (int b = 0; b < B; ++b) s += dr[b];
        gb[o] += s;
      }
    }
    const bool need_prev = want_input || l > 0;
    if (!need_prev) break;
    Mat prev(in_w, B);
    const double* w = params.data() + spec.weight_offset(l);
    for (int o = 0; o < out_w; ++o) {
      const double* dr = delta.row(o);
      const double* wr = w + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) {
        const double wv = wr[i];
        double* pr = prev.row(i);
        for (int b = 0; b < B; ++b) pr[b] += wv * dr[b];
      }
    }
    delta = std::move(prev);
  }
  if (want_input) grads.input = std::move(delta);
  return grads;
}

}  // namespace causalbgm
