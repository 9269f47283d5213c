#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "causalbgm/rng.hpp"

namespace causalbgm {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kVarianceFloor = 1e-6;

double softplus(double x);
double softplus_inv(double y);  // inverse of softplus on y > 0
double sigmoid(double x);

inline double leaky_relu(double x) { return x >= 0.0 ? x : kLeakySlope * x; }
inline double leaky_relu_grad(double x) { return x >= 0.0 ? 1.0 : kLeakySlope; }

using ParamVector = std::vector<double>;

// Dense row-major matrix. Batched network evaluation uses "panels": matrices
// whose columns are examples, so the innermost (per-example) loops are
// stride-1.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::span<const double> row_span(int r) const { return {row(r), static_cast<std::size_t>(cols)}; }
  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Feed-forward architecture: dense layers with LeakyReLU(0.2) activations on
// hidden layers and identity on the output layer, except output digits in
// [var_begin, var_end) which pass through Softplus and are floored at
// kVarianceFloor (variance outputs).
struct MlpSpec {
  std::vector<int> widths;  // input width, hidden widths..., output width
  int var_begin = -1;       // variance slot disabled when var_begin < 0
  int var_end = -1;

  static MlpSpec dense(int input, const std::vector<int>& hidden, int output,
                       int var_begin = -1, int var_end = -1);

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  bool has_variance_slot() const { return var_begin >= 0; }

  std::size_t param_count() const;
  std::size_t weight_offset(int layer) const;  // W[layer] is widths[l+1] x widths[l], row-major
  std::size_t bias_offset(int layer) const;
  void validate() const;  // throws std::invalid_argument
};

// Xavier-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
ParamVector xavier_uniform(const MlpSpec& spec, Rng& rng);

// Single-example forward pass.
std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input);

// Allocation-free single-example forward for hot loops: ping-pongs between the
// workspace buffers and returns a span into the workspace (valid until the
// next call).
struct MlpWorkspace {
  std::vector<double> a;
  std::vector<double> b;
};

std::span<const double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                    std::span<const double> input, MlpWorkspace& ws);

struct MlpGrads {
  ParamVector params;
  std::vector<double> input;
};

// Reverse-mode gradients of <cotangent, output> w.r.t. params and input.
MlpGrads mlp_backward(const MlpSpec& spec, const ParamVector& params,
                      std::span<const double> input,
                      std::span<const double> cotangent);

// Batched forward/backward. Inputs and outputs are panels (width x batch).
// tape->act[0] is the input panel; tape->act[l+1] the output of layer l after
// activation; tape->pre[l] the pre-activation of layer l.
struct BatchTape {
  std::vector<Mat> pre;
  std::vector<Mat> act;
};

Mat mlp_forward_batch(const MlpSpec& spec, const ParamVector& params,
                      const Mat& inputs, BatchTape* tape = nullptr);

struct BatchGrads {
  ParamVector params;
  Mat input;
};

BatchGrads mlp_backward_batch(const MlpSpec& spec, const ParamVector& params,
                              const BatchTape& tape, const Mat& cotangents,
                              bool want_params = true, bool want_input = true);

}  // namespace causalbgm
