#include "causalbgm/sir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace causalbgm {

int elbow_dimension(std::span<const double> eigenvalues, double ratio_threshold,
                    double cumvar_threshold, bool* used_ratio_rule) {
  const int p = static_cast<int>(eigenvalues.size());
  if (p == 0) throw std::invalid_argument("elbow_dimension: empty spectrum");
  double total = 0.0;
  for (double e : eigenvalues) total += std::max(e, 0.0);
  if (used_ratio_rule) *used_ratio_rule = true;
  if (total <= 0.0) {
    if (used_ratio_rule) *used_ratio_rule = false;
    return 0;
  }
  // Effective rank: eigenvalues this far below the leading one are numerical
  // zeros (e.g. rank deficiency when slices <= dimension), not elbow
  // candidates — a drop into the null space would otherwise always win.
  const double lead = std::max(eigenvalues[0], 0.0);
  const double floor = 1e-9 * lead;
  int rank = 0;
  while (rank < p && std::max(eigenvalues[rank], 0.0) > floor) ++rank;
  if (rank <= 1) return std::max(rank, 1);
  const double tiny = 1e-12 * total;
  double best_ratio = 0.0;
  int best_k = 1;
  for (int k = 1; k < rank; ++k) {
    const double num = std::max(eigenvalues[k - 1], 0.0);
    const double den = std::max(eigenvalues[k], 0.0);
    const double ratio = num / std::max(den, tiny);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = k;
    }
  }
  if (best_ratio >= ratio_threshold) return best_k;
  if (used_ratio_rule) *used_ratio_rule = false;
  double cum = 0.0;
  for (int k = 1; k <= p; ++k) {
    cum += std::max(eigenvalues[k - 1], 0.0);
    if (cum / total >= cumvar_threshold) return k;
  }
  return p;
}

SirResult sliced_inverse_regression(const Mat& v, std::span<const double> response,
                                    int n_slices, double ratio_threshold,
                                    double cumvar_threshold) {
  const int n = v.rows;
  const int p = v.cols;
  if (n < 2) throw std::invalid_argument("sliced_inverse_regression: need at least two rows");
  if (static_cast<int>(response.size()) != n) {
    throw std::invalid_argument("sliced_inverse_regression: response length mismatch");
  }
  if (n_slices < 2) throw std::invalid_argument("sliced_inverse_regression: need at least two slices");
  n_slices = std::min(n_slices, n);

  // Whitening transform W = cov(V)^(-1/2) via the covariance spectrum;
  // near-null directions are dropped (pseudo-inverse behaviour).
  const std::vector<double> mean = column_means(v);
  const Mat cov = covariance(v);
  const EigenDecomposition cov_eig = jacobi_eigh(cov);
  const double lead = std::max(cov_eig.values.front(), 0.0);
  Mat w(p, p);
  for (int k = 0; k < p; ++k) {
    const double lam = cov_eig.values[k];
    if (lam <= 1e-12 * std::max(lead, 1.0)) continue;
    const double inv_sqrt = 1.0 / std::sqrt(lam);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        w(i, j) += cov_eig.vectors(i, k) * inv_sqrt * cov_eig.vectors(j, k);
      }
    }
  }

  // Equal-count slices of the response order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return response[a] < response[b]; });

  Mat m(p, p);
  std::vector<double> slice_mean(p);
  std::vector<double> centered(p);
  int start = 0;
  for (int h = 0; h < n_slices; ++h) {
    const int count = n / n_slices + (h < n % n_slices ? 1 : 0);
    if (count == 0) continue;
    std::fill(slice_mean.begin(), slice_mean.end(), 0.0);
    for (int idx = start; idx < start + count; ++idx) {
      const double* row = v.row(order[idx]);
      for (int j = 0; j < p; ++j) slice_mean[j] += row[j];
    }
    for (int j = 0; j < p; ++j) {
      slice_mean[j] = slice_mean[j] / count - mean[j];
    }
    // Whitened slice mean.
    for (int i = 0; i < p; ++i) {
      double s = 0.0;
      for (int j = 0; j < p; ++j) s += w(i, j) * slice_mean[j];
      centered[i] = s;
    }
    const double weight = static_cast<double>(count) / n;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) m(i, j) += weight * centered[i] * centered[j];
    }
    start += count;
  }

  const EigenDecomposition m_eig = jacobi_eigh(m);
  SirResult out;
  out.eigenvalues = m_eig.values;
  // Back-transform directions into the original covariate space.
  out.directions = Mat(p, p);
  for (int k = 0; k < p; ++k) {
    for (int i = 0; i < p; ++i) {
      double s = 0.0;
      for (int j = 0; j < p; ++j) s += w(i, j) * m_eig.vectors(j, k);
      out.directions(i, k) = s;
    }
    // Unit-normalize each direction.
    double norm = 0.0;
    for (int i = 0; i < p; ++i) norm += out.directions(i, k) * out.directions(i, k);
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (int i = 0; i < p; ++i) out.directions(i, k) /= norm;
    }
  }
  double total = 0.0;
  for (double e : out.eigenvalues) total += std::max(e, 0.0);
  out.cumulative_var.resize(p);
  double cum = 0.0;
  for (int k = 0; k < p; ++k) {
    cum += std::max(out.eigenvalues[k], 0.0);
    out.cumulative_var[k] = total > 0.0 ? cum / total : 0.0;
  }
  out.recommended_k = elbow_dimension(out.eigenvalues, ratio_threshold, cumvar_threshold,
                                      &out.used_ratio_rule);
  return out;
}

PartitionRecommendation recommend_partition(const Mat& v, std::span<const double> x,
                                            std::span<const double> y, int q0,
                                            int n_slices) {
  if (q0 < 1 || q0 > 5) {
    throw std::invalid_argument("recommend_partition: q0 must lie in [1, 5]");
  }
  PartitionRecommendation rec;
  rec.sir_x = sliced_inverse_regression(v, x, n_slices);
  rec.sir_y = sliced_inverse_regression(v, y, n_slices);
  const EigenDecomposition cov_eig = jacobi_eigh(covariance(v));
  rec.cov_eigenvalues = cov_eig.values;
  rec.total_dim = elbow_dimension(rec.cov_eigenvalues);
  rec.latent.q0 = q0;
  rec.latent.q2 = std::max(rec.sir_x.recommended_k, 1);
  rec.latent.q1 = std::max(rec.sir_y.recommended_k, 1);
  rec.latent.q3 = std::max(rec.total_dim - q0 - rec.latent.q1 - rec.latent.q2, 0);
  rec.latent.validate();
  return rec;
}

}  // namespace causalbgm
