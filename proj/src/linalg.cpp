#include "causalbgm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace causalbgm {

EigenDecomposition jacobi_eigh(const Mat& a, int max_sweeps) {
  const int n = a.rows;
  if (a.cols != n) throw std::invalid_argument("jacobi_eigh: matrix must be square");
  double scale = 0.0;
  for (double v : a.data) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-9 * std::max(1.0, scale)) {
        throw std::invalid_argument("jacobi_eigh: matrix must be symmetric");
      }
    }
  }

  Mat m = a;
  Mat v(n, n);
  for (int i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    }
    if (off <= 1e-30 * std::max(1.0, scale * scale)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double app = m(p, p);
        const double aqq = m(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = m(i, i);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return diag[i] > diag[j]; });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

std::vector<double> column_means(const Mat& x) {
  std::vector<double> mean(x.cols, 0.0);
  for (int r = 0; r < x.rows; ++r) {
    const double* row = x.row(r);
    for (int c = 0; c < x.cols; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= x.rows;
  return mean;
}

Mat covariance(const Mat& x) {
  if (x.rows < 1) throw std::invalid_argument("covariance: need at least one row");
  const std::vector<double> mean = column_means(x);
  Mat cov(x.cols, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    const double* row = x.row(r);
    for (int i = 0; i < x.cols; ++i) {
      const double di = row[i] - mean[i];
      for (int j = i; j < x.cols; ++j) {
        cov(i, j) += di * (row[j] - mean[j]);
      }
    }
  }
  for (int i = 0; i < x.cols; ++i) {
    for (int j = i; j < x.cols; ++j) {
      cov(i, j) /= x.rows;
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

}  // namespace causalbgm
