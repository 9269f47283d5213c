#pragma once

#include <span>
#include <vector>

#include "causalbgm/mlp.hpp"

namespace causalbgm {

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Mat vectors;                 // column j is the eigenvector for values[j]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Throws
// std::invalid_argument if the matrix is not square or not symmetric to a
// 1e-9 relative tolerance.
EigenDecomposition jacobi_eigh(const Mat& a, int max_sweeps = 100);

// Column means of an n x p data matrix.
std::vector<double> column_means(const Mat& x);

// Sample covariance (denominator n) of an n x p data matrix.
Mat covariance(const Mat& x);

}  // namespace causalbgm
