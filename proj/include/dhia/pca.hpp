#pragma once

#include <cstddef>
#include <vector>

#include "dhia/matrix.hpp"

namespace dhia {

struct PcaResult {
  Matrix projection;            // n x components
  Matrix components;            // d x components, unit columns
  std::vector<double> variances;  // eigenvalues of the sample covariance, descending
  Matrix mean;                  // 1 x d
};

// Top principal components of the rows of x (covariance divides by n - 1).
// If d < components the projection is zero-padded on the right.
// Each component's sign is fixed so its largest-magnitude entry is positive.
PcaResult pca(const Matrix& x, std::size_t components = 2);

}  // namespace dhia
