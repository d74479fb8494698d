#include "dhia/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dhia/errors.hpp"

namespace dhia {

PcaResult pca(const Matrix& x, std::size_t components) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw DataError("pca needs at least 2 rows");
  if (components == 0) throw ConfigError("pca needs at least one component");

  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Mat> xm(x.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mu = xm.colwise().mean();
  const Mat centred = xm.rowwise() - mu;
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");

  const std::size_t kept = std::min(components, d);
  PcaResult r;
  r.mean = Matrix(1, d);
  for (std::size_t j = 0; j < d; ++j) r.mean(0, j) = mu(static_cast<Eigen::Index>(j));
  r.components = Matrix(d, components);
  r.projection = Matrix(n, components);
  r.variances.assign(components, 0.0);

  // Eigen returns ascending eigenvalues.
  for (std::size_t c = 0; c < kept; ++c) {
    const auto col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    r.variances[c] = std::max(0.0, solver.eigenvalues()(col));
    for (std::size_t j = 0; j < d; ++j) r.components(j, c) = v(static_cast<Eigen::Index>(j));
    const Eigen::VectorXd p = centred * v;
    for (std::size_t i = 0; i < n; ++i) r.projection(i, c) = p(static_cast<Eigen::Index>(i));
  }
  return r;
}

}  // namespace dhia
