#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dhia/errors.hpp"
#include "dhia/pca.hpp"
#include "test_support.hpp"

using namespace dhia;

namespace {

double dist2(const Matrix& m, std::size_t a, std::size_t b) {
  double s = 0;
  for (std::size_t j = 0; j < m.cols(); ++j) s += (m(a, j) - m(b, j)) * (m(a, j) - m(b, j));
  return s;
}

}  // namespace

TEST_CASE("two-dimensional input is rotated, not distorted") {
  std::mt19937_64 rng(3);
  const Matrix x = dhia::testing::random_matrix(12, 2, rng);
  const PcaResult p = pca(x, 2);
  for (std::size_t a = 0; a < 12; ++a)
    for (std::size_t b = 0; b < 12; ++b) CHECK(dist2(p.projection, a, b) == doctest::Approx(dist2(x, a, b)).epsilon(1e-10));
  CHECK(p.variances[0] >= p.variances[1]);
}

TEST_CASE("closed-form 2x2 covariance") {
  // Rows (±a, ±b) with a != b and zero cross term: covariance diag(a², b²)·n/(n-1).
  const Matrix x{{3, 1}, {-3, 1}, {3, -1}, {-3, -1}};
  const PcaResult p = pca(x, 2);
  CHECK(p.variances[0] == doctest::Approx(36.0 / 3.0).epsilon(1e-12));
  CHECK(p.variances[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(p.components(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p.components(1, 0)) < 1e-12);
  CHECK(p.projection(0, 0) == doctest::Approx(3.0).epsilon(1e-12));

  // Correlated pair: eigenvalues of [[s, c], [c, s]] are s ± c.
  const Matrix y{{1, 1}, {-1, -1}, {1, -1}, {-1, 1}, {2, 2}, {-2, -2}};
  const PcaResult q = pca(y, 2);
  // s = (1+1+1+1+4+4)/5 = 2.4, c = (1+1-1-1+4+4)/5 = 1.6
  CHECK(q.variances[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(q.variances[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(q.components(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(q.components(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("projection is centred and padded") {
  const Matrix x{{1}, {2}, {6}};
  const PcaResult p = pca(x, 2);
  REQUIRE(p.projection.cols() == 2);
  double s = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    s += p.projection(i, 0);
    CHECK(p.projection(i, 1) == 0.0);
  }
  CHECK(std::abs(s) < 1e-12);
  CHECK(p.mean(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("pca errors") {
  CHECK_THROWS_AS(pca(Matrix{{1, 2}}, 2), DataError);
  CHECK_THROWS_AS(pca(Matrix{{1}, {2}}, 0), ConfigError);
}
