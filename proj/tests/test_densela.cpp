#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "samlab/densela.hpp"
#include "samlab/rng.hpp"

using namespace samlab;

namespace {

SymMatrix random_sym(std::size_t n, CounterRng& rng) {
  SymMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a.set(i, j, 2.0 * rng.uniform() - 1.0);
  return a;
}

// roots of det(A - l I) for 3x3 symmetric A, trigonometric form, descending
std::vector<double> cubic_roots(const SymMatrix& a) {
  const double q = a.trace() / 3.0;
  double p2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = a(i, j) - (i == j ? q : 0.0);
      p2 += d * d;
    }
  const double p = std::sqrt(p2 / 6.0);
  SymMatrix b = a;
  for (std::size_t i = 0; i < 3; ++i) b.set(i, i, a(i, i) - q);
  b *= 1.0 / p;
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double phi = std::acos(std::clamp(det / 2.0, -1.0, 1.0)) / 3.0;
  const double l1 = q + 2.0 * p * std::cos(phi);
  const double l3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {l1, 3.0 * q - l1 - l3, l3};
}

double max_abs_diff(const SymMatrix& a, const SymMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace

TEST(Eig, IdentityAndDiagonal) {
  const auto e = eig_sym(SymMatrix::identity(3));
  for (double v : e.values) EXPECT_DOUBLE_EQ(v, 1.0);

  const auto d = eig_sym(SymMatrix::diagonal({1.0, 3.0}));
  EXPECT_DOUBLE_EQ(d.values[0], 3.0);
  EXPECT_DOUBLE_EQ(d.values[1], 1.0);
  EXPECT_EQ(d.vectors[0], (Vector{0.0, 1.0}));
}

TEST(Eig, TwoByTwoClosedForm) {
  CounterRng rng(11);
  for (int k = 0; k < 100; ++k) {
    const SymMatrix a = random_sym(2, rng);
    const double m = 0.5 * (a(0, 0) + a(1, 1));
    const double r = std::hypot(0.5 * (a(0, 0) - a(1, 1)), a(0, 1));
    const auto e = eig_sym(a);
    EXPECT_NEAR(e.values[0], m + r, 1e-14);
    EXPECT_NEAR(e.values[1], m - r, 1e-14);
  }
}

TEST(Eig, ThreeByThreeCharacteristicPolynomial) {
  CounterRng rng(12);
  for (int k = 0; k < 100; ++k) {
    const SymMatrix a = random_sym(3, rng);
    const auto roots = cubic_roots(a);
    const auto e = eig_sym(a);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(e.values[i], roots[i], 1e-12);
  }
}

TEST(Eig, ReconstructionOrthonormalitySign) {
  CounterRng rng(13);
  for (int k = 0; k < 50; ++k) {
    const SymMatrix a = random_sym(6, rng);
    const auto e = eig_sym(a);
    EXPECT_LE(max_abs_diff(e.reconstruct(), a), 1e-10 * (1.0 + a.frobenius_norm()));
    EXPECT_TRUE(std::is_sorted(e.values.rbegin(), e.values.rend()));
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j)
        EXPECT_NEAR(e.vectors[i].dot(e.vectors[j]), i == j ? 1.0 : 0.0, 1e-12);
      const auto first = std::find_if(e.vectors[i].begin(), e.vectors[i].end(),
                                      [](double v) { return std::abs(v) > 1e-12; });
      ASSERT_NE(first, e.vectors[i].end());
      EXPECT_GT(*first, 0.0);
    }
  }
}

TEST(Eig, ScalesLinearly) {
  CounterRng rng(14);
  const SymMatrix a = random_sym(5, rng);
  const auto e = eig_sym(a);
  const auto s = eig_sym(3.7 * a);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s.values[i], 3.7 * e.values[i], 1e-10 * std::abs(3.7 * e.values[i]) + 1e-14);
}

TEST(Eig, RejectsNonFinite) {
  SymMatrix a = SymMatrix::identity(2);
  a.set(0, 1, std::nan(""));
  EXPECT_THROW(eig_sym(a), std::invalid_argument);
}

TEST(Rank, Examples) {
  EXPECT_EQ(numerical_rank(eig_sym(SymMatrix::diagonal({16.0, 12.0, 0.0, 0.0})), 1e-8), 2u);
  EXPECT_EQ(numerical_rank(eig_sym(SymMatrix(3))), 0u);
  EXPECT_EQ(numerical_rank(eig_sym(SymMatrix::diagonal({2.0, 1.0, 0.5}))), 3u);
}

TEST(Projector, Examples) {
  const auto d = eig_sym(SymMatrix::diagonal({3.0, 1.0}));
  const std::vector<std::size_t> top{0};
  EXPECT_EQ(max_abs_diff(spectral_projector(d, top), SymMatrix::diagonal({1.0, 0.0})), 0.0);

  CounterRng rng(15);
  const auto e = eig_sym(random_sym(5, rng));
  EXPECT_LE(max_abs_diff(spectral_projector(e, index_range(0, 5)), SymMatrix::identity(5)), 1e-12);

  const auto h = eig_sym(SymMatrix::diagonal({0.0, 0.0, 16.0, 12.0}));
  const auto kernel = index_range(2, 4);  // values sorted: 16, 12, 0, 0
  EXPECT_LE(max_abs_diff(spectral_projector(h, kernel), SymMatrix::diagonal({1.0, 1.0, 0.0, 0.0})), 1e-15);

  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(spectral_projector(h, bad), std::out_of_range);
}

TEST(Projector, Idempotent) {
  CounterRng rng(16);
  const auto e = eig_sym(random_sym(6, rng));
  const SymMatrix p = spectral_projector(e, index_range(1, 4));
  EXPECT_LE(max_abs_diff(p.symmetric_product(p), p), 1e-10);
}
