#include <gtest/gtest.h>

#include <random>

#include "corrisk/corelin.hpp"
#include "test_support.hpp"

namespace corrisk {
namespace {

using testing::fd_tangent;
using testing::inner_scale;
using testing::random_correlation;
using testing::random_lower;

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::DomainError;
}

TEST(PairIndexing, RoundTrips) {
  std::size_t k = 0;
  for (const Pair& p : all_pairs(12)) {
    EXPECT_EQ(pair_index(p), k);
    EXPECT_EQ(pair_at(k), p);
    ++k;
  }
  EXPECT_EQ(k, pair_count(12));
}

TEST(ValidateCorrelation, AcceptsIdentityAndTextbookCase) {
  EXPECT_NO_THROW(validate_correlation({{1, 0}, {0, 1}}));
  const auto rho = validate_correlation({{1, 0.5}, {0.5, 1}});
  EXPECT_EQ(rho(0, 1), 0.5);
  EXPECT_EQ(rho(1, 0), 0.5);
}

TEST(ValidateCorrelation, ReadsLowerTriangleOnly) {
  const auto rho = validate_correlation({{1, 0.9}, {0.2, 1}});
  EXPECT_EQ(rho(0, 1), 0.2);
  EXPECT_EQ(rho(1, 0), 0.2);
}

TEST(ValidateCorrelation, RejectsMalformedInput) {
  EXPECT_EQ(code_of([] { validate_correlation({{1, 1.5}, {1.5, 1}}); }), ErrorCode::EntryOutOfRange);
  EXPECT_EQ(code_of([] { validate_correlation({{1, 0}, {0}}); }), ErrorCode::NotSquare);
  EXPECT_EQ(code_of([] { validate_correlation({{1.1, 0}, {0, 1}}); }), ErrorCode::DiagonalNotOne);
  EXPECT_EQ(code_of([] { validate_correlation({{1, 0}, {std::nan(""), 1}}); }), ErrorCode::EntryOutOfRange);
  EXPECT_EQ(code_of([] {
              validate_correlation({{1, 0.9, 0.9}, {0.9, 1, -0.9}, {0.9, -0.9, 1}});
            }),
            ErrorCode::NotPositiveSemidefinite);
}

TEST(CholeskyFactorize, ClosedFormCases) {
  const auto id = cholesky_factorize(CorrelationMatrix::identity(3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j <= i; ++j) EXPECT_EQ(id(i, j), i == j ? 1.0 : 0.0);

  const auto c = cholesky_factorize(validate_correlation({{1, 0.5}, {0.5, 1}}));
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c(1, 0), 0.5);
  EXPECT_NEAR(c(1, 1), 0.86602540378443865, 1e-15);
  EXPECT_EQ(c.at(0, 1), 0.0);
}

TEST(CholeskyFactorize, DegenerateRankOne) {
  const auto c = cholesky_factorize(validate_correlation({{1, 1}, {1, 1}}));
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c(1, 0), 1.0);
  EXPECT_EQ(c(1, 1), 0.0);
  EXPECT_FALSE(c.strictly_positive());

  const auto ones = cholesky_factorize(CorrelationMatrix::uniform(4, 1.0));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(ones(i, 0), 1.0);
    for (std::size_t j = 1; j <= i; ++j) EXPECT_EQ(ones(i, j), 0.0);
  }
}

TEST(CholeskyFactorize, ReconstructsRandomMatrices) {
  std::mt19937_64 rng(7);
  for (std::size_t n : {2u, 5u, 10u, 20u, 40u}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto rho = random_correlation(n, rng);
      const auto c = cholesky_factorize(rho);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k) s += c.at(i, k) * c.at(j, k);
          err = std::max(err, std::abs(s - rho(i, j)));
        }
      EXPECT_LE(err, 1e-12) << "n=" << n;
      EXPECT_TRUE(c.strictly_positive());
    }
  }
}

TEST(CholeskyTangent, ClosedFormTwoByTwo) {
  const auto rho0 = CorrelationMatrix::identity(2);
  const auto d0 = cholesky_tangent(rho0, cholesky_factorize(rho0), {1, 0});
  EXPECT_EQ(d0(0, 0), 0.0);
  EXPECT_EQ(d0(1, 0), 1.0);
  EXPECT_EQ(d0(1, 1), 0.0);

  const auto rho = validate_correlation({{1, 0.5}, {0.5, 1}});
  const auto d = cholesky_tangent(rho, cholesky_factorize(rho), {1, 0});
  EXPECT_EQ(d(1, 0), 1.0);
  EXPECT_NEAR(d(1, 1), -0.57735026918962573, 1e-15);
}

TEST(CholeskyTangent, RejectsSingularFactor) {
  const auto rho = validate_correlation({{1, 1}, {1, 1}});
  const auto c = cholesky_factorize(rho);
  EXPECT_EQ(code_of([&] { cholesky_tangent(rho, c, {1, 0}); }), ErrorCode::SingularPivot);
  EXPECT_EQ(code_of([&] { cholesky_adjoint(c, LowerTriangular(2)); }), ErrorCode::SingularPivot);
}

// Property: tangent agrees with a central difference of the factorization.
TEST(CholeskyTangent, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (std::size_t n : {2u, 5u, 10u, 20u}) {
    for (int rep = 0; rep < 25; ++rep) {
      const auto rho = random_correlation(n, rng);
      const auto c = cholesky_factorize(rho);
      for (const Pair& p : all_pairs(n)) {
        const auto dot = cholesky_tangent(rho, c, p);
        const auto fd = fd_tangent(rho, p, 1e-6);
        double err = 0.0, scale = 1.0;
        for (std::size_t k = 0; k < dot.packed().size(); ++k) {
          err = std::max(err, std::abs(dot.packed()[k] - fd.packed()[k]));
          scale = std::max(scale, std::abs(dot.packed()[k]));
        }
        ASSERT_LE(err, 1e-6 * scale) << "n=" << n << " pair (" << p.i << "," << p.j << ")";
      }
    }
  }
}

TEST(CholeskyAdjoint, ClosedFormTwoByTwo) {
  const auto c0 = cholesky_factorize(CorrelationMatrix::identity(2));
  LowerTriangular seed(2);
  seed(1, 0) = 1.0;
  EXPECT_EQ(cholesky_adjoint(c0, seed)(1, 0), 1.0);

  const auto c = cholesky_factorize(validate_correlation({{1, 0.5}, {0.5, 1}}));
  LowerTriangular seed22(2);
  seed22(1, 1) = 1.0;
  EXPECT_NEAR(cholesky_adjoint(c, seed22)(1, 0), -0.57735026918962573, 1e-15);
}

// Property: <cbar, tangent(p)> == adjoint(cbar)[p] for every pair.
TEST(CholeskyAdjoint, DualToTangent) {
  std::mt19937_64 rng(13);
  for (std::size_t n : {2u, 3u, 5u, 10u, 20u}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto rho = random_correlation(n, rng);
      const auto c = cholesky_factorize(rho);
      const auto seed = random_lower(n, rng);
      const auto bar = cholesky_adjoint(c, seed);
      for (const Pair& p : all_pairs(n)) {
        const auto dot = cholesky_tangent(rho, c, p);
        const double forward = inner(seed, dot);
        ASSERT_LE(std::abs(forward - bar[p]), 1e-10 * inner_scale(seed, dot))
            << "n=" << n << " pair (" << p.i << "," << p.j << ")";
      }
    }
  }
}

TEST(CholeskyAdjoint, LinearInSeed) {
  std::mt19937_64 rng(17);
  const std::size_t n = 8;
  const auto c = cholesky_factorize(random_correlation(n, rng));
  const auto s1 = random_lower(n, rng);
  const auto s2 = random_lower(n, rng);
  const double alpha = 0.7, beta = -2.3;
  LowerTriangular combo = s1;
  combo *= alpha;
  LowerTriangular scaled2 = s2;
  scaled2 *= beta;
  combo += scaled2;

  const auto g1 = cholesky_adjoint(c, s1);
  const auto g2 = cholesky_adjoint(c, s2);
  const auto g = cholesky_adjoint(c, combo);
  for (std::size_t k = 0; k < g.pairs(); ++k) {
    const double expect = alpha * g1.values()[k] + beta * g2.values()[k];
    const double scale = std::abs(alpha * g1.values()[k]) + std::abs(beta * g2.values()[k]);
    EXPECT_LE(std::abs(g.values()[k] - expect), 1e-12 * std::max(scale, 1.0));
  }
}

TEST(CholeskyAdjoint, CostWithinThreeFactorizations) {
  std::mt19937_64 rng(19);
  for (std::size_t n : {5u, 20u, 64u}) {
    const auto rho = random_correlation(n, rng);
    OpCounter fwd, rev;
    const auto c = cholesky_factorize(rho, &fwd);
    cholesky_adjoint(c, random_lower(n, rng), &rev);
    EXPECT_GT(fwd.flops, 0u);
    EXPECT_LE(rev.flops, 3 * fwd.flops) << "n=" << n;
  }
}

TEST(BumpPair, MovesBothEntries) {
  const auto b = bump_pair(CorrelationMatrix::identity(2), {1, 0}, 1e-4);
  EXPECT_EQ(b(1, 0), 1e-4);
  EXPECT_EQ(b(0, 1), 1e-4);
}

TEST(BumpPair, RespectsRangeAndDefiniteness) {
  const auto one = validate_correlation({{1, 1}, {1, 1}});
  EXPECT_EQ(code_of([&] { bump_pair(one, {1, 0}, 1e-4); }), ErrorCode::EntryOutOfRange);

  const auto near = validate_correlation({{1, -0.999999}, {-0.999999, 1}});
  EXPECT_EQ(code_of([&] { bump_pair(near, {1, 0}, -1e-4); }), ErrorCode::EntryOutOfRange);

  // Valid range but indefinite after the bump.
  const auto rho = validate_correlation({{1, 0.7, 0.7}, {0.7, 1, 0}, {0.7, 0, 1}});
  EXPECT_EQ(code_of([&] { bump_pair(rho, {2, 1}, -0.1); }), ErrorCode::NotPositiveSemidefinite);
}

}  // namespace
}  // namespace corrisk
