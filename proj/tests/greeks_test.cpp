#include <gtest/gtest.h>

#include <cmath>

#include "corrisk/greeks.hpp"

namespace corrisk {
namespace {

EngineConfig portfolio(std::size_t n = 5, std::size_t paths = 10000, double rho = 0.3) {
  EngineConfig cfg;
  cfg.correlation = CorrelationMatrix::uniform(n, rho);
  cfg.hazards.assign(n, 0.02);
  cfg.contract = make_regular_swap(2, 5.0, 4, 0.01, std::vector<double>(n, 0.4), 0.03);
  cfg.n_paths = paths;
  cfg.n_bins = 20;
  cfg.seed = 12345;
  return cfg;
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

TEST(Price, VanishingLegsPriceToZero) {
  auto cfg = portfolio(3, 5000);
  cfg.contract.spreads.assign(cfg.contract.spreads.size(), 0.0);
  cfg.contract.recoveries.assign(3, 1.0);
  const auto v = price(cfg);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_EQ(v.std_error, 0.0);
  EXPECT_EQ(v.n_paths, 5000u);
}

TEST(Price, SingleNameClosedForm) {
  EngineConfig cfg;
  cfg.correlation = CorrelationMatrix::identity(1);
  cfg.hazards = {0.05};
  cfg.contract = make_regular_swap(1, 5.0, 4, 0.0, {0.4}, 0.0);
  cfg.n_paths = 100000;
  cfg.seed = 99;
  const auto v = price(cfg);
  const double exact = 0.6 * (1.0 - std::exp(-0.05 * 5.0));
  EXPECT_LT(std::abs(v.value - exact), 4.0 * v.std_error);
  EXPECT_GT(v.std_error, 0.0);
}

TEST(Price, BitwiseReproducibleAcrossThreads) {
  auto cfg = portfolio(6, 7000);
  const auto a = price(cfg);
  cfg.threads = 4;
  const auto b = price(cfg);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Price, RejectsInvalidConfig) {
  auto cfg = portfolio();
  cfg.hazards.pop_back();
  EXPECT_THROW(price(cfg), Error);
  cfg = portfolio();
  cfg.n_bins = 0;
  EXPECT_THROW(price(cfg), Error);
}

TEST(CombineBins, TwoSampleFormula) {
  const auto c = cholesky_factorize(validate_correlation({{1, 0.4}, {0.4, 1}}));
  std::vector<BinAccumulator> bins(2, BinAccumulator(2));
  bins[0].sum_cbar(1, 0) = 3.0;
  bins[0].sum_cbar(1, 1) = 1.0;
  bins[1].sum_cbar(1, 0) = -1.0;
  bins[0].count = bins[1].count = 2;
  LowerTriangular m0 = bins[0].sum_cbar, m1 = bins[1].sum_cbar;
  m0 *= 0.5;
  m1 *= 0.5;
  const double a = cholesky_adjoint(c, m0)(1, 0);
  const double b = cholesky_adjoint(c, m1)(1, 0);
  const auto g = combine_bins(bins, c);
  EXPECT_NEAR(g.mean(1, 0), 0.5 * (a + b), 1e-15);
  EXPECT_NEAR(g.standard_error()(1, 0), 0.5 * std::abs(a - b), 1e-15);
  EXPECT_EQ(g.n_paths, 4u);
}

TEST(CombineBins, IdenticalBinsHaveZeroError) {
  const auto c = cholesky_factorize(CorrelationMatrix::uniform(3, 0.2));
  BinAccumulator bin(3);
  bin.sum_cbar(2, 1) = 0.7;
  bin.sum_cbar(1, 0) = -0.2;
  bin.count = 10;
  const std::vector<BinAccumulator> bins(4, bin);
  const auto g = combine_bins(bins, c);
  for (double se : g.standard_error().values()) EXPECT_EQ(se, 0.0);
}

TEST(CombineBins, Errors) {
  const auto c = cholesky_factorize(CorrelationMatrix::identity(2));
  std::vector<BinAccumulator> bins(2, BinAccumulator(2));
  bins[0].count = 3;
  bins[1].count = 4;
  try {
    combine_bins(bins, c);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnequalBins);
  }
  bins.resize(1);
  const auto g = combine_bins(bins, c);
  EXPECT_FALSE(g.std_error.has_value());
  try {
    g.standard_error();
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NBinsTooSmall);
  }
}

TEST(AadGreeks, BinningDoesNotMoveThePointEstimate) {
  auto cfg = portfolio(5, 6000);
  std::vector<GreeksEstimate> runs;
  for (std::size_t bins : {1u, 3u, 20u, 6000u}) {
    cfg.n_bins = bins;
    runs.push_back(correlation_greeks_aad(cfg));
  }
  cfg.method = Method::aad_per_path;
  runs.push_back(correlation_greeks_aad(cfg));
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < r.mean.pairs(); ++k) {
      const double ref = runs.front().mean.values()[k];
      EXPECT_LE(std::abs(r.mean.values()[k] - ref), 1e-10 * std::abs(ref));
    }
  }
  EXPECT_EQ(runs.back().n_bins, 6000u);
  EXPECT_EQ(runs.back().method, Method::aad_per_path);
}

TEST(AadGreeks, ForwardModeAgrees) {
  auto cfg = portfolio(5, 5000);
  cfg.method = Method::aad_per_path;
  const auto aad = correlation_greeks_aad(cfg);
  cfg.method = Method::forward;
  const auto fwd = correlation_greeks_forward(cfg);
  for (std::size_t k = 0; k < aad.mean.pairs(); ++k) {
    EXPECT_LE(std::abs(aad.mean.values()[k] - fwd.mean.values()[k]), 1e-10 * std::abs(fwd.mean.values()[k]));
    // Same per-path estimator, so the standard errors agree too.
    EXPECT_NEAR(aad.standard_error().values()[k], fwd.standard_error().values()[k],
                1e-8 * fwd.standard_error().values()[k]);
  }
  EXPECT_NEAR(aad.price.value, fwd.price.value, 1e-12 * std::abs(fwd.price.value));
}

TEST(AadGreeks, TwoNamesAgreeWithBumping) {
  auto cfg = portfolio(2, 100000, 0.0);
  const auto aad = correlation_greeks_aad(cfg);
  const auto bump = correlation_greeks_bump(cfg);
  const double a = aad.mean(1, 0), b = bump.mean(1, 0);
  EXPECT_LT(std::abs(a - b), 3.0 * combined(aad.standard_error()(1, 0), bump.standard_error()(1, 0)));
  EXPECT_GT(std::abs(a), 3.0 * aad.standard_error()(1, 0)) << "signal should be resolved";
  EXPECT_NEAR(aad.price.value, bump.price.value, 1e-12 * std::abs(bump.price.value));
}

TEST(AadGreeks, ExchangeableNamesGiveExchangeableGreeks) {
  auto cfg = portfolio(4, 40000, 0.0);
  const auto g = correlation_greeks_aad(cfg);
  const auto& se = g.standard_error();
  for (std::size_t a = 0; a < g.mean.pairs(); ++a)
    for (std::size_t b = a + 1; b < g.mean.pairs(); ++b)
      EXPECT_LT(std::abs(g.mean.values()[a] - g.mean.values()[b]),
                4.0 * combined(se.values()[a], se.values()[b]));
}

TEST(AadGreeks, TruncatesToWholeBins) {
  auto cfg = portfolio(3, 1003);
  cfg.n_bins = 10;
  const auto g = correlation_greeks_aad(cfg);
  EXPECT_EQ(g.n_paths, 1000u);
  EXPECT_EQ(g.price.n_paths, 1000u);
  ASSERT_EQ(g.warnings.size(), 1u);
}

TEST(AadGreeks, RejectsWrongMethodAndSingularFactor) {
  auto cfg = portfolio(3, 1000);
  cfg.method = Method::bump;
  EXPECT_THROW(correlation_greeks_aad(cfg), Error);
  cfg = portfolio(2, 1000, 1.0);
  try {
    correlation_greeks_aad(cfg);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularPivot);
  }
}

TEST(Greeks, EveryMethodReproducibleAcrossThreads) {
  for (Method m : {Method::bump, Method::forward, Method::aad_per_path, Method::aad_binned}) {
    auto cfg = portfolio(4, 3000);
    cfg.method = m;
    const auto a = correlation_greeks(cfg);
    cfg.threads = 3;
    const auto b = correlation_greeks(cfg);
    EXPECT_EQ(a.mean, b.mean) << to_string(m);
    EXPECT_EQ(a.std_error, b.std_error) << to_string(m);
    EXPECT_EQ(a.price.value, b.price.value) << to_string(m);
  }
}

TEST(BumpGreeks, StepSizesAreConsistent) {
  auto cfg = portfolio(3, 20000);
  cfg.bump_size = 1e-3;
  const auto coarse = correlation_greeks_bump(cfg);
  cfg.bump_size = 1e-4;
  const auto fine = correlation_greeks_bump(cfg);
  for (std::size_t k = 0; k < fine.mean.pairs(); ++k)
    EXPECT_LT(std::abs(coarse.mean.values()[k] - fine.mean.values()[k]),
              3.0 * combined(coarse.standard_error().values()[k], fine.standard_error().values()[k]));
}

TEST(BumpGreeks, ShrinksStepNearTheBoundary) {
  auto cfg = portfolio(2, 2000, 0.99995);
  const auto g = correlation_greeks_bump(cfg);
  ASSERT_EQ(g.warnings.size(), 1u);
  EXPECT_NE(g.warnings[0].find("h = 1e-05"), std::string::npos) << g.warnings[0];

  cfg = portfolio(2, 2000, 0.999);
  EXPECT_TRUE(correlation_greeks_bump(cfg).warnings.empty());

  cfg = portfolio(2, 2000, 1.0);
  try {
    correlation_greeks_bump(cfg);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BumpBreaksPSD);
  }
}

TEST(BumpGreeks, SubsetLeavesOtherPairsEmpty) {
  auto cfg = portfolio(4, 2000);
  const std::vector<Pair> subset{{2, 1}};
  const auto part = bump_pairs(cfg, subset);
  const auto full = correlation_greeks_bump(cfg);
  EXPECT_EQ(part.mean(2, 1), full.mean(2, 1));
  EXPECT_EQ(part.mean(3, 0), 0.0);
}

// Smoothing bias on the price is below the Monte Carlo error.
TEST(Smoothing, PriceBiasBelowStatisticalError) {
  const auto cfg = portfolio(5, 100000);
  const auto c = cholesky_factorize(cfg.correlation);
  const auto m = make_marginals(cfg.hazards);
  const NthToDefaultPayout payout(cfg.contract);
  PathTape tape;
  std::vector<double> x_bar(5);
  std::vector<std::size_t> scratch;
  RunningStats sharp(1), smooth(1), diff(1);
  for (std::size_t p = 0; p < cfg.n_paths; ++p) {
    simulate_path(c, m, {cfg.seed, p}, tape);
    const double a = payout.sharp(tape.x, scratch);
    const double b = payout.smoothed(tape.x, x_bar, scratch);
    sharp.add(a);
    smooth.add(b);
    diff.add(b - a);
  }
  EXPECT_LT(std::abs(diff.mean()), sharp.standard_error());
  EXPECT_NEAR(sharp.mean(), price(cfg).value, 1e-12 * std::abs(sharp.mean()));
}

}  // namespace
}  // namespace corrisk
