#pragma once

// Monte Carlo price and the correlation Greeks engines: bump-and-revalue,
// forward-mode pathwise, and adjoint pathwise with per-path or binned
// conversion of C-bar into rho-bar.
//
// Paths are processed in fixed blocks of path indices and every per-block
// result is reduced in block order, so each engine is bitwise reproducible
// for a given seed regardless of the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "corrisk/copula.hpp"
#include "corrisk/corelin.hpp"
#include "corrisk/error.hpp"
#include "corrisk/parallel.hpp"
#include "corrisk/payout.hpp"
#include "corrisk/stochastics.hpp"

namespace corrisk {

enum class Method { bump, forward, aad_per_path, aad_binned };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::bump: return "bump";
    case Method::forward: return "forward";
    case Method::aad_per_path: return "aad-per-path";
    case Method::aad_binned: return "aad-binned";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::bump, Method::forward, Method::aad_per_path, Method::aad_binned})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

struct EngineConfig {
  CorrelationMatrix correlation;
  std::vector<double> hazards;  // per unit time, one per name
  BasketDefaultSwap contract;
  std::size_t n_paths = 100000;
  std::size_t n_bins = 20;
  std::uint64_t seed = 0;
  Method method = Method::aad_binned;
  double bump_size = 1e-4;
  unsigned threads = 1;

  std::size_t n_names() const noexcept { return correlation.size(); }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    const std::size_t n = n_names();
    if (n == 0) fail("correlation matrix is empty");
    if (hazards.size() != n) fail("hazards must have one entry per name");
    for (double h : hazards)
      if (!(h > 0.0 && std::isfinite(h))) throw Error(ErrorCode::NonPositiveHazard, "hazards must be positive");
    if (contract.names() != n) fail("recoveries must have one entry per name");
    contract.validate();
    if (n_paths < 2) fail("n_paths must be at least 2");
    if (n_bins < 1 || n_bins > n_paths) fail("n_bins must lie in [1, n_paths]");
    if (!(bump_size > 0.0)) fail("bump_size must be positive");
  }
};

/// Monte Carlo value with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Running sum of per-path C-bar for one bin.
struct BinAccumulator {
  BinAccumulator() = default;
  explicit BinAccumulator(std::size_t n) : sum_cbar(n) {}

  LowerTriangular sum_cbar;
  std::size_t count = 0;
};

struct GreeksEstimate {
  Method method = Method::aad_binned;
  CorrelationGradient mean;
  std::optional<CorrelationGradient> std_error;  // present when n_bins >= 2
  std::size_t n_bins = 0;
  std::size_t n_paths = 0;
  Estimate price;
  std::size_t clamped_uniforms = 0;
  std::vector<std::string> warnings;

  const CorrelationGradient& standard_error() const {
    if (!std_error) throw Error(ErrorCode::NBinsTooSmall, "standard errors need at least two bins");
    return *std_error;
  }
};

namespace detail {

inline constexpr std::size_t kBlockPaths = 1024;

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// Immutable per-run state shared by all workers.
struct Model {
  explicit Model(const EngineConfig& config)
      : factor(cholesky_factorize(config.correlation)),
        marginals(make_marginals(config.hazards)),
        payout(config.contract),
        seed(config.seed) {}

  CholeskyFactor factor;
  std::vector<ExponentialMarginal> marginals;
  NthToDefaultPayout payout;
  std::uint64_t seed;
};

/// Per-worker scratch.
struct Workspace {
  explicit Workspace(std::size_t n) : tape(n), x_bar(n) {}
  PathTape tape;
  std::vector<double> x_bar;
  std::vector<std::size_t> order;
};

inline GreeksEstimate finish(Method method, const RunningStats& stats, std::size_t n) {
  GreeksEstimate out;
  out.method = method;
  out.n_bins = stats.count();
  out.mean = CorrelationGradient(n);
  std::copy(stats.means().begin(), stats.means().end(), out.mean.values().begin());
  if (stats.count() >= 2) {
    CorrelationGradient se(n);
    for (std::size_t k = 0; k < se.pairs(); ++k) se.values()[k] = stats.standard_error(k);
    out.std_error = std::move(se);
  }
  return out;
}

inline Estimate to_estimate(const RunningStats& s) { return {s.mean(), s.standard_error(), s.count()}; }

}  // namespace detail

/// Plain Monte Carlo value of the sharp payout.
inline Estimate price(const EngineConfig& config) {
  config.validate();
  const detail::Model model(config);
  const std::size_t n = config.n_names();
  const std::size_t blocks = detail::ceil_div(config.n_paths, detail::kBlockPaths);
  std::vector<RunningStats> partial(blocks, RunningStats(1));

  parallel_for(blocks, config.threads, [&](std::size_t b) {
    detail::Workspace ws(n);
    const std::size_t end = std::min(config.n_paths, (b + 1) * detail::kBlockPaths);
    for (std::size_t p = b * detail::kBlockPaths; p < end; ++p) {
      simulate_path(model.factor, model.marginals, {model.seed, p}, ws.tape);
      partial[b].add(model.payout.sharp(ws.tape.x, ws.order));
    }
  });

  RunningStats total(1);
  for (const auto& s : partial) total.merge(s);
  return detail::to_estimate(total);
}

/// Converts each bin's mean C-bar to rho-bar and combines the bin estimates.
inline GreeksEstimate combine_bins(std::span<const BinAccumulator> bins, const CholeskyFactor& c,
                                   unsigned threads = 1) {
  if (bins.empty()) throw Error(ErrorCode::NBinsTooSmall, "no bins to combine");
  const std::size_t n = c.size();
  for (const auto& b : bins) {
    if (b.count != bins.front().count || b.count == 0)
      throw Error(ErrorCode::UnequalBins, "bins must hold the same positive number of paths");
    if (b.sum_cbar.size() != n) throw Error(ErrorCode::DomainError, "bin dimension mismatch");
  }

  std::vector<CorrelationGradient> per_bin(bins.size());
  parallel_for(bins.size(), threads, [&](std::size_t b) {
    LowerTriangular work = bins[b].sum_cbar;
    work *= 1.0 / static_cast<double>(bins[b].count);
    per_bin[b] = CorrelationGradient(n);
    cholesky_adjoint_into(c, work, per_bin[b]);
  });

  RunningStats stats(pair_count(n));
  for (const auto& g : per_bin) stats.add(g.values());
  auto out = detail::finish(Method::aad_binned, stats, n);
  out.n_paths = bins.front().count * bins.size();
  return out;
}

/// Adjoint pathwise correlation Greeks.  aad_per_path converts every path's
/// C-bar; aad_binned converts one averaged C-bar per bin.
inline GreeksEstimate correlation_greeks_aad(const EngineConfig& config) {
  config.validate();
  if (config.method != Method::aad_binned && config.method != Method::aad_per_path)
    throw Error(ErrorCode::InvalidConfig, "correlation_greeks_aad needs an aad method");
  const detail::Model model(config);
  const auto& c = model.factor;
  detail::require_differentiable(c);
  const std::size_t n = config.n_names();
  const std::size_t n_pairs = pair_count(n);

  const std::size_t n_bins = config.method == Method::aad_per_path ? config.n_paths : config.n_bins;
  const std::size_t bin_size = config.n_paths / n_bins;
  const std::size_t n_eff = bin_size * n_bins;

  GreeksEstimate out;
  RunningStats price_stats(1);
  std::size_t clamped = 0;

  if (bin_size >= detail::kBlockPaths) {
    // Large bins: accumulate C-bar over sub-blocks, then convert per bin.
    const std::size_t per_bin = detail::ceil_div(bin_size, detail::kBlockPaths);
    const std::size_t items = per_bin * n_bins;
    std::vector<LowerTriangular> partial(items, LowerTriangular(n));
    std::vector<RunningStats> prices(items, RunningStats(1));
    std::vector<std::size_t> clamps(items, 0);
    parallel_for(items, config.threads, [&](std::size_t item) {
      detail::Workspace ws(n);
      const std::size_t bin = item / per_bin;
      const std::size_t begin = bin * bin_size + (item % per_bin) * detail::kBlockPaths;
      const std::size_t end = std::min((bin + 1) * bin_size, begin + detail::kBlockPaths);
      for (std::size_t p = begin; p < end; ++p) {
        simulate_path(c, model.marginals, {model.seed, p}, ws.tape);
        clamps[item] += ws.tape.clamped;
        prices[item].add(model.payout.sharp(ws.tape.x, ws.order));
        model.payout.smoothed(ws.tape.x, ws.x_bar, ws.order);
        accumulate_cbar(ws.tape, model.marginals, ws.x_bar, partial[item]);
      }
    });
    std::vector<BinAccumulator> bins(n_bins, BinAccumulator(n));
    for (std::size_t item = 0; item < items; ++item) {
      auto& bin = bins[item / per_bin];
      bin.sum_cbar += partial[item];
      price_stats.merge(prices[item]);
      clamped += clamps[item];
    }
    for (auto& b : bins) b.count = bin_size;
    out = combine_bins(bins, c, config.threads);
  } else {
    // Small bins: each work item owns whole bins and converts them in place.
    const std::size_t bins_per_item = std::max<std::size_t>(1, detail::kBlockPaths / bin_size);
    const std::size_t items = detail::ceil_div(n_bins, bins_per_item);
    std::vector<RunningStats> partial(items, RunningStats(n_pairs));
    std::vector<RunningStats> prices(items, RunningStats(1));
    std::vector<std::size_t> clamps(items, 0);
    const double inv_size = 1.0 / static_cast<double>(bin_size);
    parallel_for(items, config.threads, [&](std::size_t item) {
      detail::Workspace ws(n);
      LowerTriangular cbar(n);
      CorrelationGradient rho_bar(n);
      const std::size_t first = item * bins_per_item;
      const std::size_t last = std::min(n_bins, first + bins_per_item);
      for (std::size_t bin = first; bin < last; ++bin) {
        cbar.fill(0.0);
        for (std::size_t p = bin * bin_size; p < (bin + 1) * bin_size; ++p) {
          simulate_path(c, model.marginals, {model.seed, p}, ws.tape);
          clamps[item] += ws.tape.clamped;
          prices[item].add(model.payout.sharp(ws.tape.x, ws.order));
          model.payout.smoothed(ws.tape.x, ws.x_bar, ws.order);
          accumulate_cbar(ws.tape, model.marginals, ws.x_bar, cbar);
        }
        if (bin_size > 1) cbar *= inv_size;
        cholesky_adjoint_into(c, cbar, rho_bar);
        partial[item].add(rho_bar.values());
      }
    });
    RunningStats stats(n_pairs);
    for (std::size_t item = 0; item < items; ++item) {
      stats.merge(partial[item]);
      price_stats.merge(prices[item]);
      clamped += clamps[item];
    }
    out = detail::finish(config.method, stats, n);
    out.n_paths = n_eff;
  }

  out.method = config.method;
  out.price = detail::to_estimate(price_stats);
  out.clamped_uniforms = clamped;
  if (n_eff != config.n_paths) {
    std::ostringstream msg;
    msg << "n_paths " << config.n_paths << " is not a multiple of n_bins " << n_bins
        << "; using the first " << n_eff << " paths";
    out.warnings.push_back(msg.str());
  }
  return out;
}

/// Forward-mode pathwise Greeks: one tangent sweep per pair on every path.
inline GreeksEstimate correlation_greeks_forward(const EngineConfig& config) {
  config.validate();
  const detail::Model model(config);
  const auto& c = model.factor;
  detail::require_differentiable(c);
  const std::size_t n = config.n_names();
  const auto pairs = all_pairs(n);

  std::vector<LowerTriangularSeed> c_dot(pairs.size());
  parallel_for(pairs.size(), config.threads,
               [&](std::size_t k) { c_dot[k] = cholesky_tangent(config.correlation, c, pairs[k]); });

  const std::size_t blocks = detail::ceil_div(config.n_paths, detail::kBlockPaths);
  std::vector<RunningStats> partial(blocks, RunningStats(pairs.size()));
  std::vector<RunningStats> prices(blocks, RunningStats(1));
  std::vector<std::size_t> clamps(blocks, 0);
  parallel_for(blocks, config.threads, [&](std::size_t b) {
    detail::Workspace ws(n);
    std::vector<double> x_dot(n);
    std::vector<double> p_dot(pairs.size());
    const std::size_t end = std::min(config.n_paths, (b + 1) * detail::kBlockPaths);
    for (std::size_t p = b * detail::kBlockPaths; p < end; ++p) {
      simulate_path(c, model.marginals, {model.seed, p}, ws.tape);
      clamps[b] += ws.tape.clamped;
      prices[b].add(model.payout.sharp(ws.tape.x, ws.order));
      model.payout.smoothed(ws.tape.x, ws.x_bar, ws.order);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        forward_path_sensitivity(ws.tape, model.marginals, c_dot[k], x_dot);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += ws.x_bar[i] * x_dot[i];
        p_dot[k] = s;
      }
      partial[b].add(p_dot);
    }
  });

  RunningStats stats(pairs.size());
  RunningStats price_stats(1);
  std::size_t clamped = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    stats.merge(partial[b]);
    price_stats.merge(prices[b]);
    clamped += clamps[b];
  }
  auto out = detail::finish(Method::forward, stats, n);
  out.n_paths = config.n_paths;
  out.price = detail::to_estimate(price_stats);
  out.clamped_uniforms = clamped;
  return out;
}

namespace detail {

/// Smoothed payouts on the unbumped model, kept per path for common random
/// number differencing.
struct BumpBase {
  std::vector<double> payouts;
  Estimate price;
};

inline BumpBase bump_base(const EngineConfig& config, const Model& model) {
  const std::size_t n = config.n_names();
  const std::size_t blocks = ceil_div(config.n_paths, kBlockPaths);
  BumpBase base;
  base.payouts.resize(config.n_paths);
  std::vector<RunningStats> prices(blocks, RunningStats(1));
  parallel_for(blocks, config.threads, [&](std::size_t b) {
    Workspace ws(n);
    const std::size_t end = std::min(config.n_paths, (b + 1) * kBlockPaths);
    for (std::size_t p = b * kBlockPaths; p < end; ++p) {
      simulate_path(model.factor, model.marginals, {model.seed, p}, ws.tape);
      prices[b].add(model.payout.sharp(ws.tape.x, ws.order));
      base.payouts[p] = model.payout.smoothed(ws.tape.x, ws.x_bar, ws.order);
    }
  });
  RunningStats total(1);
  for (const auto& s : prices) total.merge(s);
  base.price = to_estimate(total);
  return base;
}

struct BumpedPair {
  RunningStats stats{1};
  double h = 0.0;
};

/// One-sided difference for one pair.  The bump is shrunk by 10x up to
/// three times when it leaves the PSD cone or the [-1, 1] range.
inline BumpedPair bump_one(const EngineConfig& config, const Model& model, const BumpBase& base,
                           Pair pair) {
  const std::size_t n = config.n_names();
  std::optional<CorrelationMatrix> bumped;
  double h = config.bump_size;
  for (int attempt = 0; attempt < 4; ++attempt, h /= 10.0) {
    try {
      bumped = bump_pair(config.correlation, pair, h);
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPositiveSemidefinite && e.code() != ErrorCode::EntryOutOfRange) throw;
    }
  }
  if (!bumped) {
    std::ostringstream msg;
    msg << "bumping pair (" << pair.i << ", " << pair.j << ") leaves the valid set even at h = "
        << config.bump_size / 1000.0;
    throw Error(ErrorCode::BumpBreaksPSD, msg.str());
  }
  const CholeskyFactor factor = cholesky_factorize(*bumped);
  const std::size_t blocks = ceil_div(config.n_paths, kBlockPaths);
  std::vector<RunningStats> partial(blocks, RunningStats(1));
  const double inv_h = 1.0 / h;
  parallel_for(blocks, config.threads, [&](std::size_t b) {
    Workspace ws(n);
    const std::size_t end = std::min(config.n_paths, (b + 1) * kBlockPaths);
    for (std::size_t p = b * kBlockPaths; p < end; ++p) {
      simulate_path(factor, model.marginals, {model.seed, p}, ws.tape);
      const double v = model.payout.smoothed(ws.tape.x, ws.x_bar, ws.order);
      partial[b].add((v - base.payouts[p]) * inv_h);
    }
  });
  BumpedPair out;
  out.h = h;
  for (const auto& s : partial) out.stats.merge(s);
  return out;
}

}  // namespace detail

/// Bump-and-revalue Greeks restricted to `pairs`; entries for other pairs
/// are left at zero.  Standard errors come from per-path differences.
inline GreeksEstimate bump_pairs(const EngineConfig& config, std::span<const Pair> pairs) {
  config.validate();
  const detail::Model model(config);
  const std::size_t n = config.n_names();
  const auto base = detail::bump_base(config, model);

  GreeksEstimate out;
  out.method = Method::bump;
  out.mean = CorrelationGradient(n);
  CorrelationGradient se(n);
  for (const Pair& p : pairs) {
    const auto r = detail::bump_one(config, model, base, p);
    out.mean[p] = r.stats.mean();
    se[p] = r.stats.standard_error();
    if (r.h != config.bump_size) {
      std::ostringstream msg;
      msg << "pair (" << p.i << ", " << p.j << ") bumped with h = " << r.h;
      out.warnings.push_back(msg.str());
    }
  }
  out.std_error = std::move(se);
  out.n_bins = config.n_paths;
  out.n_paths = config.n_paths;
  out.price = base.price;
  return out;
}

inline GreeksEstimate correlation_greeks_bump(const EngineConfig& config) {
  const auto pairs = all_pairs(config.n_names());
  return bump_pairs(config, pairs);
}

/// Dispatches on config.method.
inline GreeksEstimate correlation_greeks(const EngineConfig& config) {
  switch (config.method) {
    case Method::bump: return correlation_greeks_bump(config);
    case Method::forward: return correlation_greeks_forward(config);
    case Method::aad_per_path:
    case Method::aad_binned: return correlation_greeks_aad(config);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown method");
}

}  // namespace corrisk
