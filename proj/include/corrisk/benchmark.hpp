#pragma once

// Cost-ratio harness: wall time of value plus all correlation Greeks over the
// wall time of the value alone, per basket size and method.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "corrisk/greeks.hpp"

namespace corrisk {

struct Timing {
  double median = 0.0;
  double cv = 0.0;  // coefficient of variation across repeats
  std::vector<double> samples;
};

namespace detail {

inline Timing summarize(std::vector<double> samples) {
  Timing t;
  t.samples = samples;
  std::sort(samples.begin(), samples.end());
  const std::size_t m = samples.size();
  t.median = m % 2 ? samples[m / 2] : 0.5 * (samples[m / 2 - 1] + samples[m / 2]);
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(m);
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  t.cv = m > 1 && mean > 0.0 ? std::sqrt(var / static_cast<double>(m - 1)) / mean : 0.0;
  return t;
}

}  // namespace detail

/// Median wall times of several workloads over `repeats` rounds, after one
/// discarded warm-up round.  Each round runs every workload once, so slow
/// drifts in machine speed hit all of them alike.
inline std::vector<Timing> time_interleaved(const std::vector<std::function<void()>>& fs, int repeats = 3,
                                            bool warm_up = true) {
  using clock = std::chrono::steady_clock;
  if (warm_up)
    for (const auto& f : fs) f();
  std::vector<std::vector<double>> samples(fs.size());
  for (int r = 0; r < std::max(1, repeats); ++r) {
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const auto start = clock::now();
      fs[k]();
      samples[k].push_back(std::chrono::duration<double>(clock::now() - start).count());
    }
  }
  std::vector<Timing> out;
  for (auto& s : samples) out.push_back(detail::summarize(std::move(s)));
  return out;
}

inline Timing time_median(const std::function<void()>& f, int repeats = 3, bool warm_up = true) {
  return time_interleaved({f}, repeats, warm_up).front();
}

struct BenchmarkOptions {
  int repeats = 3;
  bool warm_up = true;
  // Number of bumped pairs actually timed; 0 times all of them.  Every
  // bumped revaluation is the same workload, so the remaining pairs are
  // extrapolated from the mean time per revaluation.
  std::size_t bump_sample = 0;
  double max_cv = 0.2;
};

struct BenchmarkRow {
  std::size_t n_names = 0;
  Method method = Method::aad_binned;
  double ratio = 0.0;
  double seconds_value = 0.0;
  double seconds_total = 0.0;
  bool unstable = false;
  std::size_t pairs_timed = 0;
};

/// Evenly spread subset of the pairs of an n-name basket.
inline std::vector<Pair> sample_pairs(std::size_t n, std::size_t count) {
  const auto pairs = all_pairs(n);
  if (count == 0 || count >= pairs.size()) return pairs;
  std::vector<Pair> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(pairs[k * pairs.size() / count]);
  return out;
}

/// Times one method together with the plain valuation it is compared to.
inline BenchmarkRow benchmark_method(EngineConfig config, Method method, const BenchmarkOptions& opt) {
  config.method = method;
  BenchmarkRow row;
  row.n_names = config.n_names();
  row.method = method;
  const auto value = [&] { (void)price(config); };

  const std::size_t n_pairs = pair_count(config.n_names());
  std::vector<Timing> t;
  if (method == Method::bump && opt.bump_sample != 0 && opt.bump_sample < n_pairs) {
    // The sampled run holds K + 1 revaluations (base plus K bumps); the
    // value is timed over as many back-to-back runs so both measurements
    // span the same stretch of wall time.
    const auto pairs = sample_pairs(config.n_names(), opt.bump_sample);
    const std::size_t runs = pairs.size() + 1;
    row.pairs_timed = pairs.size();
    t = time_interleaved({[&] {
                            for (std::size_t r = 0; r < runs; ++r) value();
                          },
                          [&] { (void)bump_pairs(config, pairs); }},
                         opt.repeats, opt.warm_up);
    const double per_run = 1.0 / static_cast<double>(runs);
    t[0].median *= per_run;
    row.seconds_total = t[1].median * per_run * static_cast<double>(n_pairs + 1);
  } else {
    row.pairs_timed = n_pairs;
    t = time_interleaved({value, [&] { (void)correlation_greeks(config); }}, opt.repeats, opt.warm_up);
    row.seconds_total = t[1].median;
  }
  row.seconds_value = t[0].median;
  for (const auto& x : t) row.unstable = row.unstable || x.cv > opt.max_cv;
  row.ratio = row.seconds_total / row.seconds_value;
  return row;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace corrisk
