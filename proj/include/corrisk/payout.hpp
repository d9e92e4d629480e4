#pragma once

// n-th to default basket default swap, from the protection buyer's side:
// protection leg minus premium leg, no accrued premium, flat discounting.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "corrisk/error.hpp"
#include "corrisk/stochastics.hpp"

namespace corrisk {

struct BasketDefaultSwap {
  std::size_t seniority = 1;           // n: protection triggers on the n-th default
  double maturity = 0.0;               // T
  std::vector<double> payment_times;   // T_1 < ... < T_M <= T
  std::vector<double> spreads;         // premium per payment, per unit notional
  std::vector<double> recoveries;      // one per name, in [0, 1]
  double discount_rate = 0.0;          // continuously compounded
  double smoothing_width = 0.0;        // epsilon of the smoothed indicators

  std::size_t names() const noexcept { return recoveries.size(); }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidContract, what); };
    const std::size_t n = names();
    if (n == 0) fail("at least one recovery rate is required");
    if (seniority < 1 || seniority > n) fail("seniority must lie in [1, number of names]");
    if (!(maturity > 0.0)) fail("maturity must be positive");
    if (spreads.size() != payment_times.size()) fail("spreads and payment_times differ in length");
    for (std::size_t k = 0; k < payment_times.size(); ++k) {
      if (!(payment_times[k] > 0.0)) fail("payment times must be positive");
      if (k > 0 && !(payment_times[k] > payment_times[k - 1]))
        fail("payment times must be strictly increasing");
      if (!std::isfinite(spreads[k])) fail("spreads must be finite");
    }
    if (!payment_times.empty() && payment_times.back() > maturity)
      fail("last payment falls after maturity");
    for (double r : recoveries)
      if (!(r >= 0.0 && r <= 1.0)) fail("recoveries must lie in [0, 1]");
    if (!std::isfinite(discount_rate)) fail("discount rate must be finite");
    if (!(smoothing_width > 0.0)) fail("smoothing width must be positive");
  }
};

/// 5% of the shortest gap in {0, T_1, ..., T_M}; 5% of maturity without a schedule.
inline double default_smoothing_width(std::span<const double> payment_times, double maturity) {
  if (payment_times.empty()) return 0.05 * maturity;
  double gap = payment_times.front();
  for (std::size_t k = 1; k < payment_times.size(); ++k)
    gap = std::min(gap, payment_times[k] - payment_times[k - 1]);
  return 0.05 * gap;
}

/// Regular schedule of `per_year` payments up to maturity, flat spread
/// quoted per annum.
inline BasketDefaultSwap make_regular_swap(std::size_t seniority, double maturity, int per_year,
                                           double annual_spread, std::vector<double> recoveries,
                                           double discount_rate) {
  BasketDefaultSwap s;
  s.seniority = seniority;
  s.maturity = maturity;
  const int count = static_cast<int>(std::floor(maturity * per_year + 1e-9));
  for (int k = 1; k <= count; ++k) {
    s.payment_times.push_back(static_cast<double>(k) / per_year);
    s.spreads.push_back(annual_spread / per_year);
  }
  s.recoveries = std::move(recoveries);
  s.discount_rate = discount_rate;
  s.smoothing_width = default_smoothing_width(s.payment_times, maturity);
  return s;
}

struct PayoutResult {
  double value = 0.0;
  std::vector<double> x_bar;  // dP/d tau_k
};

/// Payout evaluator with the discounted premium schedule precomputed.
class NthToDefaultPayout {
 public:
  // Beyond this many widths a smoothed indicator equals the sharp one to
  // below 1e-23.
  static constexpr double kSaturation = 10.0;

  explicit NthToDefaultPayout(BasketDefaultSwap contract) : c_(std::move(contract)) {
    c_.validate();
    const std::size_t m = c_.payment_times.size();
    discounted_.resize(m);
    prefix_.assign(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      discounted_[k] = c_.spreads[k] * std::exp(-c_.discount_rate * c_.payment_times[k]);
      prefix_[k + 1] = prefix_[k] + discounted_[k];
    }
  }

  const BasketDefaultSwap& contract() const noexcept { return c_; }
  std::size_t names() const noexcept { return c_.names(); }

  struct NthDefault {
    std::size_t index;
    double tau;
  };

  /// The seniority-th smallest default time; ties go to the lowest index.
  NthDefault nth_default(std::span<const double> tau, std::vector<std::size_t>& scratch) const {
    scratch.resize(tau.size());
    std::iota(scratch.begin(), scratch.end(), std::size_t{0});
    const auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(c_.seniority - 1);
    std::nth_element(scratch.begin(), nth, scratch.end(), [&](std::size_t a, std::size_t b) {
      return tau[a] < tau[b] || (tau[a] == tau[b] && a < b);
    });
    return {*nth, tau[*nth]};
  }

  double sharp(std::span<const double> tau, std::vector<std::size_t>& scratch) const {
    const auto [index, t] = nth_default(tau, scratch);
    const double protection =
        t <= c_.maturity ? (1.0 - c_.recoveries[index]) * std::exp(-c_.discount_rate * t) : 0.0;
    // coupons with T_k < tau are paid
    const auto paid = std::lower_bound(c_.payment_times.begin(), c_.payment_times.end(), t) -
                      c_.payment_times.begin();
    return protection - prefix_[static_cast<std::size_t>(paid)];
  }

  /// Smoothed payout; writes dP/d tau into x_bar (single nonzero entry).
  double smoothed(std::span<const double> tau, std::span<double> x_bar,
                  std::vector<std::size_t>& scratch) const {
    const auto [index, t] = nth_default(tau, scratch);
    const double eps = c_.smoothing_width;
    const double r = c_.discount_rate;
    const double lgd_df = (1.0 - c_.recoveries[index]) * std::exp(-r * t);

    double protection = 0.0;
    double d_protection = 0.0;
    const double a = (c_.maturity - t) / eps;
    if (a > kSaturation) {
      protection = lgd_df;
      d_protection = -r * lgd_df;
    } else if (a >= -kSaturation) {
      const double cdf = normal_cdf(a);
      protection = lgd_df * cdf;
      d_protection = lgd_df * (-r * cdf - normal_pdf(a) / eps);
    }

    const auto& times = c_.payment_times;
    const auto lo = static_cast<std::size_t>(
        std::lower_bound(times.begin(), times.end(), t - kSaturation * eps) - times.begin());
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(times.begin(), times.end(), t + kSaturation * eps) - times.begin());
    double premium = prefix_[lo];
    double d_premium = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double b = (t - times[k]) / eps;
      premium += discounted_[k] * normal_cdf(b);
      d_premium += discounted_[k] * normal_pdf(b) / eps;
    }

    std::fill(x_bar.begin(), x_bar.end(), 0.0);
    x_bar[index] = d_protection - d_premium;
    return protection - premium;
  }

 private:
  BasketDefaultSwap c_;
  std::vector<double> discounted_;  // s_k D(T_k)
  std::vector<double> prefix_;      // prefix_[k] = sum_{m<k} s_m D(T_m)
};

inline double evaluate_sharp(const BasketDefaultSwap& contract, std::span<const double> tau) {
  std::vector<std::size_t> scratch;
  return NthToDefaultPayout(contract).sharp(tau, scratch);
}

inline PayoutResult evaluate_smoothed(const BasketDefaultSwap& contract, std::span<const double> tau) {
  std::vector<std::size_t> scratch;
  PayoutResult out;
  out.x_bar.resize(tau.size());
  out.value = NthToDefaultPayout(contract).smoothed(tau, out.x_bar, scratch);
  return out;
}

}  // namespace corrisk
