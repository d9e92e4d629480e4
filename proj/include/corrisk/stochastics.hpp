#pragma once

// Random numbers, standard normal distribution functions and exponential
// default-time marginals.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include "corrisk/error.hpp"

namespace corrisk {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Block generate(Block ctr, Key key) {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Block round(const Block& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// One reproducible normal stream per (seed, stream_id).  The Philox key is
/// the seed and the counter carries the stream id plus a block index, so any
/// path can be regenerated independently of every other path.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// Fills `out` with i.i.d. standard normals (Box-Muller on 53-bit uniforms).
inline void sample_standard_normals(const RngStream& stream, std::span<double> out) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const Philox4x32::Key key{static_cast<std::uint32_t>(stream.seed),
                            static_cast<std::uint32_t>(stream.seed >> 32)};
  const auto id_lo = static_cast<std::uint32_t>(stream.stream_id);
  const auto id_hi = static_cast<std::uint32_t>(stream.stream_id >> 32);
  // (k + 0.5) 2^-53 lies strictly inside (0, 1).
  auto to_unit = [](std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  };

  std::uint32_t block = 0;
  for (std::size_t k = 0; k < out.size(); k += 2, ++block) {
    const auto w = Philox4x32::generate({block, 0u, id_lo, id_hi}, key);
    const double u1 = to_unit(w[0], w[1]);
    const double u2 = to_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = kTwoPi * u2;
    out[k] = r * std::cos(theta);
    if (k + 1 < out.size()) out[k + 1] = r * std::sin(theta);
  }
}

inline std::vector<double> sample_standard_normals(const RngStream& stream, std::size_t n) {
  std::vector<double> out(n);
  sample_standard_normals(stream, out);
  return out;
}

inline double normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5);
}

/// Acklam's rational approximation (relative error below 1.15e-9) followed
/// by one Halley step against the erfc-based cdf.
inline double inverse_normal_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    std::ostringstream msg;
    msg << "inverse_normal_cdf needs 0 < u < 1, got " << u;
    throw Error(ErrorCode::DomainError, msg.str());
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;

  double x;
  if (u < kLow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - kLow) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement; in the upper tail work with the complement to keep
  // the residual accurate.
  const double e = u > 0.5 ? (1.0 - u) - normal_cdf(-x) : normal_cdf(x) - u;
  const double step = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - step / (1.0 + 0.5 * x * step);
}

/// Exponential default-time marginal M(t) = 1 - exp(-hazard t).
class ExponentialMarginal {
 public:
  explicit ExponentialMarginal(double hazard) : hazard_(hazard) {
    if (!(hazard > 0.0 && std::isfinite(hazard))) {
      std::ostringstream msg;
      msg << "hazard must be positive, got " << hazard;
      throw Error(ErrorCode::NonPositiveHazard, msg.str());
    }
  }

  double hazard() const noexcept { return hazard_; }

  double cdf(double t) const { return t <= 0.0 ? 0.0 : -std::expm1(-hazard_ * t); }
  double pdf(double t) const { return t < 0.0 ? 0.0 : hazard_ * std::exp(-hazard_ * t); }

  double inverse(double u) const {
    if (!(u > 0.0 && u < 1.0)) {
      std::ostringstream msg;
      msg << "marginal inverse needs 0 < u < 1, got " << u;
      throw Error(ErrorCode::DomainError, msg.str());
    }
    return -std::log1p(-u) / hazard_;
  }

 private:
  double hazard_;
};

inline double marginal_inverse(const ExponentialMarginal& m, double u) { return m.inverse(u); }
inline double marginal_pdf(const ExponentialMarginal& m, double t) { return m.pdf(t); }

inline std::vector<ExponentialMarginal> make_marginals(std::span<const double> hazards) {
  std::vector<ExponentialMarginal> out;
  out.reserve(hazards.size());
  for (double h : hazards) out.emplace_back(h);
  return out;
}

}  // namespace corrisk
