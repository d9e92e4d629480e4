#pragma once

// Gaussian-copula path simulation with its tape, the adjoint sweep back to
// C-bar, and the forward (tangent) path sensitivity.

#include <algorithm>
#include <cassert>
#include <span>
#include <vector>

#include "corrisk/corelin.hpp"
#include "corrisk/stochastics.hpp"

namespace corrisk {

/// Uniforms are clamped into [kUniformFloor, 1 - kUniformFloor] so that the
/// marginal inverse stays finite.
inline constexpr double kUniformFloor = 1e-16;

/// Intermediate values of one path: independent normals z_tilde, correlated
/// normals z = C z_tilde, uniforms u = Phi(z) and default times x = M^-1(u).
struct PathTape {
  PathTape() = default;
  explicit PathTape(std::size_t n) : z_tilde(n), z(n), u(n), x(n) {}

  std::size_t size() const noexcept { return x.size(); }

  std::vector<double> z_tilde;
  std::vector<double> z;
  std::vector<double> u;
  std::vector<double> x;
  std::size_t clamped = 0;  // uniforms clamped on this path
};

struct PathAdjoint {
  PathAdjoint() = default;
  explicit PathAdjoint(std::size_t n) : x_bar(n), u_bar(n), z_bar(n), c_bar(n) {}

  std::vector<double> x_bar;
  std::vector<double> u_bar;
  std::vector<double> z_bar;
  LowerTriangularSeed c_bar;
};

/// Forward sweep for one path.  `tape` is overwritten and may be reused
/// across paths.
inline void simulate_path(const CholeskyFactor& c, std::span<const ExponentialMarginal> marginals,
                          const RngStream& stream, PathTape& tape) {
  const std::size_t n = c.size();
  assert(marginals.size() == n);
  if (tape.size() != n) tape = PathTape(n);

  sample_standard_normals(stream, tape.z_tilde);
  c.multiply(tape.z_tilde, tape.z);
  tape.clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double u = normal_cdf(tape.z[i]);
    if (u < kUniformFloor || u > 1.0 - kUniformFloor) {
      u = std::clamp(u, kUniformFloor, 1.0 - kUniformFloor);
      ++tape.clamped;
    }
    tape.u[i] = u;
    tape.x[i] = marginals[i].inverse(u);
  }
}

inline PathTape simulate_path(const CholeskyFactor& c, std::span<const ExponentialMarginal> marginals,
                              const RngStream& stream) {
  PathTape tape(c.size());
  simulate_path(c, marginals, stream, tape);
  return tape;
}

/// Backward sweep from x-bar = dP/dX to C-bar = z-bar z_tilde^T (lower part).
inline void adjoint_sweep(const PathTape& tape, const CholeskyFactor& c,
                          std::span<const ExponentialMarginal> marginals,
                          std::span<const double> x_bar, PathAdjoint& out) {
  const std::size_t n = tape.size();
  assert(c.size() == n && marginals.size() == n && x_bar.size() == n);
  (void)c;
  if (out.x_bar.size() != n) out = PathAdjoint(n);

  for (std::size_t k = 0; k < n; ++k) {
    out.x_bar[k] = x_bar[k];
    out.u_bar[k] = x_bar[k] / marginals[k].pdf(tape.x[k]);
    out.z_bar[k] = out.u_bar[k] * normal_pdf(tape.z[k]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.c_bar.row(i);
    for (std::size_t j = 0; j <= i; ++j) row[j] = out.z_bar[i] * tape.z_tilde[j];
  }
}

inline PathAdjoint adjoint_sweep(const PathTape& tape, const CholeskyFactor& c,
                                 std::span<const ExponentialMarginal> marginals,
                                 std::span<const double> x_bar) {
  PathAdjoint out(tape.size());
  adjoint_sweep(tape, c, marginals, x_bar, out);
  return out;
}

/// Adds this path's C-bar into `sum` without materializing it.  Names with
/// a zero payout adjoint contribute nothing and are skipped.
inline void accumulate_cbar(const PathTape& tape, std::span<const ExponentialMarginal> marginals,
                            std::span<const double> x_bar, LowerTriangular& sum) {
  const std::size_t n = tape.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (x_bar[i] == 0.0) continue;
    const double z_bar = x_bar[i] / marginals[i].pdf(tape.x[i]) * normal_pdf(tape.z[i]);
    auto row = sum.row(i);
    for (std::size_t j = 0; j <= i; ++j) row[j] += z_bar * tape.z_tilde[j];
  }
}

/// x-dot for the tangent direction c_dot: phi(z_i) (c_dot z_tilde)_i / m_i(x_i).
inline void forward_path_sensitivity(const PathTape& tape,
                                     std::span<const ExponentialMarginal> marginals,
                                     const LowerTriangularSeed& c_dot, std::span<double> x_dot) {
  const std::size_t n = tape.size();
  assert(c_dot.size() == n && x_dot.size() == n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = c_dot.row(i);
    double z_dot = 0.0;
    for (std::size_t k = 0; k <= i; ++k) z_dot += row[k] * tape.z_tilde[k];
    const double u_dot = normal_pdf(tape.z[i]) * z_dot;
    x_dot[i] = u_dot / marginals[i].pdf(tape.x[i]);
  }
}

inline std::vector<double> forward_path_sensitivity(const PathTape& tape,
                                                    std::span<const ExponentialMarginal> marginals,
                                                    const LowerTriangularSeed& c_dot) {
  std::vector<double> x_dot(tape.size());
  forward_path_sensitivity(tape, marginals, c_dot, x_dot);
  return x_dot;
}

}  // namespace corrisk
