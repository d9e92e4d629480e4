#pragma once

// Dense correlation-matrix linear algebra: Cholesky factorization together
// with its tangent (forward) and adjoint (reverse) derivatives.
//
// All triangular objects use packed row-major lower storage, so row i is the
// contiguous range [i(i+1)/2, i(i+1)/2 + i].  Pair sensitivities are indexed
// by strictly-lower (i, j), i > j, zero-based; rho(i, j) and rho(j, i) move
// together as a single parameter.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "corrisk/error.hpp"

namespace corrisk {

struct Pair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const Pair&, const Pair&) = default;
};

constexpr std::size_t pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

constexpr std::size_t pair_index(Pair p) { return p.i * (p.i - 1) / 2 + p.j; }

inline Pair pair_at(std::size_t index) {
  std::size_t i = 1;
  while (i * (i + 1) / 2 <= index) ++i;
  return {i, index - i * (i - 1) / 2};
}

inline std::vector<Pair> all_pairs(std::size_t n) {
  std::vector<Pair> out;
  out.reserve(pair_count(n));
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) out.push_back({i, j});
  return out;
}

/// Counts floating-point operations in the factorization kernels.
struct OpCounter {
  std::uint64_t flops = 0;
};

/// Packed lower-triangular matrix, diagonal included.  Doubles as the seed
/// type for adjoint (C-bar) and tangent (C-dot) propagation.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(std::size_t n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

  std::size_t size() const noexcept { return n_; }

  double& operator()(std::size_t i, std::size_t j) {
    assert(j <= i && i < n_);
    return data_[i * (i + 1) / 2 + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(j <= i && i < n_);
    return data_[i * (i + 1) / 2 + j];
  }
  // Full-matrix view: strictly upper entries read as zero.
  double at(std::size_t i, std::size_t j) const { return j > i ? 0.0 : (*this)(i, j); }

  std::span<double> row(std::size_t i) { return {data_.data() + i * (i + 1) / 2, i + 1}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * (i + 1) / 2, i + 1};
  }

  std::span<double> packed() noexcept { return data_; }
  std::span<const double> packed() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  LowerTriangular& operator+=(const LowerTriangular& o) {
    assert(o.n_ == n_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  LowerTriangular& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const LowerTriangular&, const LowerTriangular&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

using LowerTriangularSeed = LowerTriangular;

/// Frobenius inner product of two lower-triangular matrices.
inline double inner(const LowerTriangular& a, const LowerTriangular& b) {
  assert(a.size() == b.size());
  const auto pa = a.packed();
  const auto pb = b.packed();
  double s = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) s += pa[k] * pb[k];
  return s;
}

/// Values for the n(n-1)/2 strictly-lower pairs.
class CorrelationGradient {
 public:
  CorrelationGradient() = default;
  explicit CorrelationGradient(std::size_t n) : n_(n), values_(pair_count(n), 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t pairs() const noexcept { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[pair_index({i, j})]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[pair_index({i, j})]; }
  double& operator[](Pair p) { return values_[pair_index(p)]; }
  double operator[](Pair p) const { return values_[pair_index(p)]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const CorrelationGradient&, const CorrelationGradient&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

namespace detail {

inline constexpr double kDiagonalTolerance = 1e-12;
inline constexpr double kPivotTolerance = 1e-12;
// Below this, a diagonal of C makes the derivative of the factorization undefined.
inline constexpr double kSingularDiagonal = 1e-14;
// Residual allowed under a zero pivot before the matrix is declared indefinite.
inline constexpr double kSemidefiniteResidual = 1e-8;

// Row-oriented (Cholesky-Banachiewicz) factorization of the lower triangle.
inline LowerTriangular factorize_lower(const LowerTriangular& a, double& min_pivot,
                                       OpCounter* counter) {
  const std::size_t n = a.size();
  LowerTriangular c(n);
  min_pivot = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    auto ci = c.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      auto cj = c.row(j);
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= ci[k] * cj[k];
      if (counter) counter->flops += 2 * j + 1;
      if (i == j) {
        min_pivot = std::min(min_pivot, s);
        if (s < -kPivotTolerance) {
          std::ostringstream msg;
          msg << "pivot " << s << " at row " << i;
          throw Error(ErrorCode::NotPositiveSemidefinite, msg.str());
        }
        ci[i] = s > 0.0 ? std::sqrt(s) : 0.0;
      } else if (cj[j] > 0.0) {
        ci[j] = s / cj[j];
      } else {
        if (std::abs(s) > kSemidefiniteResidual) {
          std::ostringstream msg;
          msg << "nonzero residual " << s << " under zero pivot at (" << i << ", " << j << ")";
          throw Error(ErrorCode::NotPositiveSemidefinite, msg.str());
        }
        ci[j] = 0.0;
      }
    }
  }
  return c;
}

}  // namespace detail

class CorrelationMatrix;
class CholeskyFactor;
inline CorrelationMatrix validate_correlation(const std::vector<std::vector<double>>& m);
inline CorrelationMatrix validate_correlation(const LowerTriangular& lower);
inline CholeskyFactor cholesky_factorize(const CorrelationMatrix& rho, OpCounter* counter = nullptr);

/// Symmetric unit-diagonal positive semidefinite matrix.  Only obtainable
/// through validation, so holding one implies the invariants hold.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;

  std::size_t size() const noexcept { return lower_.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return j > i ? lower_(j, i) : lower_(i, j);
  }
  const LowerTriangular& lower() const noexcept { return lower_; }

  std::vector<std::vector<double>> dense() const {
    const std::size_t n = size();
    std::vector<std::vector<double>> out(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i][j] = (*this)(i, j);
    return out;
  }

  static CorrelationMatrix identity(std::size_t n) { return uniform(n, 0.0); }

  /// Equicorrelated matrix: every off-diagonal entry equals rho.
  static CorrelationMatrix uniform(std::size_t n, double rho) {
    LowerTriangular l(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) l(i, j) = i == j ? 1.0 : rho;
    return validate_correlation(l);
  }

  friend bool operator==(const CorrelationMatrix&, const CorrelationMatrix&) = default;

 private:
  explicit CorrelationMatrix(LowerTriangular lower) : lower_(std::move(lower)) {}
  friend CorrelationMatrix validate_correlation(const LowerTriangular& lower);

  LowerTriangular lower_;
};

/// Lower-triangular C with C C^T = rho.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  std::size_t size() const noexcept { return c_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return c_(i, j); }
  double at(std::size_t i, std::size_t j) const { return c_.at(i, j); }
  std::span<const double> row(std::size_t i) const { return c_.row(i); }
  const LowerTriangular& lower() const noexcept { return c_; }
  double min_pivot() const noexcept { return min_pivot_; }

  /// True when every diagonal entry is large enough to differentiate through.
  bool strictly_positive() const {
    for (std::size_t i = 0; i < size(); ++i)
      if (!(c_(i, i) > detail::kSingularDiagonal)) return false;
    return true;
  }

  /// y = C x.
  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < size(); ++i) {
      const auto ci = c_.row(i);
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += ci[k] * x[k];
      y[i] = s;
    }
  }

 private:
  CholeskyFactor(LowerTriangular c, double min_pivot) : c_(std::move(c)), min_pivot_(min_pivot) {}
  friend CholeskyFactor cholesky_factorize(const CorrelationMatrix&, OpCounter*);

  LowerTriangular c_;
  double min_pivot_ = 0.0;
};

inline CorrelationMatrix validate_correlation(const LowerTriangular& lower) {
  const std::size_t n = lower.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(std::abs(lower(i, i) - 1.0) <= detail::kDiagonalTolerance)) {
      std::ostringstream msg;
      msg << "diagonal entry " << i << " is " << lower(i, i);
      throw Error(ErrorCode::DiagonalNotOne, msg.str());
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (!(std::abs(lower(i, j)) <= 1.0)) {
        std::ostringstream msg;
        msg << "entry (" << i << ", " << j << ") is " << lower(i, j);
        throw Error(ErrorCode::EntryOutOfRange, msg.str());
      }
    }
  }
  LowerTriangular stored = lower;
  for (std::size_t i = 0; i < n; ++i) stored(i, i) = 1.0;
  double min_pivot = 0.0;
  detail::factorize_lower(stored, min_pivot, nullptr);
  return CorrelationMatrix(std::move(stored));
}

/// Validates a dense matrix.  Symmetry is enforced by reading the lower
/// triangle only.
inline CorrelationMatrix validate_correlation(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  for (const auto& r : m) {
    if (r.size() != n) throw Error(ErrorCode::NotSquare, "rows must all have length " + std::to_string(n));
  }
  LowerTriangular l(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) l(i, j) = m[i][j];
  return validate_correlation(l);
}

inline CholeskyFactor cholesky_factorize(const CorrelationMatrix& rho, OpCounter* counter) {
  double min_pivot = 0.0;
  auto c = detail::factorize_lower(rho.lower(), min_pivot, counter);
  return CholeskyFactor(std::move(c), min_pivot);
}

namespace detail {

inline void require_differentiable(const CholeskyFactor& c) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c(i, i) > kSingularDiagonal)) {
      std::ostringstream msg;
      msg << "diagonal C(" << i << ", " << i << ") = " << c(i, i);
      throw Error(ErrorCode::SingularPivot, msg.str());
    }
  }
}

}  // namespace detail

/// dC/d rho(i, j) by forward differentiation of the factorization loop.
inline LowerTriangularSeed cholesky_tangent(const CorrelationMatrix& rho, const CholeskyFactor& c,
                                            Pair pair) {
  const std::size_t n = c.size();
  assert(rho.size() == n);
  (void)rho;
  if (!(pair.i > pair.j && pair.i < n)) throw Error(ErrorCode::DomainError, "pair must satisfy n > i > j");
  detail::require_differentiable(c);

  LowerTriangular dot(n);
  // Rows above pair.i do not read rho(i, j), so their tangent stays zero.
  for (std::size_t a = pair.i; a < n; ++a) {
    const auto ca = c.row(a);
    auto da = dot.row(a);
    for (std::size_t b = 0; b <= a; ++b) {
      const auto cb = c.row(b);
      const auto db = dot.row(b);
      double sdot = (a == pair.i && b == pair.j) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < b; ++k) sdot -= da[k] * cb[k] + ca[k] * db[k];
      if (a == b)
        da[a] = 0.5 * sdot / ca[a];
      else
        da[b] = (sdot - ca[b] * db[b]) / cb[b];
    }
  }
  return dot;
}

/// Reverse sweep over the factorization loop.  `cbar` is consumed as
/// workspace; `out` receives rho-bar for every strictly-lower pair.
inline void cholesky_adjoint_into(const CholeskyFactor& c, LowerTriangular& cbar,
                                  CorrelationGradient& out, OpCounter* counter = nullptr) {
  const std::size_t n = c.size();
  assert(cbar.size() == n && out.size() == n);
  detail::require_differentiable(c);

  for (std::size_t i = n; i-- > 0;) {
    const auto ci = c.row(i);
    auto bi = cbar.row(i);
    {
      // C(i,i) = sqrt(s), s = rho(i,i) - sum_k C(i,k)^2
      const double sbar = 0.5 * bi[i] / ci[i];
      const double two_sbar = 2.0 * sbar;
      for (std::size_t k = 0; k < i; ++k) bi[k] -= two_sbar * ci[k];
      if (counter) counter->flops += 2 * i + 3;
    }
    for (std::size_t j = i; j-- > 0;) {
      // C(i,j) = s / C(j,j), s = rho(i,j) - sum_{k<j} C(i,k) C(j,k)
      const auto cj = c.row(j);
      auto bj = cbar.row(j);
      const double sbar = bi[j] / cj[j];
      bj[j] -= sbar * ci[j];
      for (std::size_t k = 0; k < j; ++k) {
        bi[k] -= sbar * cj[k];
        bj[k] -= sbar * ci[k];
      }
      out(i, j) = sbar;
      if (counter) counter->flops += 4 * j + 3;
    }
  }
}

/// rho-bar(i, j) = sum_{l,m} dC(l,m)/d rho(i,j) * cbar(l,m) for all i > j.
inline CorrelationGradient cholesky_adjoint(const CholeskyFactor& c, const LowerTriangularSeed& cbar,
                                            OpCounter* counter = nullptr) {
  if (cbar.size() != c.size()) throw Error(ErrorCode::DomainError, "seed dimension mismatch");
  LowerTriangular work = cbar;
  CorrelationGradient out(c.size());
  cholesky_adjoint_into(c, work, out, counter);
  return out;
}

/// Moves rho(i, j) and rho(j, i) by h and revalidates.
inline CorrelationMatrix bump_pair(const CorrelationMatrix& rho, Pair pair, double h) {
  if (!(pair.i > pair.j && pair.i < rho.size())) throw Error(ErrorCode::DomainError, "pair must satisfy n > i > j");
  LowerTriangular l = rho.lower();
  l(pair.i, pair.j) += h;
  return validate_correlation(l);
}

}  // namespace corrisk
