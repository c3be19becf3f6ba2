#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mfld/errors.hpp"

namespace mfld::detail {

/// Dense tableau simplex for  max c.x  s.t.  A x <= b, x >= 0  with b >= 0,
/// so the slack basis is feasible and no phase one is needed. Only the
/// nonbasic columns are stored: the tableau is (rows + 1) x (cols + 1).
/// Ties in the entering/leaving choice are broken by variable index.
class DenseSimplex {
 public:
  static constexpr double kEps = 1e-12;

  DenseSimplex(std::size_t rows, std::size_t cols)
      : m_(rows), n_(cols), d_((rows + 1) * (cols + 1), 0.0), basic_(rows), nonbasic_(cols) {
    for (std::size_t j = 0; j < n_; ++j) nonbasic_[j] = j;
    for (std::size_t i = 0; i < m_; ++i) basic_[i] = n_ + i;
  }

  void set_coefficient(std::size_t row, std::size_t col, double v) { at(row, col) = v; }
  void set_bound(std::size_t row, double v) {
    if (v < 0.0) throw DomainError("simplex needs nonnegative right-hand sides");
    at(row, n_) = v;
  }
  void set_objective(std::size_t col, double v) { at(m_, col) = -v; }

  // Returns the optimum, or +inf if the problem is unbounded.
  double solve(std::vector<double>* solution = nullptr) {
    const std::size_t max_pivots = 50 * (m_ + n_) + 1000;
    for (std::size_t iter = 0;; ++iter) {
      if (iter > max_pivots) throw ConvergenceError("simplex pivot limit reached", 0.0, static_cast<int>(iter));
      std::size_t s = n_;
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = at(m_, j);
        if (s == n_ || v < at(m_, s) || (v == at(m_, s) && nonbasic_[j] < nonbasic_[s])) s = j;
      }
      if (s == n_ || at(m_, s) >= -kEps) break;
      std::size_t r = m_;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = at(i, s);
        if (a <= kEps) continue;
        if (r == m_) {
          r = i;
          continue;
        }
        const double lhs = at(i, n_) / a;
        const double rhs = at(r, n_) / at(r, s);
        if (lhs < rhs || (lhs == rhs && basic_[i] < basic_[r])) r = i;
      }
      if (r == m_) return std::numeric_limits<double>::infinity();
      pivot(r, s);
    }
    if (solution) {
      solution->assign(n_, 0.0);
      for (std::size_t i = 0; i < m_; ++i)
        if (basic_[i] < n_) (*solution)[basic_[i]] = at(i, n_);
    }
    return at(m_, n_);
  }

 private:
  double& at(std::size_t i, std::size_t j) { return d_[i * (n_ + 1) + j]; }

  void pivot(std::size_t r, std::size_t s) {
    const double inv = 1.0 / at(r, s);
    double* row_r = &d_[r * (n_ + 1)];
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double* row_i = &d_[i * (n_ + 1)];
      const double factor = row_i[s] * inv;
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) row_i[j] -= factor * row_r[j];
      row_i[s] = -factor;
    }
    for (std::size_t j = 0; j <= n_; ++j) row_r[j] *= inv;
    row_r[s] = inv;
    std::swap(basic_[r], nonbasic_[s]);
  }

  std::size_t m_;
  std::size_t n_;
  std::vector<double> d_;
  std::vector<std::size_t> basic_;
  std::vector<std::size_t> nonbasic_;
};

}  // namespace mfld::detail
