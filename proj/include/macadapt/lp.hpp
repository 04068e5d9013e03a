#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "macadapt/errors.hpp"

namespace macadapt {

struct LpSolution {
  double value = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;
};

/// Dense tableau simplex for max c.x subject to A x <= b, x >= 0 with b >= 0,
/// so the slack basis is a feasible start. Bland's rule rules out cycling.
class DenseSimplex {
 public:
  DenseSimplex(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
               const std::vector<double>& c, double eps = 1e-12)
      : m_(b.size()), n_(c.size()), eps_(eps), basic_(m_), nonbasic_(n_),
        D_(m_ + 1, std::vector<double>(n_ + 1, 0.0)) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (A[i].size() != n_) throw InvalidInput("constraint row has the wrong width");
      if (b[i] < 0.0) throw InvalidInput("right-hand sides must be nonnegative");
      for (std::size_t j = 0; j < n_; ++j) D_[i][j] = A[i][j];
      D_[i][n_] = b[i];
      basic_[i] = n_ + i;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      D_[m_][j] = -c[j];
      nonbasic_[j] = j;
    }
  }

  LpSolution solve(std::size_t max_pivots = 1000000) {
    LpSolution out;
    for (;;) {
      // Entering column: lowest variable label with a negative reduced cost.
      std::size_t s = n_;
      for (std::size_t j = 0; j < n_; ++j)
        if (D_[m_][j] < -eps_ && (s == n_ || nonbasic_[j] < nonbasic_[s])) s = j;
      if (s == n_) break;
      std::size_t r = m_;
      double best = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        if (D_[i][s] <= eps_) continue;
        const double ratio = D_[i][n_] / D_[i][s];
        if (r == m_ || ratio < best - eps_ || (std::abs(ratio - best) <= eps_ && basic_[i] < basic_[r])) {
          r = i;
          best = ratio;
        }
      }
      if (r == m_) throw SolverError("linear program is unbounded");
      pivot(r, s);
      if (++out.pivots > max_pivots) throw SolverError("simplex pivot limit reached");
    }
    out.value = D_[m_][n_];
    out.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basic_[i] < n_) out.x[basic_[i]] = D_[i][n_];
    return out;
  }

 private:
  // Row i reads x_basic[i] = D[i][n] - sum_j D[i][j] x_nonbasic[j].
  void pivot(std::size_t r, std::size_t s) {
    auto& row = D_[r];
    const double inv = 1.0 / row[s];
    for (std::size_t j = 0; j <= n_; ++j)
      if (j != s) row[j] *= inv;
    row[s] = inv;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      auto& other = D_[i];
      const double f = other[s];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j)
        if (j != s) other[j] -= f * row[j];
      other[s] = -f * inv;
    }
    std::swap(basic_[r], nonbasic_[s]);
  }

  std::size_t m_, n_;
  double eps_;
  std::vector<std::size_t> basic_, nonbasic_;
  std::vector<std::vector<double>> D_;
};

}  // namespace macadapt
