// Copyright 2026 The wkselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wks/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "wks/error.hpp"

namespace wks {

std::size_t LpProblem::AddColumn(SparseColumn column, double c) {
  columns.push_back(std::move(column));
  cost.push_back(c);
  return columns.size() - 1;
}

const char* LpStatusName(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal:
      return "optimal";
    case LpStatus::kInfeasible:
      return "infeasible";
    case LpStatus::kUnbounded:
      return "unbounded";
    case LpStatus::kIterationLimit:
      return "iteration_limit";
  }
  return "unknown";
}

double LpPrimalResidual(const LpProblem& problem, const std::vector<double>& x) {
  std::vector<double> ax(problem.rows, 0.0);
  for (std::size_t j = 0; j < problem.cols(); ++j) {
    if (x[j] == 0.0) continue;
    for (const auto& [r, a] : problem.columns[j].entries) ax[r] += a * x[j];
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < problem.rows; ++i) {
    worst = std::max(worst, std::fabs(ax[i] - problem.rhs[i]));
  }
  return worst;
}

namespace {

// Column indices >= n are artificials: column n + i is the unit vector e_i.
class Simplex {
 public:
  Simplex(const LpProblem& p, const LpOptions& o)
      : p_(p), o_(o), m_(p.rows), n_(p.cols()) {
    sign_.assign(m_, 1.0);
    b_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      if (p.rhs[i] < 0.0) sign_[i] = -1.0;
      b_[i] = sign_[i] * p.rhs[i];
    }
    basis_.resize(m_);
    in_basis_.assign(n_ + m_, -1);
    for (std::size_t i = 0; i < m_; ++i) {
      basis_[i] = static_cast<int>(n_ + i);
      in_basis_[n_ + i] = static_cast<int>(i);
    }
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = 1.0;
    xb_ = b_;
    max_iter_ = o.max_iterations ? o.max_iterations : 50 * (m_ + n_) + 1000;
    refactor_every_ = std::max<std::size_t>(64, m_);
  }

  LpResult Run() {
    LpResult res;
    for (std::size_t j = 0; j < n_; ++j) {
      if (p_.columns[j].entries.empty() && p_.cost[j] < 0.0) {
        // An empty column with negative cost can grow without bound.
        res.status = LpStatus::kUnbounded;
        return res;
      }
    }
    // The right-hand side is perturbed by small deterministic amounts while
    // pivoting so that degenerate vertices do not stall the pricing; the
    // original values are restored at the end and any sign defect is repaired
    // by dual simplex steps.
    const std::vector<double> original = b_;
    double scale = 1.0;
    for (double v : b_) scale = std::max(scale, std::fabs(v));
    const double eps = 1e-7 * scale;
    std::uint64_t state = 0x9E3779B97F4A7C15ull;
    auto jitter = [&]() {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      return eps * (1.0 + static_cast<double>(state >> 11) * 0x1.0p-53);
    };

    // Phase 1.
    for (std::size_t i = 0; i < m_; ++i) b_[i] = original[i] + jitter();
    xb_ = b_;
    cost_.assign(n_ + m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) cost_[n_ + i] = 1.0;
    LpStatus st = Iterate();
    res.iterations = iterations_;
    if (st == LpStatus::kIterationLimit) {
      res.status = st;
      return res;
    }
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] >= static_cast<int>(n_)) infeas += xb_[i];
    }
    res.phase1_infeasibility = infeas;
    if (infeas > 100.0 * eps * static_cast<double>(m_ + 1) + o_.feasibility_tol * scale) {
      res.status = LpStatus::kInfeasible;
      return res;
    }
    DriveOutArtificials();

    // Phase 2 on a right-hand side re-perturbed to fit the current basis.
    b_ = original;
    Refactor();
    for (std::size_t i = 0; i < m_; ++i) {
      xb_[i] = basis_[i] >= static_cast<int>(n_) ? 0.0 : std::max(xb_[i], 0.0) + jitter();
    }
    std::fill(b_.begin(), b_.end(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      std::size_t j = basis_[i];
      if (j >= n_) continue;
      for (const auto& [r, a] : p_.columns[j].entries) b_[r] += sign_[r] * a * xb_[i];
    }
    cost_.assign(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = p_.cost[j];
    st = Iterate();
    res.iterations = iterations_;
    if (st != LpStatus::kOptimal) {
      res.status = st;
      return res;
    }
    b_ = original;
    Refactor();
    st = DualCleanup();
    res.iterations = iterations_;
    res.status = st;
    if (st != LpStatus::kOptimal) return res;

    res.x.assign(n_, 0.0);
    res.basis.assign(m_, -1);
    for (std::size_t i = 0; i < m_; ++i) {
      int j = basis_[i];
      if (j < static_cast<int>(n_)) {
        res.x[j] = std::max(0.0, xb_[i]);
        res.basis[i] = j;
      }
    }
    res.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) res.objective += p_.cost[j] * res.x[j];
    std::vector<double> y = Duals();
    res.duals.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) res.duals[i] = y[i] * sign_[i];
    res.reduced_costs.assign(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (in_basis_[j] >= 0) continue;
      res.reduced_costs[j] = ReducedCost(j, y);
      if (std::fabs(res.reduced_costs[j]) <= o_.multiplicity_tol) res.multiple_optima = true;
    }
    return res;
  }

 private:
  double ColumnDot(std::size_t j, const std::vector<double>& y) const {
    if (j >= n_) return y[j - n_];
    double acc = 0.0;
    for (const auto& [r, a] : p_.columns[j].entries) acc += y[r] * sign_[r] * a;
    return acc;
  }

  double ReducedCost(std::size_t j, const std::vector<double>& y) const {
    return cost_[j] - ColumnDot(j, y);
  }

  std::vector<double> Duals() const {
    std::vector<double> y(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &binv_[i * m_];
      for (std::size_t k = 0; k < m_; ++k) y[k] += cb * row[k];
    }
    return y;
  }

  // alpha = B^{-1} A_j
  std::vector<double> Ftran(std::size_t j) const {
    std::vector<double> alpha(m_, 0.0);
    if (j >= n_) {
      std::size_t r = j - n_;
      for (std::size_t i = 0; i < m_; ++i) alpha[i] = binv_[i * m_ + r];
      return alpha;
    }
    for (const auto& [r, a] : p_.columns[j].entries) {
      double s = sign_[r] * a;
      for (std::size_t i = 0; i < m_; ++i) alpha[i] += binv_[i * m_ + r] * s;
    }
    return alpha;
  }

  void Pivot(std::size_t r, std::size_t q, const std::vector<double>& alpha) {
    double piv = alpha[r];
    double* prow = &binv_[r * m_];
    for (std::size_t k = 0; k < m_; ++k) prow[k] /= piv;
    xb_[r] /= piv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r || alpha[i] == 0.0) continue;
      double f = alpha[i];
      double* row = &binv_[i * m_];
      for (std::size_t k = 0; k < m_; ++k) row[k] -= f * prow[k];
      xb_[i] -= f * xb_[r];
    }
    in_basis_[basis_[r]] = -1;
    basis_[r] = static_cast<int>(q);
    in_basis_[q] = static_cast<int>(r);
    if (++since_refactor_ >= refactor_every_) Refactor();
  }

  void Refactor() {
    since_refactor_ = 0;
    // Gauss-Jordan with partial pivoting on [B | I].
    std::vector<double> a(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      std::size_t j = basis_[i];
      if (j >= n_) {
        a[(j - n_) * m_ + i] = 1.0;
      } else {
        for (const auto& [r, v] : p_.columns[j].entries) a[r * m_ + i] = sign_[r] * v;
      }
    }
    std::vector<double> inv(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
    for (std::size_t col = 0; col < m_; ++col) {
      std::size_t best = col;
      for (std::size_t i = col + 1; i < m_; ++i) {
        if (std::fabs(a[i * m_ + col]) > std::fabs(a[best * m_ + col])) best = i;
      }
      if (std::fabs(a[best * m_ + col]) < 1e-14) {
        Fail(ErrorKind::kNumerical, "simplex basis became singular");
      }
      if (best != col) {
        std::swap_ranges(a.begin() + best * m_, a.begin() + (best + 1) * m_, a.begin() + col * m_);
        std::swap_ranges(inv.begin() + best * m_, inv.begin() + (best + 1) * m_,
                         inv.begin() + col * m_);
      }
      double piv = a[col * m_ + col];
      for (std::size_t k = 0; k < m_; ++k) {
        a[col * m_ + k] /= piv;
        inv[col * m_ + k] /= piv;
      }
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == col) continue;
        double f = a[i * m_ + col];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          a[i * m_ + k] -= f * a[col * m_ + k];
          inv[i * m_ + k] -= f * inv[col * m_ + k];
        }
      }
    }
    // Row i of B^{-1} pairs with basis position i.
    binv_ = std::move(inv);
    for (std::size_t i = 0; i < m_; ++i) {
      double acc = 0.0;
      const double* row = &binv_[i * m_];
      for (std::size_t k = 0; k < m_; ++k) acc += row[k] * b_[k];
      xb_[i] = acc;
    }
  }

  LpStatus Iterate() {
    int degenerate_run = 0;
    while (true) {
      if (iterations_ >= max_iter_) return LpStatus::kIterationLimit;
      std::vector<double> y = Duals();
      const bool bland = degenerate_run >= o_.degenerate_switch;
      std::size_t q = n_ + m_;
      double best = -o_.optimality_tol;
      for (std::size_t j = 0; j < n_; ++j) {
        if (in_basis_[j] >= 0) continue;
        double d = ReducedCost(j, y);
        if (d < best) {
          q = j;
          if (bland) break;
          best = d;
        }
      }
      if (q == n_ + m_) return LpStatus::kOptimal;
      std::vector<double> alpha = Ftran(q);
      double alpha_max = 0.0;
      for (double a : alpha) alpha_max = std::max(alpha_max, a);
      const double threshold = o_.pivot_tol * std::max(1.0, alpha_max);
      std::size_t r = m_;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (alpha[i] <= threshold) continue;
        double t = std::max(0.0, xb_[i]) / alpha[i];
        if (t < ratio - 1e-12 || (t <= ratio + 1e-12 && r < m_ && basis_[i] < basis_[r])) {
          if (t < ratio) ratio = t;
          r = i;
        }
      }
      if (r == m_) return LpStatus::kUnbounded;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      Pivot(r, q, alpha);
      for (double& v : xb_) {
        if (v < 0.0 && v > -1e-11) v = 0.0;
      }
      ++iterations_;
    }
  }

  // Dual simplex steps until the basic solution is nonnegative. Reduced costs
  // stay nonnegative throughout, so the end point is optimal.
  LpStatus DualCleanup() {
    while (true) {
      std::size_t r = m_;
      double worst = -o_.feasibility_tol;
      for (std::size_t i = 0; i < m_; ++i) {
        if (xb_[i] < worst) {
          worst = xb_[i];
          r = i;
        }
      }
      if (r == m_) {
        for (double& v : xb_) v = std::max(v, 0.0);
        return LpStatus::kOptimal;
      }
      if (iterations_ >= max_iter_) return LpStatus::kIterationLimit;
      std::vector<double> y = Duals();
      const double* row = &binv_[r * m_];
      std::size_t q = n_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n_; ++j) {
        if (in_basis_[j] >= 0) continue;
        double arj = 0.0;
        for (const auto& [i, a] : p_.columns[j].entries) arj += row[i] * sign_[i] * a;
        if (arj >= -o_.pivot_tol) continue;
        double t = std::max(0.0, ReducedCost(j, y)) / -arj;
        if (t < best) {
          best = t;
          q = j;
        }
      }
      if (q == n_) return LpStatus::kInfeasible;
      Pivot(r, q, Ftran(q));
      ++iterations_;
    }
  }

  void DriveOutArtificials() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < static_cast<int>(n_)) continue;
      const double* row = &binv_[i * m_];
      for (std::size_t j = 0; j < n_; ++j) {
        if (in_basis_[j] >= 0) continue;
        double v = 0.0;
        for (const auto& [r, a] : p_.columns[j].entries) v += row[r] * sign_[r] * a;
        if (std::fabs(v) > 1e-7) {
          Pivot(i, j, Ftran(j));
          break;
        }
      }
    }
  }

  const LpProblem& p_;
  const LpOptions& o_;
  std::size_t m_;
  std::size_t n_;
  std::vector<double> sign_;
  std::vector<double> b_;
  std::vector<double> cost_;
  std::vector<int> basis_;
  std::vector<int> in_basis_;
  std::vector<double> binv_;
  std::vector<double> xb_;
  std::size_t iterations_ = 0;
  std::size_t max_iter_ = 0;
  std::size_t refactor_every_ = 64;
  std::size_t since_refactor_ = 0;
};

}  // namespace

LpResult SolveLp(const LpProblem& problem, const LpOptions& options) {
  if (problem.rhs.size() != problem.rows || problem.cost.size() != problem.cols()) {
    Fail(ErrorKind::kInternal, "LP dimensions are inconsistent");
  }
  for (const auto& col : problem.columns) {
    for (const auto& [r, a] : col.entries) {
      if (r < 0 || static_cast<std::size_t>(r) >= problem.rows || !std::isfinite(a)) {
        Fail(ErrorKind::kInternal, "LP column entry out of range");
      }
    }
  }
  Simplex simplex(problem, options);
  return simplex.Run();
}

}  // namespace wks
