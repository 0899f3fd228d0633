#include "wasecom/lp.hpp"

#include <cmath>
#include <limits>

namespace wasecom {

void LinearProgram::add_constraint(std::vector<double> coeffs, ConstraintSense sense, double b) {
  if (coeffs.size() != num_vars) throw LpError("add_constraint: expected " + std::to_string(num_vars) + " coefficients");
  rows.push_back(std::move(coeffs));
  senses.push_back(sense);
  rhs.push_back(b);
}

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;
constexpr std::size_t kDegenerateRun = 50;

struct Tableau {
  std::size_t m = 0;
  std::size_t n = 0;  // columns excluding rhs
  std::vector<double> cells;  // m x (n + 1)
  std::vector<std::size_t> basis;
  std::vector<bool> allowed;

  double& at(std::size_t r, std::size_t c) { return cells[r * (n + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return cells[r * (n + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, n); }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    double* prow = &cells[pr * (n + 1)];
    for (std::size_t c = 0; c <= n; ++c) prow[c] /= p;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == pr) continue;
      double* row = &cells[r * (n + 1)];
      const double f = row[pc];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= n; ++c) row[c] -= f * prow[c];
      row[pc] = 0.0;
    }
    basis[pr] = pc;
  }

  void drop_row(std::size_t r) {
    cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(r * (n + 1)),
                cells.begin() + static_cast<std::ptrdiff_t>((r + 1) * (n + 1)));
    basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(r));
    --m;
  }
};

// Maximizes cost^T x over the current tableau, starting from its basis.
LpStatus run_simplex(Tableau& t, const std::vector<double>& cost, std::size_t max_iterations,
                     std::size_t& iterations) {
  std::vector<double> reduced(t.n);
  std::size_t degenerate = 0;
  while (true) {
    if (iterations >= max_iterations) return LpStatus::IterationLimit;
    // reduced_j = c_B^T column_j - c_j
    for (std::size_t j = 0; j < t.n; ++j) reduced[j] = -cost[j];
    for (std::size_t r = 0; r < t.m; ++r) {
      const double cb = cost[t.basis[r]];
      if (cb == 0.0) continue;
      const double* row = &t.cells[r * (t.n + 1)];
      for (std::size_t j = 0; j < t.n; ++j) reduced[j] += cb * row[j];
    }
    const bool bland = degenerate >= kDegenerateRun;
    std::size_t enter = t.n;
    double best = -kCostTol;
    for (std::size_t j = 0; j < t.n; ++j) {
      if (!t.allowed[j] || reduced[j] >= -kCostTol) continue;
      if (bland) {
        enter = j;
        break;
      }
      if (reduced[j] < best) {
        best = reduced[j];
        enter = j;
      }
    }
    if (enter == t.n) return LpStatus::Optimal;

    std::size_t leave = t.m;
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.m; ++r) {
      const double a = t.at(r, enter);
      if (a <= kPivotTol) continue;
      const double q = t.at(r, t.n) / a;
      if (q < ratio - 1e-14 || (q <= ratio + 1e-14 && leave < t.m && t.basis[r] < t.basis[leave])) {
        ratio = q;
        leave = r;
      }
    }
    if (leave == t.m) return LpStatus::Unbounded;
    degenerate = ratio <= 1e-14 ? degenerate + 1 : 0;
    t.pivot(leave, enter);
    ++iterations;
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, std::size_t max_iterations) {
  if (lp.objective.size() != lp.num_vars) throw LpError("solve_lp: objective size mismatch");
  const std::size_t m = lp.rows.size();
  const std::size_t nv = lp.num_vars;

  std::vector<double> b = lp.rhs;
  std::vector<ConstraintSense> sense = lp.senses;
  std::vector<double> flip(m, 1.0);
  std::size_t slacks = 0;
  std::size_t artificials = 0;
  for (std::size_t r = 0; r < m; ++r) {
    if (!std::isfinite(b[r])) throw LpError("solve_lp: non-finite right-hand side");
    if (b[r] < 0.0) {
      flip[r] = -1.0;
      b[r] = -b[r];
      if (sense[r] == ConstraintSense::LessEqual) sense[r] = ConstraintSense::GreaterEqual;
      else if (sense[r] == ConstraintSense::GreaterEqual) sense[r] = ConstraintSense::LessEqual;
    }
    if (sense[r] != ConstraintSense::Equal) ++slacks;
    if (sense[r] != ConstraintSense::LessEqual) ++artificials;
  }

  Tableau t;
  t.m = m;
  t.n = nv + slacks + artificials;
  t.cells.assign(m * (t.n + 1), 0.0);
  t.basis.assign(m, 0);
  t.allowed.assign(t.n, true);
  std::vector<bool> is_artificial(t.n, false);
  std::size_t next_slack = nv;
  std::size_t next_art = nv + slacks;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < nv; ++j) t.at(r, j) = flip[r] * lp.rows[r][j];
    t.rhs(r) = b[r];
    if (sense[r] == ConstraintSense::LessEqual) {
      t.at(r, next_slack) = 1.0;
      t.basis[r] = next_slack++;
    } else {
      if (sense[r] == ConstraintSense::GreaterEqual) t.at(r, next_slack++) = -1.0;
      t.at(r, next_art) = 1.0;
      is_artificial[next_art] = true;
      t.basis[r] = next_art++;
    }
  }

  LpSolution sol;
  if (artificials > 0) {
    std::vector<double> phase1(t.n, 0.0);
    for (std::size_t j = 0; j < t.n; ++j) if (is_artificial[j]) phase1[j] = -1.0;
    const LpStatus st = run_simplex(t, phase1, max_iterations, sol.iterations);
    if (st == LpStatus::IterationLimit) {
      sol.status = st;
      return sol;
    }
    double infeas = 0.0;
    double scale = 1.0;
    for (std::size_t r = 0; r < t.m; ++r) {
      if (is_artificial[t.basis[r]]) infeas += t.at(r, t.n);
      scale = std::max(scale, std::abs(b[r]));
    }
    if (infeas > 1e-9 * scale) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Push artificials out of the basis; rows where that is impossible are redundant.
    for (std::size_t r = 0; r < t.m;) {
      if (!is_artificial[t.basis[r]]) {
        ++r;
        continue;
      }
      std::size_t col = t.n;
      for (std::size_t j = 0; j < t.n; ++j) {
        if (!is_artificial[j] && std::abs(t.at(r, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col == t.n) {
        t.drop_row(r);
      } else {
        t.pivot(r, col);
        ++r;
      }
    }
    for (std::size_t j = 0; j < t.n; ++j) if (is_artificial[j]) t.allowed[j] = false;
  }

  std::vector<double> phase2(t.n, 0.0);
  for (std::size_t j = 0; j < nv; ++j) phase2[j] = lp.objective[j];
  sol.status = run_simplex(t, phase2, max_iterations, sol.iterations);
  if (sol.status != LpStatus::Optimal) return sol;

  sol.x.assign(nv, 0.0);
  for (std::size_t r = 0; r < t.m; ++r) {
    if (t.basis[r] < nv) sol.x[t.basis[r]] = std::max(0.0, t.at(r, t.n));
  }
  sol.objective = 0.0;
  for (std::size_t j = 0; j < nv; ++j) sol.objective += lp.objective[j] * sol.x[j];
  return sol;
}

}  // namespace wasecom
