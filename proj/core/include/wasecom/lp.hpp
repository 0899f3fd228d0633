#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace wasecom {

enum class ConstraintSense { LessEqual, Equal, GreaterEqual };

/// maximize c^T x subject to rows (a_r^T x sense_r b_r) and x >= 0.
struct LinearProgram {
  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<std::vector<double>> rows;
  std::vector<ConstraintSense> senses;
  std::vector<double> rhs;

  explicit LinearProgram(std::size_t n = 0) : num_vars(n), objective(n, 0.0) {}
  void add_constraint(std::vector<double> coeffs, ConstraintSense sense, double b);
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t iterations = 0;
};

class LpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-phase dense tableau simplex. Dantzig pricing, switching to Bland's rule
/// after a run of degenerate pivots so it cannot cycle.
LpSolution solve_lp(const LinearProgram& lp, std::size_t max_iterations = 200000);

}  // namespace wasecom
