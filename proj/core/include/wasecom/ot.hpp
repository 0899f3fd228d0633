#pragma once

// Exact discrete optimal transport and numerical checks of the robust-risk
// duality on small grids.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wasecom {

using Point = std::vector<double>;
using PointLoss = std::function<double(std::span<const double>)>;

struct DiscreteDistribution {
  std::vector<Point> support;
  std::vector<double> weights;

  static DiscreteDistribution point_mass(Point p);
  static DiscreteDistribution uniform(std::vector<Point> points);

  std::size_t size() const { return support.size(); }
  std::size_t dim() const { return support.empty() ? 0 : support.front().size(); }
  /// Throws std::invalid_argument unless weights are nonnegative and sum to 1
  /// (within 1e-9), points are finite and share a dimension, and the support
  /// has at most `cap` points.
  void validate(std::size_t cap = kDefaultSupportCap) const;
  double expectation(const PointLoss& loss) const;

  static constexpr std::size_t kDefaultSupportCap = 12;
};

/// Candidate support for worst-case distributions.
struct Grid {
  std::vector<Point> points;

  /// n evenly spaced points on [lo, hi].
  static Grid line(double lo, double hi, std::size_t n);
  /// Cartesian product of two line grids.
  static Grid square(double lo, double hi, std::size_t n_per_axis);
  std::size_t size() const { return points.size(); }
  /// Index of a point equal to p within tol, if any.
  std::optional<std::size_t> find(std::span<const double> p, double tol = 1e-9) const;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Exact W_p (p in {1, 2}) with ground metric ||a - b||_2, solved as the
/// transport linear program.
double wasserstein_p(const DiscreteDistribution& p, const DiscreteDistribution& q, int order);

struct WorstCase {
  double value = 0.0;
  /// Maximizing distribution, supported on the grid.
  DiscreteDistribution distribution;
};

/// max E_Q[loss] over Q on the grid with W_2(P, Q) <= radius. Every support
/// point of P has to lie on the grid; otherwise Q = P is not representable and
/// std::invalid_argument is thrown.
WorstCase worst_case_risk(const DiscreteDistribution& p, const PointLoss& loss, double radius, const Grid& grid);

/// 64 log-spaced values over [1e-3, 1e3].
std::vector<double> default_lambda_grid();

/// lambda rho^2 + sum_i w_i max_g (loss(g) - lambda ||g - x_i||^2), the sup
/// taken exactly over the grid.
double surrogate_risk(const DiscreteDistribution& p, const PointLoss& loss, double radius, double lambda,
                      const Grid& grid);

struct DualValue {
  double value = 0.0;
  /// Smallest minimizing grid multiplier.
  double lambda_star = 0.0;
};

/// Minimum of surrogate_risk over the lambda grid, refined once with another
/// grid of the same size between the neighbours of the coarse argmin.
DualValue dual_value(const DiscreteDistribution& p, const PointLoss& loss, double radius, const Grid& grid,
                     std::span<const double> lambda_grid = {});

/// Random Q on the grid with W_2(P, Q) <= radius: each support point sends a
/// random share of its mass to a random grid point, spending a random slice of
/// the squared budget.
DiscreteDistribution sample_ball_distribution(const DiscreteDistribution& p, double radius, const Grid& grid,
                                              std::uint64_t seed);

/// max |loss(a) - loss(b)| / ||a - b|| over grid pairs.
double estimate_lipschitz(const PointLoss& loss, const Grid& grid);

struct Lemma1Options {
  std::size_t random_distributions = 100;
  std::uint64_t seed = 7;
  /// Reject lambda < L / rho.
  bool require_hypothesis = true;
  /// Required fraction of the bound left unused.
  double slack = 0.05;
};

struct TheoryCheckReport {
  std::string instance;
  double primal = 0.0;       // worst-case risk of the checked member
  double dual = 0.0;         // dual value of the checked member
  double gap = 0.0;          // |primal - dual|
  double lambda = 0.0;
  double lambda_star = 0.0;
  double lipschitz = 0.0;
  double robustness_term = 0.0;  // 2 L rho
  double multiplier_term = 0.0;  // |lambda - lambda*| rho^2
  double excess_gap = 0.0;       // max over checked Q of |E(Q, h) - E_rho^lambda(P, h)|
  double margin = 0.0;           // 1 - excess_gap / bound (1 when the bound is 0 and the gap is 0)
  std::size_t distributions_checked = 0;
  bool upper_bound_ok = false;   // surrogate >= E_Q[h] for every checked Q
  bool sandwich_ok = false;      // excess_gap within the bound with the requested slack
  bool passed() const { return upper_bound_ok && sandwich_ok; }
};

/// Compares the worst-case excess risk of family[member] under many Q in the
/// ball with its penalized surrogate excess risk at multiplier lambda. rho = 0
/// is treated as the lambda -> infinity limit.
TheoryCheckReport check_lemma1(const std::string& instance, const DiscreteDistribution& p,
                               std::span<const PointLoss> family, std::size_t member, double radius, double lambda,
                               double lipschitz, const Grid& grid, const Lemma1Options& options = {});

struct BallGapReport {
  double worst_case = 0.0;
  double min_expectation = 0.0;  // smallest E_Q[loss] over the sampled Q
  double bound_term = 0.0;       // 2 L rho
  std::size_t distributions_checked = 0;
  std::size_t violations = 0;
};

/// sup over the ball <= E_Q[loss] + 2 L rho on sampled Q in the ball.
BallGapReport check_ball_gap(const DiscreteDistribution& p, const PointLoss& loss, double radius,
                                      double lipschitz, const Grid& grid, std::size_t samples, std::uint64_t seed);

}  // namespace wasecom
