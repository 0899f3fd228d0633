#include "wasecom/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "wasecom/lp.hpp"

namespace wasecom {

DiscreteDistribution DiscreteDistribution::point_mass(Point p) {
  DiscreteDistribution d;
  d.support.push_back(std::move(p));
  d.weights.push_back(1.0);
  return d;
}

DiscreteDistribution DiscreteDistribution::uniform(std::vector<Point> points) {
  DiscreteDistribution d;
  const double w = points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size());
  d.weights.assign(points.size(), w);
  d.support = std::move(points);
  return d;
}

void DiscreteDistribution::validate(std::size_t cap) const {
  if (support.empty()) throw std::invalid_argument("distribution: empty support");
  if (support.size() != weights.size()) throw std::invalid_argument("distribution: support/weight size mismatch");
  if (support.size() > cap) {
    throw std::invalid_argument("distribution: support of " + std::to_string(support.size()) +
                                " points exceeds cap " + std::to_string(cap));
  }
  const std::size_t d = support.front().size();
  if (d == 0) throw std::invalid_argument("distribution: zero-dimensional points");
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].size() != d) throw std::invalid_argument("distribution: mixed point dimensions");
    for (double v : support[i]) {
      if (!std::isfinite(v)) throw std::invalid_argument("distribution: non-finite support point");
    }
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("distribution: negative weight");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "distribution: weights sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
}

double DiscreteDistribution::expectation(const PointLoss& loss) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) acc += weights[i] * loss(support[i]);
  return acc;
}

Grid Grid::line(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("Grid::line: need n >= 2 and hi > lo");
  Grid g;
  g.points.reserve(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g.points.push_back({lo + step * static_cast<double>(i)});
  return g;
}

Grid Grid::square(double lo, double hi, std::size_t n_per_axis) {
  Grid axis = line(lo, hi, n_per_axis);
  Grid g;
  g.points.reserve(n_per_axis * n_per_axis);
  for (const auto& a : axis.points) {
    for (const auto& b : axis.points) g.points.push_back({a[0], b[0]});
  }
  return g;
}

std::optional<std::size_t> Grid::find(std::span<const double> p, double tol) const {
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (points[j].size() != p.size()) continue;
    bool same = true;
    for (std::size_t k = 0; k < p.size() && same; ++k) same = std::abs(points[j][k] - p[k]) <= tol;
    if (same) return j;
  }
  return std::nullopt;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

double wasserstein_p(const DiscreteDistribution& p, const DiscreteDistribution& q, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("wasserstein_p: order must be 1 or 2");
  p.validate();
  q.validate();
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("wasserstein_p: dimension mismatch (" + std::to_string(p.dim()) + " vs " +
                                std::to_string(q.dim()) + ")");
  }
  const std::size_t n = p.size();
  const std::size_t m = q.size();
  LinearProgram lp(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = std::sqrt(squared_distance(p.support[i], q.support[j]));
      lp.objective[i * m + j] = -(order == 1 ? d : d * d);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n * m, 0.0);
    for (std::size_t j = 0; j < m; ++j) row[i * m + j] = 1.0;
    lp.add_constraint(std::move(row), ConstraintSense::Equal, p.weights[i]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> row(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) row[i * m + j] = 1.0;
    lp.add_constraint(std::move(row), ConstraintSense::Equal, q.weights[j]);
  }
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal) throw LpError("wasserstein_p: transport LP did not reach optimality");
  const double cost = std::max(0.0, -sol.objective);
  return order == 1 ? cost : std::sqrt(cost);
}

namespace {

std::vector<std::size_t> grid_indices(const DiscreteDistribution& p, const Grid& grid) {
  std::vector<std::size_t> idx;
  idx.reserve(p.size());
  for (const auto& x : p.support) {
    auto j = grid.find(x);
    if (!j) {
      throw std::invalid_argument(
          "worst-case grid does not contain every support point, so Q = P is not representable");
    }
    idx.push_back(*j);
  }
  return idx;
}

std::vector<double> grid_losses(const PointLoss& loss, const Grid& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& g : grid.points) out.push_back(loss(g));
  return out;
}

// costs[i * m + j] = ||g_j - x_i||^2
std::vector<double> grid_costs(const DiscreteDistribution& p, const Grid& grid) {
  std::vector<double> out(p.size() * grid.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) out[i * grid.size() + j] = squared_distance(grid.points[j], p.support[i]);
  }
  return out;
}

double surrogate_from_tables(const DiscreteDistribution& p, const std::vector<double>& losses,
                             const std::vector<double>& costs, double radius, double lambda) {
  const std::size_t m = losses.size();
  double acc = lambda * radius * radius;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) best = std::max(best, losses[j] - lambda * costs[i * m + j]);
    acc += p.weights[i] * best;
  }
  return acc;
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = n == 1 ? lo : std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  return out;
}

void check_inputs(const DiscreteDistribution& p, double radius, const Grid& grid) {
  p.validate();
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw std::invalid_argument("radius must be finite and >= 0");
  if (grid.size() == 0) throw std::invalid_argument("empty perturbation grid");
  if (grid.size() > 10000) throw std::invalid_argument("perturbation grid exceeds 10^4 points");
  for (const auto& g : grid.points) {
    if (g.size() != p.dim()) throw std::invalid_argument("grid and distribution dimensions differ");
  }
}

}  // namespace

WorstCase worst_case_risk(const DiscreteDistribution& p, const PointLoss& loss, double radius, const Grid& grid) {
  check_inputs(p, radius, grid);
  const auto home = grid_indices(p, grid);
  const auto losses = grid_losses(loss, grid);
  const std::size_t n = p.size();
  const std::size_t m = grid.size();

  WorstCase out;
  std::map<std::size_t, double> mass;
  if (radius == 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      out.value += p.weights[i] * losses[home[i]];
      mass[home[i]] += p.weights[i];
    }
  } else {
    const auto costs = grid_costs(p, grid);
    LinearProgram lp(n * m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) lp.objective[i * m + j] = losses[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(n * m, 0.0);
      std::fill_n(row.begin() + static_cast<std::ptrdiff_t>(i * m), m, 1.0);
      lp.add_constraint(std::move(row), ConstraintSense::Equal, p.weights[i]);
    }
    lp.add_constraint(costs, ConstraintSense::LessEqual, radius * radius);
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) throw LpError("worst_case_risk: LP did not reach optimality");
    out.value = sol.objective;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double v = sol.x[i * m + j];
        if (v > 1e-15) mass[j] += v;
      }
    }
  }
  double total = 0.0;
  for (const auto& [j, w] : mass) total += w;
  for (const auto& [j, w] : mass) {
    out.distribution.support.push_back(grid.points[j]);
    out.distribution.weights.push_back(w / total);
  }
  return out;
}

std::vector<double> default_lambda_grid() { return log_space(1e-3, 1e3, 64); }

double surrogate_risk(const DiscreteDistribution& p, const PointLoss& loss, double radius, double lambda,
                      const Grid& grid) {
  check_inputs(p, radius, grid);
  if (!(lambda >= 0.0)) throw std::invalid_argument("surrogate_risk: lambda must be >= 0");
  return surrogate_from_tables(p, grid_losses(loss, grid), grid_costs(p, grid), radius, lambda);
}

DualValue dual_value(const DiscreteDistribution& p, const PointLoss& loss, double radius, const Grid& grid,
                     std::span<const double> lambda_grid) {
  check_inputs(p, radius, grid);
  std::vector<double> coarse(lambda_grid.begin(), lambda_grid.end());
  if (coarse.empty()) coarse = default_lambda_grid();
  std::sort(coarse.begin(), coarse.end());
  if (coarse.front() < 0.0) throw std::invalid_argument("dual_value: negative multiplier in grid");

  const auto losses = grid_losses(loss, grid);
  const auto costs = grid_costs(p, grid);
  auto eval = [&](double lam) { return surrogate_from_tables(p, losses, costs, radius, lam); };

  DualValue best{std::numeric_limits<double>::infinity(), 0.0};
  auto consider = [&](double lam) {
    const double v = eval(lam);
    if (v < best.value || (v == best.value && lam < best.lambda_star)) best = {v, lam};
  };
  std::size_t arg = 0;
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    const double before = best.value;
    consider(coarse[k]);
    if (best.value < before) arg = k;
  }
  const double lo = coarse[arg == 0 ? 0 : arg - 1];
  const double hi = coarse[std::min(arg + 1, coarse.size() - 1)];
  if (hi > lo) {
    if (lo > 0.0) {
      for (double lam : log_space(lo, hi, coarse.size())) consider(lam);
    } else {
      for (std::size_t k = 0; k < coarse.size(); ++k) {
        consider(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(coarse.size() - 1));
      }
    }
  }
  return best;
}

DiscreteDistribution sample_ball_distribution(const DiscreteDistribution& p, double radius, const Grid& grid,
                                              std::uint64_t seed) {
  check_inputs(p, radius, grid);
  const auto home = grid_indices(p, grid);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);

  const std::size_t n = p.size();
  std::vector<double> share(n);
  double share_sum = 0.0;
  for (auto& s : share) share_sum += (s = expo(rng));
  const double budget = unit(rng) * radius * radius;

  std::map<std::size_t, double> mass;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = p.weights[i];
    const double b = budget * share[i] / share_sum;
    std::size_t target = pick(rng);
    if (w > 0.0 && unit(rng) < 0.5) {
      // Prefer a target the whole atom can reach, when there is one.
      std::vector<std::size_t> reachable;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        if (w * squared_distance(grid.points[j], p.support[i]) <= b) reachable.push_back(j);
      }
      if (!reachable.empty()) {
        target = reachable[std::uniform_int_distribution<std::size_t>(0, reachable.size() - 1)(rng)];
      }
    }
    const double c = squared_distance(grid.points[target], p.support[i]);
    const double moved = (c == 0.0 || w == 0.0) ? 1.0 : std::min(1.0, b / (w * c));
    mass[target] += w * moved;
    mass[home[i]] += w * (1.0 - moved);
  }
  DiscreteDistribution q;
  for (const auto& [j, w] : mass) {
    if (w <= 0.0) continue;
    q.support.push_back(grid.points[j]);
    q.weights.push_back(w);
  }
  return q;
}

double estimate_lipschitz(const PointLoss& loss, const Grid& grid) {
  const auto losses = grid_losses(loss, grid);
  double best = 0.0;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      const double d = std::sqrt(squared_distance(grid.points[a], grid.points[b]));
      if (d > 0.0) best = std::max(best, std::abs(losses[a] - losses[b]) / d);
    }
  }
  return best;
}

TheoryCheckReport check_lemma1(const std::string& instance, const DiscreteDistribution& p,
                               std::span<const PointLoss> family, std::size_t member, double radius, double lambda,
                               double lipschitz, const Grid& grid, const Lemma1Options& options) {
  check_inputs(p, radius, grid);
  if (family.empty() || member >= family.size()) throw std::invalid_argument("check_lemma1: member out of range");
  if (!(lambda >= 0.0)) throw std::invalid_argument("check_lemma1: lambda must be >= 0");
  const bool degenerate = radius == 0.0;
  if (!degenerate && options.require_hypothesis && lambda < lipschitz / radius) {
    std::ostringstream os;
    os << "check_lemma1: hypothesis lambda >= L/rho violated (lambda=" << lambda << ", L/rho=" << lipschitz / radius
       << ")";
    throw std::invalid_argument(os.str());
  }

  TheoryCheckReport r;
  r.instance = instance;
  r.lambda = lambda;
  r.lipschitz = lipschitz;

  const auto costs = grid_costs(p, grid);
  std::vector<std::vector<double>> losses;
  std::vector<double> surrogate;
  for (const auto& h : family) {
    losses.push_back(grid_losses(h, grid));
    surrogate.push_back(degenerate ? p.expectation(h)
                                   : surrogate_from_tables(p, losses.back(), costs, radius, lambda));
  }
  const double surrogate_min = *std::min_element(surrogate.begin(), surrogate.end());
  const double robust_excess = surrogate[member] - surrogate_min;

  const WorstCase worst = worst_case_risk(p, family[member], radius, grid);
  r.primal = worst.value;
  if (degenerate) {
    r.dual = p.expectation(family[member]);
    r.lambda_star = std::numeric_limits<double>::infinity();
  } else {
    const DualValue dv = dual_value(p, family[member], radius, grid);
    r.dual = dv.value;
    r.lambda_star = dv.lambda_star;
  }
  r.gap = std::abs(r.primal - r.dual);
  r.robustness_term = 2.0 * lipschitz * radius;
  r.multiplier_term = degenerate ? 0.0 : std::abs(lambda - r.lambda_star) * radius * radius;

  std::vector<DiscreteDistribution> qs{p};
  if (!degenerate) {
    for (const auto& h : family) qs.push_back(worst_case_risk(p, h, radius, grid).distribution);
    for (std::size_t k = 0; k < options.random_distributions; ++k) {
      qs.push_back(sample_ball_distribution(p, radius, grid, options.seed + k));
    }
  }

  r.upper_bound_ok = true;
  for (const auto& q : qs) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> eq;
    for (std::size_t k = 0; k < family.size(); ++k) {
      eq.push_back(q.expectation(family[k]));
      best = std::min(best, eq.back());
      if (eq.back() > surrogate[k] + 1e-9) r.upper_bound_ok = false;
    }
    r.excess_gap = std::max(r.excess_gap, std::abs((eq[member] - best) - robust_excess));
  }
  r.distributions_checked = qs.size();

  const double bound = r.robustness_term + r.multiplier_term;
  if (bound > 0.0) {
    r.margin = 1.0 - r.excess_gap / bound;
    r.sandwich_ok = r.margin >= options.slack;
  } else {
    r.margin = r.excess_gap <= 1e-12 ? 1.0 : 0.0;
    r.sandwich_ok = r.excess_gap <= 1e-12;
  }
  return r;
}

BallGapReport check_ball_gap(const DiscreteDistribution& p, const PointLoss& loss, double radius,
                                      double lipschitz, const Grid& grid, std::size_t samples, std::uint64_t seed) {
  BallGapReport r;
  r.worst_case = worst_case_risk(p, loss, radius, grid).value;
  r.bound_term = 2.0 * lipschitz * radius;
  r.min_expectation = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples; ++k) {
    const auto q = sample_ball_distribution(p, radius, grid, seed + k);
    const double e = q.expectation(loss);
    r.min_expectation = std::min(r.min_expectation, e);
    if (r.worst_case > e + r.bound_term + 1e-9) ++r.violations;
  }
  r.distributions_checked = samples;
  return r;
}

}  // namespace wasecom
