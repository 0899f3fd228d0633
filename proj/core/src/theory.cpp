#include "wasecom/theory.hpp"

#include <algorithm>
#include <cmath>

namespace wasecom {

namespace {

DiscreteDistribution weighted(std::vector<Point> pts, std::vector<double> w) {
  DiscreteDistribution d;
  d.support = std::move(pts);
  d.weights = std::move(w);
  return d;
}

}  // namespace

std::vector<DualityInstance> duality_instances() {
  const Grid wide = Grid::line(-2.0, 2.0, 401);
  const Grid plane = Grid::square(-1.5, 1.5, 31);
  std::vector<DualityInstance> out;
  out.push_back({"point-mass-linear", DiscreteDistribution::point_mass({0.0}),
                 [](std::span<const double> x) { return x[0]; }, 0.5, Grid::line(-1.0, 1.0, 201), 0.5});
  out.push_back({"two-point-slope2", DiscreteDistribution::uniform({{-0.5}, {0.5}}),
                 [](std::span<const double> x) { return 2.0 * x[0]; }, 0.3, wide, 0.6});
  out.push_back({"absolute-value", DiscreteDistribution::uniform({{-0.5}, {0.0}, {0.5}}),
                 [](std::span<const double> x) { return std::abs(x[0]); }, 0.2, wide, std::nullopt});
  out.push_back({"sine", DiscreteDistribution::uniform({{-1.0}, {0.0}, {1.0}}),
                 [](std::span<const double> x) { return 1.0 + std::sin(2.0 * x[0]); }, 0.25, wide, std::nullopt});
  out.push_back({"concave-bump", DiscreteDistribution::point_mass({0.2}),
                 [](std::span<const double> x) { return 2.0 - (x[0] - 1.0) * (x[0] - 1.0); }, 0.4, wide, std::nullopt});
  out.push_back({"log-quadratic", weighted({{-1.0}, {0.3}, {1.2}}, {0.2, 0.3, 0.5}),
                 [](std::span<const double> x) { return std::log1p(x[0] * x[0]); }, 0.3, wide, std::nullopt});
  out.push_back({"hinge", DiscreteDistribution::uniform({{0.5}, {1.5}}),
                 [](std::span<const double> x) { return std::max(0.0, 1.0 - x[0]); }, 0.5, wide, std::nullopt});
  out.push_back({"plane-linear", DiscreteDistribution::point_mass({0.0, 0.0}),
                 [](std::span<const double> x) { return x[0] + 2.0 * x[1]; }, 0.5, plane, std::nullopt});
  out.push_back({"plane-norm", DiscreteDistribution::uniform({{0.5, 0.0}, {-0.5, 0.5}}),
                 [](std::span<const double> x) { return std::sqrt(x[0] * x[0] + x[1] * x[1]); }, 0.3, plane,
                 std::nullopt});
  out.push_back({"plane-bowl", DiscreteDistribution::uniform({{0.0, 0.0}, {0.5, -0.5}, {-0.3, 0.2}}),
                 [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; }, 0.2, plane, std::nullopt});
  out.push_back({"plane-tanh", DiscreteDistribution::uniform({{0.0, 0.0}, {0.5, 0.5}, {-0.5, 0.2}, {1.0, -0.4}}),
                 [](std::span<const double> x) { return 1.0 + std::tanh(x[0] - x[1]); }, 0.4, plane, std::nullopt});
  return out;
}

DualityReport check_duality(const DualityInstance& inst, std::size_t random_distributions, std::uint64_t seed) {
  DualityReport r;
  r.name = inst.name;
  r.primal = worst_case_risk(inst.p, inst.loss, inst.radius, inst.grid).value;
  const DualValue dv = dual_value(inst.p, inst.loss, inst.radius, inst.grid);
  r.dual = dv.value;
  r.lambda_star = dv.lambda_star;
  r.relative_gap = std::abs(r.dual - r.primal) / std::max(std::abs(r.primal), 1e-300);
  for (std::size_t k = 0; k < random_distributions; ++k) {
    const auto q = sample_ball_distribution(inst.p, inst.radius, inst.grid, seed + k);
    if (q.expectation(inst.loss) > r.dual + 1e-9) ++r.upper_bound_violations;
  }
  r.distributions_checked = random_distributions;
  return r;
}

std::vector<LossFamily> lemma1_families() {
  std::vector<LossFamily> out;
  out.push_back({"linear-slopes",
                 DiscreteDistribution::uniform({{-0.5}, {0.5}}),
                 {[](std::span<const double> x) { return x[0]; }, [](std::span<const double> x) { return 2.0 * x[0]; },
                  [](std::span<const double> x) { return -x[0]; }},
                 0.3,
                 Grid::line(-2.0, 2.0, 401),
                 1.0});
  out.push_back({"smooth-1d",
                 DiscreteDistribution::uniform({{-0.3}, {0.4}, {1.0}}),
                 {[](std::span<const double> x) { return std::sin(x[0]); },
                  [](std::span<const double> x) { return std::cos(x[0]); },
                  [](std::span<const double> x) { return 0.5 * x[0]; }},
                 0.25,
                 Grid::line(-2.0, 2.0, 401),
                 1.5});
  out.push_back({"plane-mixed",
                 DiscreteDistribution::uniform({{0.0, 0.0}, {0.5, -0.5}, {-0.5, 0.3}}),
                 {[](std::span<const double> x) { return x[0] + x[1]; },
                  [](std::span<const double> x) { return x[0] - x[1]; },
                  [](std::span<const double> x) { return 0.5 * x[0]; },
                  [](std::span<const double> x) { return std::tanh(x[0]); }},
                 0.2,
                 Grid::square(-1.5, 1.5, 31),
                 1.0});
  return out;
}

std::vector<TheoryCheckReport> check_family(const LossFamily& family, const Lemma1Options& options) {
  double lipschitz = 0.0;
  for (const auto& h : family.members) lipschitz = std::max(lipschitz, estimate_lipschitz(h, family.grid));
  const double lambda = family.radius > 0.0 ? family.lambda_factor * lipschitz / family.radius : 0.0;
  std::vector<TheoryCheckReport> out;
  for (std::size_t m = 0; m < family.members.size(); ++m) {
    out.push_back(check_lemma1(family.name + "[" + std::to_string(m) + "]", family.p, family.members, m,
                               family.radius, lambda, lipschitz, family.grid, options));
  }
  return out;
}

}  // namespace wasecom
