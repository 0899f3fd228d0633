#pragma once

// Bundled small instances for the duality and excess-risk checks, shared by
// the check-theory command and the test suites.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wasecom/ot.hpp"

namespace wasecom {

struct DualityInstance {
  std::string name;
  DiscreteDistribution p;
  PointLoss loss;
  double radius = 0.0;
  Grid grid;
  /// Closed-form worst-case value, when one is known.
  std::optional<double> expected;
};

std::vector<DualityInstance> duality_instances();

struct DualityReport {
  std::string name;
  double primal = 0.0;
  double dual = 0.0;
  double lambda_star = 0.0;
  double relative_gap = 0.0;  // |dual - primal| / |primal|
  std::size_t distributions_checked = 0;
  std::size_t upper_bound_violations = 0;  // Q with E_Q[loss] > dual
};

/// Primal LP against the lambda-grid dual, plus the upper-bound direction on
/// `random_distributions` sampled Q in the ball.
DualityReport check_duality(const DualityInstance& instance, std::size_t random_distributions = 100,
                            std::uint64_t seed = 11);

struct LossFamily {
  std::string name;
  DiscreteDistribution p;
  std::vector<PointLoss> members;
  double radius = 0.0;
  Grid grid;
  /// Multiplier as a multiple of L / rho.
  double lambda_factor = 1.0;
};

std::vector<LossFamily> lemma1_families();

/// Runs check_lemma1 on every member, with L estimated on the grid as the
/// largest member constant and lambda = lambda_factor * L / rho.
std::vector<TheoryCheckReport> check_family(const LossFamily& family, const Lemma1Options& options = {});

}  // namespace wasecom
