#include <stdexcept>
#include <cmath>
#include <set>

#include "doctest.h"
#include "wasecom/theory.hpp"

using namespace wasecom;

TEST_CASE("bundled duality instances are well formed and distinct") {
  const auto insts = duality_instances();
  CHECK(insts.size() == 11);
  std::set<std::string> names;
  for (const auto& inst : insts) {
    names.insert(inst.name);
    CHECK_NOTHROW(inst.p.validate());
    CHECK(inst.radius > 0.0);
    for (const auto& x : inst.p.support) CHECK(inst.grid.find(x).has_value());
  }
  CHECK(names.size() == insts.size());
}

TEST_CASE("duality holds within 2% on each instance") {
  for (const auto& inst : duality_instances()) {
    const auto r = check_duality(inst);
    INFO(inst.name << " primal=" << r.primal << " dual=" << r.dual);
    CHECK(r.relative_gap <= 0.02);
    // Weak duality: the gridded dual never undercuts the primal.
    CHECK(r.dual >= r.primal - 1e-9);
  }
}

TEST_CASE("closed-form instances") {
  const auto insts = duality_instances();
  const auto r0 = check_duality(insts[0]);
  CHECK(insts[0].name == "point-mass-linear");
  CHECK(r0.primal == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r0.dual == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(r0.lambda_star - 1.0) <= 0.01);
  const auto r1 = check_duality(insts[1]);
  CHECK(r1.primal == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("check_duality is deterministic in its seed") {
  const auto inst = duality_instances()[2];
  const auto a = check_duality(inst, 40, 5);
  const auto b = check_duality(inst, 40, 5);
  CHECK(a.primal == b.primal);
  CHECK(a.dual == b.dual);
  CHECK(a.distributions_checked == 40);
}

TEST_CASE("family multipliers follow L / rho") {
  for (const auto& fam : lemma1_families()) {
    double lip = 0.0;
    for (const auto& h : fam.members) lip = std::max(lip, estimate_lipschitz(h, fam.grid));
    for (const auto& r : check_family(fam)) {
      CHECK(r.lipschitz == lip);
      CHECK(r.lambda == doctest::Approx(fam.lambda_factor * lip / fam.radius));
      CHECK(r.robustness_term == doctest::Approx(2.0 * lip * fam.radius));
      CHECK(r.multiplier_term == doctest::Approx(std::abs(r.lambda - r.lambda_star) * fam.radius * fam.radius));
    }
  }
}
