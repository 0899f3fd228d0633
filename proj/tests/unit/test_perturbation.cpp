#include <stdexcept>
#include <cmath>
#include <random>

#include "doctest.h"
#include "wasecom/perturbation.hpp"

using namespace wasecom;

namespace {

double row_norm(const Tensor& a, const Tensor& b, std::size_t r) {
  const std::size_t cols = a.size() / a.dim(0);
  double acc = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    const double d = a.data()[r * cols + c] - b.data()[r * cols + c];
    acc += d * d;
  }
  return std::sqrt(acc);
}

RowObjective linear_probe(std::vector<double> w) {
  return [w](const Tensor& x) {
    return sum_axis(mul(x, Tensor::from({w.size()}, w)), 1);
  };
}

}  // namespace

TEST_CASE("FGSM follows the gradient sign") {
  const Tensor x = Tensor::from({1, 2}, {0, 0});
  PerturbSpec spec{PerturbMethod::FGSM};
  spec.epsilon_inf = 0.1;
  const Tensor xt = fgsm(linear_probe({1, -2}), x, spec);
  CHECK(xt.to_vector() == std::vector<double>{0.1, -0.1});

  spec.radius = 0.05;
  const Tensor proj = fgsm(linear_probe({1, -2}), x, spec);
  CHECK(row_norm(proj, x, 0) == doctest::Approx(0.05).epsilon(1e-14));

  spec.epsilon_inf = 0.0;
  CHECK(fgsm(linear_probe({1, -2}), x, spec).to_vector() == x.to_vector());
}

TEST_CASE("one PGD step is an L2-normalized gradient step") {
  const Tensor x = Tensor::from({1, 2}, {0, 0});
  PerturbSpec spec{PerturbMethod::PGD};
  spec.steps = 1;
  spec.step_size = 0.5;
  const Tensor xt = pgd(linear_probe({3, -4}), x, spec);
  CHECK(xt.data()[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(xt.data()[1] == doctest::Approx(-0.4).epsilon(1e-14));
}

TEST_CASE("PGD converges to an interior maximizer of a concave quadratic") {
  const std::vector<double> target{0.2, -0.1, 0.05};
  RowObjective concave = [&](const Tensor& x) {
    return neg(sum_axis(square(sub(x, Tensor::from({3}, target))), 1));
  };
  const Tensor x = Tensor::from({1, 3}, {0, 0, 0});
  PerturbSpec spec{PerturbMethod::PGD};
  spec.radius = 1.0;
  spec.steps = 50;
  spec.step_size = 0.1;
  PgdTrace trace;
  const Tensor xt = pgd(concave, x, spec, &trace);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(xt.data()[i] - target[i]) <= 1e-3);
  for (std::size_t i = 1; i < trace.best_total.size(); ++i) CHECK(trace.best_total[i] >= trace.best_total[i - 1]);
}

TEST_CASE("Gaussian samples") {
  const Tensor x = Tensor::from({1, 4}, {0.1, 0.2, 0.3, 0.4});
  PerturbSpec spec{PerturbMethod::GaussianSample};
  spec.radius = 0.0;
  spec.samples = 3;
  Rng rng(1);
  for (const auto& s : gaussian_samples(x, spec, rng)) CHECK(s.to_vector() == x.to_vector());
  spec.samples = 1;
  CHECK(gaussian_samples(x, spec, rng).size() == 1);

  spec.radius = 0.7;
  spec.samples = 10000;
  double acc = 0.0;
  for (const auto& s : gaussian_samples(x, spec, rng)) acc += std::pow(row_norm(s, x, 0), 2);
  CHECK(std::abs(acc / 10000.0 / 0.49 - 1.0) <= 0.03);
}

TEST_CASE("ball projection") {
  const Tensor c = Tensor::from({1, 2}, {1, 1});
  const Tensor far = Tensor::from({1, 2}, {1 + 2 * 0.6, 1 + 2 * 0.8});
  const Tensor p = project_ball(far, c, 1.0);
  CHECK(p.data()[0] == doctest::Approx(1.6).epsilon(1e-14));
  CHECK(p.data()[1] == doctest::Approx(1.8).epsilon(1e-14));
  const Tensor inside = Tensor::from({1, 2}, {1.1, 0.9});
  CHECK(project_ball(inside, c, 1.0).to_vector() == inside.to_vector());
  CHECK(project_ball(far, c, 0.0).to_vector() == c.to_vector());
}

TEST_CASE("budget and effectiveness on random trials") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  int ordered = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> w(12), xv(12);
    for (auto& v : w) v = g(rng);
    for (auto& v : xv) v = g(rng);
    const Tensor wt = Tensor::from({3, 4}, w);
    RowObjective obj = [&](const Tensor& x) { return sum_axis(tanh(mul(x, wt)), 1); };
    const Tensor x = Tensor::from({3, 4}, xv);
    PerturbSpec f{PerturbMethod::FGSM};
    f.radius = 0.3;
    f.epsilon_inf = 0.1;
    PerturbSpec p{PerturbMethod::PGD};
    p.radius = 0.3;
    p.step_size = 0.15;
    p.steps = 10;
    const Tensor xf = fgsm(obj, x, f);
    const Tensor xp = pgd(obj, x, p);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(row_norm(xf, x, r) <= 0.3 + 1e-9);
      CHECK(row_norm(xp, x, r) <= 0.3 + 1e-9);
    }
    const double l0 = sum(obj(x)).item(), lf = sum(obj(xf)).item(), lp = sum(obj(xp)).item();
    if (lp >= lf && lf >= l0 - 1e-9) ++ordered;
  }
  CHECK(ordered >= trials * 9 / 10);
}

TEST_CASE("perturbation generators leave outside tensors alone") {
  Tensor w = Tensor::from({2}, {0.5, -1.0}, true);
  RowObjective obj = [&](const Tensor& x) { return sum_axis(mul(x, w), 1); };
  const auto before = w.to_vector();
  w.set_requires_grad(false);
  PerturbSpec p{PerturbMethod::PGD};
  pgd(obj, Tensor::from({1, 2}, {0, 0}), p);
  CHECK(w.to_vector() == before);
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("invalid specs are rejected") {
  PerturbSpec s{PerturbMethod::PGD};
  s.steps = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = PerturbSpec{PerturbMethod::PGD};
  s.radius = -1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_perturb_method("cw"), std::invalid_argument);
}
