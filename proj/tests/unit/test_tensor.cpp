#include <stdexcept>
#include <cmath>
#include <random>

#include "doctest.h"
#include "wasecom/gradcheck.hpp"
#include "wasecom/tensor.hpp"

using namespace wasecom;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool grad = true) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(numel(shape));
  for (auto& e : v) e = g(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

}  // namespace

TEST_CASE("matmul by the identity returns the operand") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  CHECK(matmul(a, eye).to_vector() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("relu clamps negatives and keeps zero") {
  CHECK(relu(Tensor::from({3}, {-1, 0, 2})).to_vector() == std::vector<double>{0, 0, 2});
}

TEST_CASE("mean times count equals sum") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  CHECK(mean(x).item() * 3.0 == 6.0);
  CHECK(sum(x).item() == 6.0);
}

TEST_CASE("gradient of sum of squares") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  sum(square(x)).backward();
  CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("loss without dependence leaves a zero gradient") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor c = add(Tensor::scalar(5.0, true), scale(sum(x), 0.0));
  c.backward();
  CHECK(x.grad() == std::vector<double>{0, 0, 0});
  Tensor y = Tensor::from({2}, {1, 2}, true);
  CHECK(y.grad() == std::vector<double>{0, 0});
  CHECK_FALSE(y.has_grad());
}

TEST_CASE("two-layer network agrees with central differences") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor w1 = random_tensor({5, 6}, rng);
  Tensor b1 = random_tensor({6}, rng);
  Tensor w2 = random_tensor({6, 2}, rng);
  auto loss = [&] { return mean(square(matmul(tanh(add(matmul(x, w1), b1)), w2))); };
  const auto r = check_gradients("mlp", loss, {x, w1, b1, w2});
  CHECK(r.ok());
  CHECK(r.parameters == 20 + 30 + 6 + 12);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("every differentiable op passes a gradient check") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor row = random_tensor({4}, rng);
  Tensor pos = Tensor::from({3, 4}, {0.5, 1.0, 1.5, 2.0, 0.7, 0.9, 1.1, 1.3, 2.5, 0.4, 0.8, 1.9}, true);
  const std::vector<std::uint32_t> idx{1, 3, 0};
  struct Case {
    const char* name;
    std::function<Tensor()> f;
    std::vector<Tensor> leaves;
  };
  std::vector<Case> cases{
      {"add-broadcast", [&] { return sum(square(add(a, row))); }, {a, row}},
      {"sub", [&] { return sum(square(sub(a, b))); }, {a, b}},
      {"mul", [&] { return sum(mul(a, b)); }, {a, b}},
      {"div", [&] { return sum(div(a, pos)); }, {a, pos}},
      {"exp", [&] { return sum(exp(scale(a, 0.5))); }, {a}},
      {"log", [&] { return sum(log(pos)); }, {pos}},
      {"sqrt", [&] { return sum(sqrt(pos)); }, {pos}},
      {"neg-scalar", [&] { return mean(add_scalar(neg(a), 2.0)); }, {a}},
      {"sum-axis", [&] { return sum(square(sum_axis(a, 0))); }, {a}},
      {"mean-axis", [&] { return sum(square(mean_axis(a, 1, true))); }, {a}},
      {"logsumexp", [&] { return sum(logsumexp(a, 1)); }, {a}},
      {"log-softmax", [&] { return sum(mul(log_softmax(a), b)); }, {a}},
      {"reshape", [&] { return sum(square(reshape(a, {4, 3}))); }, {a}},
      {"stack", [&] {
         std::vector<Tensor> parts{a, b};
         return sum(square(stack(parts)));
       }, {a, b}},
      {"pick", [&] { return sum(square(pick(a, idx))); }, {a}},
      {"embedding", [&] { return sum(square(embedding(a, std::vector<std::uint32_t>{1, 2, 0}))); }, {a}},
  };
  for (auto& c : cases) {
    const auto r = check_gradients(c.name, c.f, c.leaves);
    INFO(c.name);
    CHECK(r.ok());
  }
}

TEST_CASE("a graph can only be differentiated once") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor l = sum(square(x));
  l.backward();
  CHECK_THROWS_AS(l.backward(), std::logic_error);
}

TEST_CASE("backward needs a scalar") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(square(x).backward(), ShapeError);
}

TEST_CASE("gradients accumulate linearly") {
  std::mt19937_64 rng(9);
  Tensor x = random_tensor({2, 3}, rng);
  Tensor w = random_tensor({3, 2}, rng);
  auto l1 = [&] { return sum(square(matmul(x, w))); };
  auto l2 = [&] { return sum(tanh(matmul(x, w))); };
  l1().backward();
  const auto g1 = w.grad();
  w.zero_grad();
  x.zero_grad();
  l2().backward();
  const auto g2 = w.grad();
  w.zero_grad();
  add(scale(l1(), 2.0), scale(l2(), -3.0)).backward();
  const auto g = w.grad();
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(2.0 * g1[i] - 3.0 * g2[i]).epsilon(1e-12));
}

TEST_CASE("identical inputs give bit-identical values and gradients") {
  auto run = [] {
    std::mt19937_64 rng(21);
    Tensor x = random_tensor({3, 3}, rng);
    Tensor w = random_tensor({3, 3}, rng);
    Tensor l = mean(logsumexp(matmul(tanh(x), w), 1));
    l.backward();
    auto out = w.grad();
    out.push_back(l.item());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("shape and domain errors") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0}), ShapeError);
  CHECK_THROWS_AS(log(Tensor::from({1}, {0.0})), std::domain_error);
  CHECK_THROWS_AS(sqrt(Tensor::from({1}, {-1.0})), std::domain_error);
  CHECK_THROWS_AS(square(Tensor::zeros({2})).mutable_data(), std::logic_error);
}

TEST_CASE("values stay finite and grads match value length") {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({5, 4}, rng);
  Tensor y = log_softmax(scale(x, 30.0));
  for (double v : y.data()) CHECK(std::isfinite(v));
  Tensor l = sum(logsumexp(scale(x, 500.0), 0));
  CHECK(std::isfinite(l.item()));
  l.backward();
  CHECK(x.grad().size() == x.size());
}

TEST_CASE("detach drops history") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor d = square(x).detach();
  CHECK(d.is_leaf());
  CHECK_FALSE(d.requires_grad());
  CHECK(d.to_vector() == std::vector<double>{1, 4});
}

TEST_CASE("random suite: all fifty graphs pass") {
  const auto suite = random_gradcheck_suite(50, 2024);
  REQUIRE(suite.size() == 50);
  for (const auto& c : suite) {
    const auto r = check_gradients(c.name, c.loss, c.leaves);
    INFO(c.name);
    CHECK(r.ok());
    CHECK(r.parameters <= 1000);
  }
}
