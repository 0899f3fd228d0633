#include "wasecom/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wasecom/channel.hpp"
#include "wasecom/models.hpp"
#include "wasecom/objectives.hpp"

namespace wasecom {

GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                std::vector<Tensor> leaves, const GradCheckTolerance& tol) {
  GradCheckResult r;
  r.name = name;
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) analytic.push_back(leaf.grad());
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double orig = values[k];
      values[k] = orig + tol.step;
      const double up = loss().item();
      values[k] = orig - tol.step;
      const double down = loss().item();
      values[k] = orig;
      const double numeric = (up - down) / (2.0 * tol.step);
      const double a = analytic[l][k];
      const double err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      r.max_abs_error = std::max(r.max_abs_error, err);
      if (scale > 0.0) r.max_rel_error = std::max(r.max_rel_error, err / scale);
      if (err > std::max(tol.absolute, tol.relative * scale)) ++r.failures;
      ++r.parameters;
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return r;
}

namespace {

// Values bounded away from zero so kinks (relu) and poles stay clear of the
// finite-difference stencil.
Tensor random_leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) {
    do x = u(rng);
    while (std::abs(x) < 0.05);
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::size_t dim_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

GradCheckCase make_case(std::size_t index, Rng& rng) {
  const std::size_t kind = index % 10;
  const std::string name = "graph" + std::to_string(index);
  const std::size_t n = dim_between(rng, 2, 4);
  const std::size_t d = dim_between(rng, 2, 5);
  const std::size_t h = dim_between(rng, 2, 6);
  switch (kind) {
    case 0: {  // tanh network with squared error
      Tensor x = random_leaf({n, d}, rng), w1 = random_leaf({d, h}, rng), b1 = random_leaf({h}, rng);
      Tensor w2 = random_leaf({h, 2}, rng), b2 = random_leaf({2}, rng), y = random_leaf({n, 2}, rng);
      return {name + "/tanh-mlp",
              [=] { return mean(square(sub(add(matmul(tanh(add(matmul(x, w1), b1)), w2), b2), y))); },
              {x, w1, b1, w2, b2}};
    }
    case 1: {  // relu network reduced along an axis
      Tensor x = random_leaf({n, d}, rng), w1 = random_leaf({d, h}, rng), w2 = random_leaf({h, 3}, rng);
      return {name + "/relu-mlp", [=] { return sum(square(sum_axis(matmul(relu(matmul(x, w1)), w2), 1))); },
              {x, w1, w2}};
    }
    case 2: {  // elementwise ops with broadcasting
      Tensor a = random_leaf({n, d}, rng), b = random_leaf({d}, rng), c = random_leaf({n, 1}, rng);
      return {name + "/elementwise",
              [=] {
                Tensor t = div(mul(a, exp(scale(b, 0.3))), add_scalar(square(c), 1.0));
                Tensor u = add(log(add_scalar(square(a), 1.0)), sqrt(add_scalar(square(b), 0.5)));
                return add(sum(t), mean(sub(u, neg(c))));
              },
              {a, b, c}};
    }
    case 3: {  // logsumexp on both axes and mean_axis
      Tensor a = random_leaf({n, d}, rng, -2.0, 2.0);
      return {name + "/logsumexp",
              [=] { return add(sum(logsumexp(a, 0)), sum(mul(logsumexp(a, 1, true), mean_axis(a, 1, true)))); },
              {a}};
    }
    case 4: {  // cross-entropy head
      const std::size_t v = dim_between(rng, 3, 6);
      Tensor x = random_leaf({n, d}, rng), w = random_leaf({d, v}, rng);
      std::vector<std::uint32_t> labels(n);
      for (auto& l : labels) l = static_cast<std::uint32_t>(dim_between(rng, 0, v - 1));
      return {name + "/cross-entropy", [=] { return neg(mean(pick(log_softmax(matmul(x, w)), labels))); }, {x, w}};
    }
    case 5: {  // embedding lookup, reshape, matmul
      const std::size_t v = dim_between(rng, 3, 6), len = dim_between(rng, 2, 3);
      Tensor table = random_leaf({v, d}, rng), w = random_leaf({len * d, 2}, rng);
      std::vector<std::uint32_t> ids(n * len);
      for (auto& t : ids) t = static_cast<std::uint32_t>(dim_between(rng, 0, v - 1));
      return {name + "/embedding",
              [=] { return sum(square(matmul(reshape(embedding(table, ids), {n, len * d}), w))); },
              {table, w}};
    }
    case 6: {  // stack along a new axis
      Tensor a = random_leaf({n, d}, rng), b = random_leaf({n, d}, rng);
      return {name + "/stack",
              [=] {
                std::vector<Tensor> parts{a, mul(a, b), neg(b)};
                return sum(square(mean_axis(stack(parts), 0)));
              },
              {a, b}};
    }
    case 7: {  // power-normalized Rayleigh channel layer
      Tensor x = random_leaf({n, d}, rng), w = random_leaf({d, h}, rng), v = random_leaf({h, 2}, rng);
      Tensor t = random_leaf({n, 2}, rng);
      ChannelConfig cfg{ChannelKind::Rayleigh, 5.0, 0};
      const ChannelRealization real = sample_realization(cfg, n, h, 1.0, rng);
      return {name + "/channel",
              [=] {
                Tensor u = matmul(x, w);
                u = div(u, sqrt(add_scalar(mean_axis(square(u), 1, true), 1e-12)));
                return mean(square(sub(matmul(apply_channel(u, real), v), t)));
              },
              {x, w, v}};
    }
    case 8: {  // smoothed dual objective over Gaussian candidates
      Tensor x = random_leaf({n, d}, rng), w = random_leaf({d, 1}, rng);
      const std::size_t k = dim_between(rng, 2, 4);
      std::vector<Tensor> deltas;
      for (std::size_t i = 0; i < k; ++i) deltas.push_back(scale(random_leaf({n, d}, rng), 0.2).detach());
      const double lambda = 0.7, eps = 0.5;
      return {name + "/lse-objective",
              [=] {
                std::vector<Tensor> rows;
                for (const auto& delta : deltas) {
                  Tensor xt = add(x, delta);
                  Tensor loss = reshape(square(tanh(matmul(xt, w))), {n});
                  // The cost enters as a constant per candidate, as in the trainer.
                  Tensor cost = Tensor::from({n}, transport_cost(xt, x));
                  rows.push_back(sub(loss, scale(cost, lambda)));
                }
                return mean(lse_smooth(stack(rows), eps));
              },
              {x, w}};
    }
    default: {  // full model pipelines, image and text heads
      const bool text = (index / 10) % 2 == 1;
      ModelDims dims;
      dims.task = text ? TaskKind::TextReconstruction : TaskKind::ImageReconstruction;
      dims.input_dim = text ? 3 : 6;
      dims.semantic_dim = 3;
      dims.signal_dim = 4;
      dims.hidden_dim = 5;
      dims.hidden_layers = 1;
      dims.vocab_size = text ? 5 : 0;
      dims.seq_len = text ? 2 : 0;
      auto bundle = std::make_shared<ModelBundle>(ModelBundle::create(dims, index + 1));
      ChannelConfig cfg{ChannelKind::AWGN, 10.0, 0};
      const ChannelRealization real = sample_realization(cfg, n * dims.rows_per_sample(), dims.signal_dim, 1.0, rng);
      std::vector<std::uint32_t> tokens(n * dims.seq_len);
      for (auto& t : tokens) t = static_cast<std::uint32_t>(dim_between(rng, 0, 4));
      Tensor x = text ? Tensor() : random_leaf({n, dims.input_dim}, rng, 0.05, 1.0);
      std::vector<Tensor> leaves = bundle->all_parameters();
      if (!text) leaves.push_back(x);
      return {name + (text ? "/text-pipeline" : "/image-pipeline"),
              [=] {
                SemanticBatch batch = text ? make_text_batch(*bundle, tokens) : make_image_batch(x);
                return mean(semantic_row_loss(*bundle, batch, batch.features, real));
              },
              leaves};
    }
  }
}

}  // namespace

std::vector<GradCheckCase> random_gradcheck_suite(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckCase> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_case(i, rng));
  return out;
}

}  // namespace wasecom
