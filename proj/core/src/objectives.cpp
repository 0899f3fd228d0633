#include "wasecom/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wasecom {

void RobustnessConfig::validate() const {
  if (!(rho >= 0.0) || !(mu >= 0.0)) throw std::invalid_argument("robustness: radii must be >= 0");
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("robustness: dual variables must be >= 0");
  if (!(epsilon_temp > 0.0)) throw std::invalid_argument("robustness: epsilon_temp must be > 0");
  if (!(dual_lr >= 0.0)) throw std::invalid_argument("robustness: dual_lr must be >= 0");
}

std::vector<double> transport_cost(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("transport_cost: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                     " differ");
  }
  const std::size_t rows = a.rank() == 1 ? 1 : a.dim(0);
  const std::size_t cols = a.size() / rows;
  auto da = a.data();
  auto db = b.data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = da[r * cols + c] - db[r * cols + c];
      acc += d * d;
    }
    out[r] = acc;
  }
  return out;
}

Tensor transport_cost_rows(const Tensor& a, const Tensor& b) {
  Tensor d = sub(a, b);
  if (d.rank() == 1) d = reshape(d, {1, d.size()});
  if (d.rank() > 2) d = reshape(d, {d.dim(0), d.size() / d.dim(0)});
  return sum_axis(square(d), 1);
}

double lse_smooth(std::span<const double> values, double epsilon_temp) {
  if (values.empty()) throw std::invalid_argument("lse_smooth: no values");
  if (!(epsilon_temp > 0.0)) throw std::invalid_argument("lse_smooth: epsilon_temp must be > 0");
  const double top = *std::max_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp((v - top) / epsilon_temp);
  return top + epsilon_temp * (std::log(acc) - std::log(static_cast<double>(values.size())));
}

Tensor lse_smooth(const Tensor& values, double epsilon_temp) {
  if (!(epsilon_temp > 0.0)) throw std::invalid_argument("lse_smooth: epsilon_temp must be > 0");
  if (values.rank() != 2) throw ShapeError("lse_smooth: expected [K,rows], got " + shape_string(values.shape()));
  const double log_k = std::log(static_cast<double>(values.dim(0)));
  Tensor lse = logsumexp(scale(values, 1.0 / epsilon_temp), 0);
  return scale(add_scalar(lse, -log_k), epsilon_temp);
}

SemanticBatch make_image_batch(const Tensor& images) {
  return {TaskKind::ImageReconstruction, images, {}};
}

SemanticBatch make_text_batch(const ModelBundle& bundle, std::vector<std::uint32_t> tokens) {
  SemanticBatch b;
  b.task = TaskKind::TextReconstruction;
  b.features = embed_tokens(bundle, tokens);
  b.tokens = std::move(tokens);
  return b;
}

Tensor semantic_row_loss(const ModelBundle& bundle, const SemanticBatch& batch, const Tensor& x_tilde,
                         const ChannelRealization& channel) {
  Tensor s = semantic_encode(bundle, x_tilde);
  Tensor z = apply_channel(channel_encode(bundle, s), channel);
  Tensor out = semantic_decode(bundle, channel_decode(bundle, z));
  if (batch.task == TaskKind::TextReconstruction) return per_sample_cross_entropy(batch.tokens, out);
  return per_sample_mse(x_tilde, out);
}

Tensor channel_row_loss(const ModelBundle& bundle, const Tensor& s, const Tensor& z_tilde) {
  return per_sample_mse(s, channel_decode(bundle, z_tilde));
}

namespace {

// Shared machinery of both levels. `evaluate(candidate)` returns per-row loss
// for a candidate that may carry graph history; `anchor` is the graph-carrying
// clean point and `anchor_const` its detached copy.
template <class Loss>
DualObjectiveValue penalized_dual(const ModelBundle& bundle, Loss&& evaluate, const Tensor& anchor,
                                  double radius, double multiplier, const RobustnessConfig& robustness,
                                  PerturbSpec spec, Rng& rng) {
  if (multiplier < 0.0) throw std::invalid_argument("dual objective: multiplier must be >= 0 (project first)");
  spec.radius = radius;
  spec.validate();
  const Tensor anchor_const = anchor.detach();
  const std::size_t rows = anchor.rank() == 1 ? 1 : anchor.dim(0);
  const Shape cost_shape{rows};

  DualObjectiveValue out;
  out.penalty_term = multiplier * radius * radius;

  if (robustness.use_lse) {
    auto candidates = gaussian_samples(anchor_const, spec, rng);
    std::vector<Tensor> values;
    std::vector<std::vector<double>> costs;
    values.reserve(candidates.size());
    for (const auto& cand : candidates) {
      Tensor shifted = add(anchor, sub(cand, anchor_const));
      auto c = transport_cost(cand, anchor_const);
      Tensor ct = Tensor::from(cost_shape, c);
      values.push_back(sub(evaluate(shifted), scale(ct, multiplier)));
      costs.push_back(std::move(c));
    }
    Tensor stacked = stack(values);
    Tensor per_row = lse_smooth(stacked, robustness.epsilon_temp);
    Tensor expectation = mean(per_row);
    // Soft-argmax weighted cost, the multiplier derivative of the smoothed sup.
    auto v = stacked.data();
    auto smoothed = per_row.data();
    const double k = static_cast<double>(candidates.size());
    double weighted = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double w = std::exp((v[i * rows + r] - smoothed[r]) / robustness.epsilon_temp) / k;
        weighted += w * costs[i][r];
      }
    }
    out.mean_cost = weighted / static_cast<double>(rows);
    out.expectation_term = expectation.item();
    out.total = add(expectation, Tensor::scalar(out.penalty_term));
    return out;
  }

  Tensor worst = anchor_const;
  const bool attack = spec.method != PerturbMethod::None && radius > 0.0;
  if (attack) {
    FrozenParameters frozen(bundle);
    RowObjective objective = [&](const Tensor& cand) {
      return sub(evaluate(cand), scale(transport_cost_rows(cand, anchor_const), multiplier));
    };
    if (spec.method == PerturbMethod::GaussianSample) {
      // Hard sup over the sampled candidates, row by row.
      auto candidates = gaussian_samples(anchor_const, spec, rng);
      const std::size_t cols = anchor.size() / rows;
      std::vector<double> best = anchor_const.to_vector();
      std::vector<double> best_value = objective(anchor_const).to_vector();
      for (const auto& cand : candidates) {
        auto val = objective(cand).to_vector();
        auto d = cand.data();
        for (std::size_t r = 0; r < rows; ++r) {
          if (val[r] > best_value[r]) {
            best_value[r] = val[r];
            std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                        best.begin() + static_cast<std::ptrdiff_t>(r * cols));
          }
        }
      }
      worst = Tensor::from(anchor.shape(), std::move(best));
    } else {
      worst = perturb(objective, anchor_const, spec);
    }
  }

  const auto cost = transport_cost(worst, anchor_const);
  double cost_sum = 0.0;
  for (double c : cost) cost_sum += c;
  out.mean_cost = cost_sum / static_cast<double>(rows);

  Tensor candidate = attack ? add(anchor, sub(worst, anchor_const)) : anchor;
  Tensor per_row = sub(evaluate(candidate), scale(Tensor::from(cost_shape, cost), multiplier));
  Tensor expectation = mean(per_row);
  out.expectation_term = expectation.item();
  out.total = add(expectation, Tensor::scalar(out.penalty_term));
  out.worst_case = worst;
  return out;
}

}  // namespace

DualObjectiveValue inner_dual_loss(const ModelBundle& bundle, const SemanticBatch& batch,
                                   const ChannelRealization& channel, const RobustnessConfig& robustness,
                                   const PerturbSpec& perturb, Rng& rng) {
  robustness.validate();
  auto evaluate = [&](const Tensor& x_tilde) { return semantic_row_loss(bundle, batch, x_tilde, channel); };
  return penalized_dual(bundle, evaluate, batch.features, robustness.rho, robustness.lambda, robustness, perturb,
                        rng);
}

DualObjectiveValue outer_dual_loss(const ModelBundle& bundle, const Tensor& s, const ChannelRealization& channel,
                                   const RobustnessConfig& robustness, const PerturbSpec& perturb, Rng& rng) {
  robustness.validate();
  const Tensor s_const = s.detach();
  Tensor z = apply_channel(channel_encode(bundle, s_const), channel);
  auto evaluate = [&](const Tensor& z_tilde) { return channel_row_loss(bundle, s_const, z_tilde); };
  return penalized_dual(bundle, evaluate, z, robustness.mu, robustness.gamma, robustness, perturb, rng);
}

double dual_gradient(double radius, double mean_cost) { return radius * radius - mean_cost; }

RobustnessConfig update_duals(RobustnessConfig cfg, std::optional<double> lambda_grad,
                              std::optional<double> gamma_grad, double lr) {
  if (lambda_grad) cfg.lambda = std::max(0.0, cfg.lambda - lr * *lambda_grad);
  if (gamma_grad) cfg.gamma = std::max(0.0, cfg.gamma - lr * *gamma_grad);
  return cfg;
}

}  // namespace wasecom
