#include "wasecom/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wasecom {

namespace {

void require_grads(const std::vector<Tensor>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::logic_error("optimizer step: parameter " + std::to_string(i) + " of shape " +
                             shape_string(params[i].shape()) + " has no gradient");
    }
  }
}

}  // namespace

void sgd_step(std::vector<Tensor>& params, double lr) {
  require_grads(params);
  for (auto& p : params) {
    auto g = p.grad_view();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
  for (auto& p : params) p.zero_grad();
}

Sgd::Sgd(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {}

void Sgd::step() {
  sgd_step(params_, lr_);
  ++steps_;
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  require_grads(params_);
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto g = params_[k].grad_view();
    auto w = params_[k].mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
  for (auto& p : params_) p.zero_grad();
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<Tensor> params, double lr) {
  if (kind == OptimizerKind::Sgd) return std::make_unique<Sgd>(std::move(params), lr);
  AdamConfig cfg;
  cfg.lr = lr;
  return std::make_unique<Adam>(std::move(params), cfg);
}

}  // namespace wasecom
