#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "wasecom/tensor.hpp"

namespace wasecom {

/// Plain gradient descent on a parameter list. Throws std::logic_error when a
/// parameter has no accumulated gradient; zeroes every gradient afterwards.
void sgd_step(std::vector<Tensor>& params, double lr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  virtual std::size_t step_count() const = 0;
};

class Sgd final : public Optimizer {
 public:
  Sgd(std::vector<Tensor> params, double lr);
  void step() override;
  std::size_t step_count() const override { return steps_; }

 private:
  std::vector<Tensor> params_;
  double lr_;
  std::size_t steps_ = 0;
};

/// Bias-corrected Adam with per-parameter first/second moment state.
class Adam final : public Optimizer {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);
  void step() override;
  std::size_t step_count() const override { return steps_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t steps_ = 0;
};

enum class OptimizerKind { Adam, Sgd };

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<Tensor> params, double lr);

}  // namespace wasecom
