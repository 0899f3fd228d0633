#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wasecom/tensor.hpp"

namespace wasecom {

struct GradCheckTolerance {
  double step = 1e-5;
  double relative = 1e-4;
  double absolute = 1e-6;
};

struct GradCheckResult {
  std::string name;
  std::size_t parameters = 0;
  std::size_t failures = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  bool ok() const { return failures == 0; }
};

/// Central differences against reverse mode for every element of every leaf.
/// An element passes when |auto - numeric| <= max(absolute, relative * max(|auto|, |numeric|)).
GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                std::vector<Tensor> leaves, const GradCheckTolerance& tol = {});

struct GradCheckCase {
  std::string name;
  std::function<Tensor()> loss;
  std::vector<Tensor> leaves;
};

/// `count` seeded random graphs cycling through templates that together use
/// every differentiable op, the channel layer, power normalization, the
/// smoothed dual objective and both model heads.
std::vector<GradCheckCase> random_gradcheck_suite(std::size_t count, std::uint64_t seed);

}  // namespace wasecom
