#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wasecom/models.hpp"
#include "wasecom/tensor.hpp"

namespace wasecom {

enum class PerturbMethod { None, GaussianSample, FGSM, PGD };

std::string to_string(PerturbMethod method);
PerturbMethod parse_perturb_method(const std::string& name);

/// How a perturbed copy of each row is produced. `radius` is the per-row L2
/// budget; infinity disables the projection.
struct PerturbSpec {
  PerturbMethod method = PerturbMethod::None;
  double radius = std::numeric_limits<double>::infinity();
  double step_size = 0.05;
  std::size_t steps = 7;
  std::size_t samples = 1;
  double epsilon_inf = 0.0;

  void validate() const;
  bool operator==(const PerturbSpec&) const = default;
};

/// Maps a [rows, cols] candidate to one objective value per row. Rows must be
/// independent of each other for the per-row best tracking in pgd() to be exact.
using RowObjective = std::function<Tensor(const Tensor&)>;

/// Rows outside the ball around `center` are pulled back onto its surface.
Tensor project_ball(const Tensor& x_tilde, const Tensor& center, double radius);

/// x + epsilon_inf * sign(grad), then projected onto the radius ball. A zero
/// gradient leaves the input unchanged.
Tensor fgsm(const RowObjective& objective, const Tensor& x, const PerturbSpec& spec);

struct PgdTrace {
  /// Sum over rows of the best objective seen, one entry per evaluation.
  std::vector<double> best_total;
};

/// Projected ascent with L2-normalized steps, starting from x. Each row keeps
/// its best iterate; a step that fails to improve a row halves that row's
/// step size and restarts from its best point.
Tensor pgd(const RowObjective& objective, const Tensor& x, const PerturbSpec& spec, PgdTrace* trace = nullptr);

/// K draws x + delta with delta ~ N(0, (radius^2 / d) I), so E||delta||^2 = radius^2.
std::vector<Tensor> gaussian_samples(const Tensor& x, const PerturbSpec& spec, Rng& rng);

/// Dispatches on spec.method for the single-output methods (None, FGSM, PGD).
Tensor perturb(const RowObjective& objective, const Tensor& x, const PerturbSpec& spec);

}  // namespace wasecom
