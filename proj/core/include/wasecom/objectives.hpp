#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wasecom/channel.hpp"
#include "wasecom/models.hpp"
#include "wasecom/perturbation.hpp"
#include "wasecom/tensor.hpp"

namespace wasecom {

/// Wasserstein radii, their dual multipliers and the log-sum-exp temperature.
struct RobustnessConfig {
  double rho = 0.1;           // semantic radius
  double mu = 0.1;            // channel radius
  double lambda = 1.0;        // semantic multiplier
  double gamma = 1.0;         // channel multiplier
  double epsilon_temp = 1.0;  // smoothing temperature
  bool use_lse = false;
  bool lambda_learnable = true;
  double dual_lr = 0.01;

  void validate() const;
  bool operator==(const RobustnessConfig&) const = default;
};

/// total = penalty_term + expectation_term, where the penalty is multiplier *
/// radius^2 and the expectation is the batch mean of the per-row surrogate.
struct DualObjectiveValue {
  Tensor total;
  double penalty_term = 0.0;
  double expectation_term = 0.0;
  /// Batch mean transport cost of the selected perturbations; feeds the
  /// envelope-theorem multiplier gradient radius^2 - mean_cost.
  double mean_cost = 0.0;
  std::optional<Tensor> worst_case;
};

/// Squared Euclidean cost per row: ||a_i - b_i||^2.
std::vector<double> transport_cost(const Tensor& a, const Tensor& b);
/// Same cost as a graph node, one entry per row.
Tensor transport_cost_rows(const Tensor& a, const Tensor& b);

/// epsilon * log(mean_k exp(v_k / epsilon)), evaluated with max subtraction.
double lse_smooth(std::span<const double> values, double epsilon_temp);
/// Column-wise smoothing of a [K, rows] tensor into [rows].
Tensor lse_smooth(const Tensor& values, double epsilon_temp);

/// Everything the semantic level needs about one minibatch.
struct SemanticBatch {
  TaskKind task = TaskKind::ImageReconstruction;
  /// [batch, feature_dim]: pixels, or token embeddings (which carry the
  /// embedding-table gradient for text).
  Tensor features;
  /// Text targets, [batch * seq_len]; empty for images.
  std::vector<std::uint32_t> tokens;
};

SemanticBatch make_image_batch(const Tensor& images);
SemanticBatch make_text_batch(const ModelBundle& bundle, std::vector<std::uint32_t> tokens);

/// x~ -> per-sample ell_s(x~, g(d(h c(f(x~)) + w))) for a fixed channel draw.
/// Images compare against x~ itself; text compares against batch.tokens.
Tensor semantic_row_loss(const ModelBundle& bundle, const SemanticBatch& batch, const Tensor& x_tilde,
                         const ChannelRealization& channel);

/// z~ -> per-row ell_c(s, d(z~)).
Tensor channel_row_loss(const ModelBundle& bundle, const Tensor& s, const Tensor& z_tilde);

/// Semantic-level penalized dual: lambda rho^2 + E[sup_x~ ell_s - lambda c(x, x~)].
/// The sup is taken by the configured perturbation (hard path) or smoothed over
/// Gaussian samples (use_lse). Gradients reach theta, phi and whatever else in
/// the bundle still requires a gradient.
DualObjectiveValue inner_dual_loss(const ModelBundle& bundle, const SemanticBatch& batch,
                                   const ChannelRealization& channel, const RobustnessConfig& robustness,
                                   const PerturbSpec& perturb, Rng& rng);

/// Channel-level penalized dual around the received signal z = h c(s) + w:
/// gamma mu^2 + E[sup_z~ ell_c(s, d(z~)) - gamma c(z, z~)]. `s` is treated as
/// a constant.
DualObjectiveValue outer_dual_loss(const ModelBundle& bundle, const Tensor& s, const ChannelRealization& channel,
                                   const RobustnessConfig& robustness, const PerturbSpec& perturb, Rng& rng);

/// d(total)/d(multiplier) on the hard-sup path: radius^2 - E[c].
double dual_gradient(double radius, double mean_cost);

/// Projected gradient step on the multipliers that were given a gradient.
RobustnessConfig update_duals(RobustnessConfig cfg, std::optional<double> lambda_grad,
                              std::optional<double> gamma_grad, double lr);

}  // namespace wasecom
