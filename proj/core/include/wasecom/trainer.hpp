#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wasecom/channel.hpp"
#include "wasecom/data.hpp"
#include "wasecom/metrics.hpp"
#include "wasecom/models.hpp"
#include "wasecom/objectives.hpp"
#include "wasecom/optim.hpp"
#include "wasecom/perturbation.hpp"

namespace wasecom {

enum class TrainMode { WaSeCom, ERM };
std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct StepRecord {
  std::size_t step = 0;
  std::string phase;  // outer, inner or joint
  double total = 0.0;
  double penalty = 0.0;
  double expectation = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  double wall_ms = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::WaSeCom;
  RobustnessConfig robustness;
  ChannelConfig channel;
  PerturbSpec perturb_inner{PerturbMethod::PGD};
  PerturbSpec perturb_outer{PerturbMethod::PGD};
  /// Epochs between checkpoints; 0 disables them.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  /// Optimizer steps per phase per minibatch.
  std::size_t substeps = 1;
  /// ERM only: one end-to-end step over all four parameter sets per minibatch
  /// instead of the alternating schedule.
  bool erm_joint = false;
  /// Stop after this many minibatches (0 = no limit).
  std::size_t max_batches = 0;
  ModelDims model;
  /// When set and eval data is given, evaluate after training (and after each
  /// epoch if eval_every_epoch).
  std::optional<ChannelConfig> eval_channel;
  bool eval_every_epoch = false;
  /// Called after every optimizer step with the updated bundle.
  std::function<void(const StepRecord&, const ModelBundle&)> on_step;

  void validate() const;
};


struct EpochRecord {
  std::size_t epoch = 0;
  double mean_outer = 0.0;
  double mean_inner = 0.0;
  std::optional<MetricsRecord> eval;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::optional<MetricsRecord> final_eval;

  /// `step,phase,total,penalty,expectation,lambda,gamma,wall_ms`
  std::string to_csv(bool include_wall_time = true) const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  ModelBundle bundle;
  TrainLog log;
  RobustnessConfig robustness;  // multipliers after the last update
};

/// Raised when a loss turns non-finite. Carries the offending record.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, StepRecord record) : std::runtime_error(what), record_(std::move(record)) {}
  const StepRecord& record() const { return record_; }

 private:
  StepRecord record_;
};

/// Alternating schedule per minibatch: an outer step on (psi, omega) against
/// s = f_theta(x) from the current (stale) theta, then an inner step on
/// (theta, phi) through the just-updated channel stack.
TrainResult train_wasecom(const TrainConfig& cfg, const Dataset& train, const Dataset* eval = nullptr);
/// Same schedule with clean losses, or one joint step when cfg.erm_joint.
TrainResult train_erm(const TrainConfig& cfg, const Dataset& train, const Dataset* eval = nullptr);
/// Dispatches on cfg.mode.
TrainResult train(const TrainConfig& cfg, const Dataset& train, const Dataset* eval = nullptr);
/// Fresh bundle for a config: ModelBundle::create(cfg.model, cfg.seed).
ModelBundle initial_bundle(const TrainConfig& cfg);

enum class FractionMode {
  Samples,    // that share of samples is attacked at full strength
  Magnitude,  // every sample, with epsilon_inf = fraction of the [0, 1] range
};
std::string to_string(FractionMode mode);
FractionMode parse_fraction_mode(const std::string& name);

enum class AttackReference {
  Perturbed,  // the attack raises ell_s(x~, x^(x~)); metrics compare x~ with x^
  Clean,      // the attack raises ell_s(x, x^(x~)); metrics compare x with x^
};
std::string to_string(AttackReference ref);
AttackReference parse_attack_reference(const std::string& name);

struct AttackSpec {
  std::string name = "fgsm";
  PerturbSpec perturb{PerturbMethod::FGSM};
  double fraction = 1.0;
  FractionMode fraction_mode = FractionMode::Samples;
  AttackReference reference = AttackReference::Perturbed;
};

struct EvalOptions {
  std::size_t batch_size = 256;
};

/// Runs the pipeline over every sample of `data` with channel draws seeded by
/// channel.seed, so a clean and an attacked evaluation see identical noise.
/// Leaves the bundle untouched.
MetricsRecord evaluate(const ModelBundle& bundle, const Dataset& data, const ChannelConfig& channel,
                       const std::optional<AttackSpec>& attack = std::nullopt, const EvalOptions& options = {});

}  // namespace wasecom
