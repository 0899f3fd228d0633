#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wasecom/channel.hpp"
#include "wasecom/data.hpp"
#include "wasecom/trainer.hpp"

namespace wasecom {

/// Schema violations: unknown keys, wrong types, out-of-range values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DatasetKind { SyntheticImages, SyntheticText, Cifar10, TextLines };
std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::SyntheticImages;
  std::size_t n = 2000;
  std::size_t side = 8;
  std::size_t vocab_size = 32;
  std::size_t seq_len = 8;
  std::uint64_t seed = 1;
  double eval_fraction = 0.2;
  std::string path;
  bool grayscale = true;
  std::size_t downsample = 4;

  bool operator==(const DatasetSpec&) const = default;
};

struct AttackConfig {
  std::string name = "fgsm";
  PerturbSpec perturb{PerturbMethod::FGSM, std::numeric_limits<double>::infinity(), 0.05, 7, 1, 0.01};
  double fraction = 1.0;
  FractionMode fraction_mode = FractionMode::Samples;
  AttackReference reference = AttackReference::Perturbed;

  AttackSpec to_spec() const { return {name, perturb, fraction, fraction_mode, reference}; }
  bool operator==(const AttackConfig&) const = default;
};

struct EvalSpec {
  std::uint64_t channel_seed = 12345;
  std::vector<double> snr_db{0.0, 10.0, 20.0};
  std::vector<ChannelKind> channels{ChannelKind::AWGN};
  std::vector<AttackConfig> attacks;
  std::size_t batch_size = 256;

  bool operator==(const EvalSpec&) const = default;
};

struct ExperimentConfig {
  std::string run_id = "run";
  DatasetSpec dataset;
  /// Model, robustness, channel and perturbation settings live here.
  TrainConfig train;
  EvalSpec eval;

  /// Channel used for the end-of-training evaluation: the training channel
  /// kind and SNR with the evaluation seed.
  ChannelConfig eval_channel() const;
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical form: two-space indent, keys sorted, every field present.
std::string serialize_config(const ExperimentConfig& cfg);

/// Builds (train, eval) splits for the dataset spec, deriving text/image
/// dimensions into the returned datasets.
std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& spec);
/// Sets model input_dim / vocab_size / seq_len from a dataset.
void fit_model_to_dataset(ModelDims& dims, const Dataset& data);

}  // namespace wasecom
