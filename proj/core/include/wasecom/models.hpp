#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wasecom/tensor.hpp"

namespace wasecom {

using Rng = std::mt19937_64;

enum class TaskKind { ImageReconstruction, TextReconstruction };
enum class Activation { Tanh, Relu, Identity };

std::string to_string(TaskKind task);
TaskKind parse_task_kind(const std::string& name);
std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

/// Architecture record shared by every network in a bundle.
///
/// For images `input_dim` is the pixel count. For text it is the embedding
/// width; each of the `seq_len` positions travels through the semantic and
/// channel stacks as its own row, and the per-sample source representation
/// is the flattened [seq_len * input_dim] embedding.
struct ModelDims {
  TaskKind task = TaskKind::ImageReconstruction;
  std::size_t input_dim = 64;
  std::size_t semantic_dim = 16;
  std::size_t signal_dim = 16;
  std::size_t hidden_dim = 64;
  std::size_t hidden_layers = 1;
  std::size_t vocab_size = 0;
  std::size_t seq_len = 0;
  Activation activation = Activation::Tanh;
  bool normalize_power = true;

  /// Width of one sample's source representation.
  std::size_t feature_dim() const;
  /// Rows handed to the channel per sample (1 for images, seq_len for text).
  std::size_t rows_per_sample() const;
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

/// Fully connected stack; the activation is applied between layers only.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<Linear> layers, Activation activation);

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const;
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in_dim() const;
  std::size_t out_dim() const;

 private:
  std::vector<Linear> layers_;
  Activation activation_ = Activation::Tanh;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// The four learnable components: semantic encoder (theta), semantic decoder
/// (phi), channel encoder (psi) and channel decoder (omega). No tensor is
/// shared between them.
struct ModelBundle {
  ModelDims dims;
  Tensor embedding;  // [vocab, input_dim]; text only, owned by theta
  Mlp semantic_encoder;
  Mlp semantic_decoder;
  Mlp channel_encoder;
  Mlp channel_decoder;

  /// Glorot-uniform weights, zero biases, N(0, 1) embeddings.
  static ModelBundle create(const ModelDims& dims, std::uint64_t seed);
  /// Every weight and bias zero.
  static ModelBundle zeros(const ModelDims& dims);

  std::vector<Tensor> theta() const;
  std::vector<Tensor> phi() const;
  std::vector<Tensor> psi() const;
  std::vector<Tensor> omega() const;
  std::vector<Tensor> all_parameters() const;
  std::vector<NamedParameter> named_parameters() const;

  ModelBundle clone() const;
  /// FNV-1a over the raw bits of every parameter, in declaration order.
  std::uint64_t hash() const;
};

void set_requires_grad(std::span<Tensor> params, bool flag);
void zero_grads(std::span<Tensor> params);

/// Disables gradients on every bundle parameter for its lifetime and restores
/// the previous flags on exit.
class FrozenParameters {
 public:
  explicit FrozenParameters(const ModelBundle& bundle);
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;
  ~FrozenParameters();

 private:
  std::vector<Tensor> params_;
  std::vector<bool> flags_;
};

// Pipeline stages. Shapes follow ModelDims; see the struct comment for text.

/// Text only: looks up [batch, seq_len] ids and returns [batch, seq_len * input_dim].
Tensor embed_tokens(const ModelBundle& m, std::span<const std::uint32_t> tokens);
/// [batch, feature_dim] -> [batch * rows_per_sample, semantic_dim]
Tensor semantic_encode(const ModelBundle& m, const Tensor& x);
/// Power-normalized to unit mean square per row when dims.normalize_power.
Tensor channel_encode(const ModelBundle& m, const Tensor& s);
Tensor channel_decode(const ModelBundle& m, const Tensor& z);
/// Images: [batch, input_dim]. Text: logits [batch, seq_len, vocab_size].
Tensor semantic_decode(const ModelBundle& m, const Tensor& s_hat);

/// Row-mean squared error, one entry per leading-axis row.
Tensor per_sample_mse(const Tensor& a, const Tensor& b);
/// Mean token cross-entropy per sequence, logits [batch, seq_len, vocab].
Tensor per_sample_cross_entropy(std::span<const std::uint32_t> tokens, const Tensor& logits);

/// Image reconstruction loss (MSE) as a scalar.
Tensor reconstruction_loss(const Tensor& x, const Tensor& x_hat);
/// Text reconstruction loss (mean per-token cross-entropy) as a scalar.
Tensor reconstruction_loss(std::span<const std::uint32_t> tokens, const Tensor& logits);
/// Channel distortion between transmitted and recovered semantics (MSE).
Tensor channel_loss(const Tensor& s, const Tensor& s_hat);

}  // namespace wasecom
