#include "wasecom/models.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace wasecom {

std::string to_string(TaskKind task) {
  return task == TaskKind::ImageReconstruction ? "image" : "text";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "image") return TaskKind::ImageReconstruction;
  if (name == "text") return TaskKind::TextReconstruction;
  throw std::invalid_argument("unknown task kind '" + name + "' (expected image|text)");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "tanh";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh|relu|identity)");
}

std::size_t ModelDims::feature_dim() const {
  return task == TaskKind::TextReconstruction ? seq_len * input_dim : input_dim;
}

std::size_t ModelDims::rows_per_sample() const {
  return task == TaskKind::TextReconstruction ? seq_len : 1;
}

void ModelDims::validate() const {
  if (input_dim == 0 || semantic_dim == 0 || signal_dim == 0) {
    throw std::invalid_argument("model dims: input, semantic and signal dims must be positive");
  }
  if (hidden_layers > 0 && hidden_dim == 0) throw std::invalid_argument("model dims: hidden_dim must be positive");
  if (task == TaskKind::TextReconstruction && (vocab_size < 2 || seq_len == 0)) {
    throw std::invalid_argument("model dims: text task needs vocab_size >= 2 and seq_len >= 1");
  }
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<Linear> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
  if (layers_.empty()) throw std::invalid_argument("Mlp: at least one layer required");
}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_dim()) {
    throw ShapeError("Mlp: expected input [n," + std::to_string(in_dim()) + "], got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = add(matmul(h, layers_[i].weight), layers_[i].bias);
    if (i + 1 == layers_.size()) break;
    switch (activation_) {
      case Activation::Tanh: h = tanh(h); break;
      case Activation::Relu: h = relu(h); break;
      case Activation::Identity: break;
    }
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

std::size_t Mlp::in_dim() const { return layers_.front().weight.dim(0); }
std::size_t Mlp::out_dim() const { return layers_.back().weight.dim(1); }

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> widths(std::size_t in, std::size_t out, const ModelDims& d) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < d.hidden_layers; ++i) w.push_back(d.hidden_dim);
  w.push_back(out);
  return w;
}

Mlp make_mlp(const std::vector<std::size_t>& w, Activation act, Rng* rng) {
  std::vector<Linear> layers;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const std::size_t fan_in = w[i], fan_out = w[i + 1];
    std::vector<double> weight(fan_in * fan_out, 0.0);
    if (rng) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& v : weight) v = u(*rng);
    }
    layers.push_back({Tensor::from({fan_in, fan_out}, std::move(weight), true), Tensor::zeros({fan_out}, true)});
  }
  return Mlp(std::move(layers), act);
}

ModelBundle build(const ModelDims& d, Rng* rng) {
  d.validate();
  ModelBundle m;
  m.dims = d;
  const bool text = d.task == TaskKind::TextReconstruction;
  if (text) {
    std::vector<double> table(d.vocab_size * d.input_dim, 0.0);
    if (rng) {
      std::normal_distribution<double> n(0.0, 1.0);
      for (auto& v : table) v = n(*rng);
    }
    m.embedding = Tensor::from({d.vocab_size, d.input_dim}, std::move(table), true);
  }
  m.semantic_encoder = make_mlp(widths(d.input_dim, d.semantic_dim, d), d.activation, rng);
  m.semantic_decoder = make_mlp(widths(d.semantic_dim, text ? d.vocab_size : d.input_dim, d), d.activation, rng);
  m.channel_encoder = make_mlp(widths(d.semantic_dim, d.signal_dim, d), d.activation, rng);
  m.channel_decoder = make_mlp(widths(d.signal_dim, d.semantic_dim, d), d.activation, rng);
  return m;
}

void append_named(std::vector<NamedParameter>& out, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t i = 0; i < mlp.layers().size(); ++i) {
    out.push_back({prefix + "." + std::to_string(i) + ".weight", mlp.layers()[i].weight});
    out.push_back({prefix + "." + std::to_string(i) + ".bias", mlp.layers()[i].bias});
  }
}

Mlp clone_mlp(const Mlp& mlp, Activation act) {
  std::vector<Linear> layers;
  for (const auto& l : mlp.layers()) {
    Linear c{l.weight.detach(), l.bias.detach()};
    c.weight.set_requires_grad(l.weight.requires_grad());
    c.bias.set_requires_grad(l.bias.requires_grad());
    layers.push_back(std::move(c));
  }
  return Mlp(std::move(layers), act);
}

}  // namespace

ModelBundle ModelBundle::create(const ModelDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  return build(dims, &rng);
}

ModelBundle ModelBundle::zeros(const ModelDims& dims) { return build(dims, nullptr); }

std::vector<Tensor> ModelBundle::theta() const {
  std::vector<Tensor> out;
  if (embedding.defined()) out.push_back(embedding);
  auto p = semantic_encoder.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<Tensor> ModelBundle::phi() const { return semantic_decoder.parameters(); }
std::vector<Tensor> ModelBundle::psi() const { return channel_encoder.parameters(); }
std::vector<Tensor> ModelBundle::omega() const { return channel_decoder.parameters(); }

std::vector<Tensor> ModelBundle::all_parameters() const {
  std::vector<Tensor> out;
  for (auto& np : named_parameters()) out.push_back(np.tensor);
  return out;
}

std::vector<NamedParameter> ModelBundle::named_parameters() const {
  std::vector<NamedParameter> out;
  if (embedding.defined()) out.push_back({"theta.embedding", embedding});
  append_named(out, "theta", semantic_encoder);
  append_named(out, "phi", semantic_decoder);
  append_named(out, "psi", channel_encoder);
  append_named(out, "omega", channel_decoder);
  return out;
}

ModelBundle ModelBundle::clone() const {
  ModelBundle c;
  c.dims = dims;
  if (embedding.defined()) {
    c.embedding = embedding.detach();
    c.embedding.set_requires_grad(embedding.requires_grad());
  }
  c.semantic_encoder = clone_mlp(semantic_encoder, dims.activation);
  c.semantic_decoder = clone_mlp(semantic_decoder, dims.activation);
  c.channel_encoder = clone_mlp(channel_encoder, dims.activation);
  c.channel_decoder = clone_mlp(channel_decoder, dims.activation);
  return c;
}

std::uint64_t ModelBundle::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& np : named_parameters()) {
    for (double v : np.tensor.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

void set_requires_grad(std::span<Tensor> params, bool flag) {
  for (auto& p : params) p.set_requires_grad(flag);
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

FrozenParameters::FrozenParameters(const ModelBundle& bundle) : params_(bundle.all_parameters()) {
  for (auto& p : params_) {
    flags_.push_back(p.requires_grad());
    p.set_requires_grad(false);
  }
}

FrozenParameters::~FrozenParameters() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(flags_[i]);
}

// ---------------------------------------------------------------------------

Tensor embed_tokens(const ModelBundle& m, std::span<const std::uint32_t> tokens) {
  if (m.dims.task != TaskKind::TextReconstruction) throw std::logic_error("embed_tokens: bundle is not a text model");
  const std::size_t len = m.dims.seq_len;
  if (tokens.empty() || tokens.size() % len != 0) {
    throw ShapeError("embed_tokens: " + std::to_string(tokens.size()) + " ids is not a multiple of seq_len " +
                     std::to_string(len));
  }
  const std::size_t batch = tokens.size() / len;
  return reshape(embedding(m.embedding, tokens), {batch, len * m.dims.input_dim});
}

Tensor semantic_encode(const ModelBundle& m, const Tensor& x) {
  const auto& d = m.dims;
  if (x.rank() != 2 || x.dim(1) != d.feature_dim()) {
    throw ShapeError("semantic_encode: expected [batch," + std::to_string(d.feature_dim()) + "], got " +
                     shape_string(x.shape()));
  }
  Tensor rows = x;
  if (d.task == TaskKind::TextReconstruction) rows = reshape(x, {x.dim(0) * d.seq_len, d.input_dim});
  return m.semantic_encoder.forward(rows);
}

Tensor channel_encode(const ModelBundle& m, const Tensor& s) {
  Tensor v = m.channel_encoder.forward(s);
  if (!m.dims.normalize_power) return v;
  Tensor power = mean_axis(square(v), 1, true);
  return div(v, sqrt(add_scalar(power, 1e-12)));
}

Tensor channel_decode(const ModelBundle& m, const Tensor& z) { return m.channel_decoder.forward(z); }

Tensor semantic_decode(const ModelBundle& m, const Tensor& s_hat) {
  Tensor out = m.semantic_decoder.forward(s_hat);
  const auto& d = m.dims;
  if (d.task == TaskKind::TextReconstruction) {
    if (out.dim(0) % d.seq_len != 0) throw ShapeError("semantic_decode: row count is not a multiple of seq_len");
    return reshape(out, {out.dim(0) / d.seq_len, d.seq_len, d.vocab_size});
  }
  return out;
}

Tensor per_sample_mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
  Tensor diff = sub(a, b);
  if (diff.rank() == 1) diff = reshape(diff, {1, diff.size()});
  if (diff.rank() > 2) diff = reshape(diff, {diff.dim(0), diff.size() / diff.dim(0)});
  return mean_axis(square(diff), 1);
}

Tensor per_sample_cross_entropy(std::span<const std::uint32_t> tokens, const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(0) * logits.dim(1) != tokens.size()) {
    throw ShapeError("cross_entropy: logits " + shape_string(logits.shape()) + " do not match " +
                     std::to_string(tokens.size()) + " tokens");
  }
  const std::size_t batch = logits.dim(0), len = logits.dim(1), vocab = logits.dim(2);
  Tensor lp = log_softmax(reshape(logits, {batch * len, vocab}));
  Tensor nll = neg(pick(lp, tokens));
  return mean_axis(reshape(nll, {batch, len}), 1);
}

Tensor reconstruction_loss(const Tensor& x, const Tensor& x_hat) { return mean(per_sample_mse(x, x_hat)); }

Tensor reconstruction_loss(std::span<const std::uint32_t> tokens, const Tensor& logits) {
  return mean(per_sample_cross_entropy(tokens, logits));
}

Tensor channel_loss(const Tensor& s, const Tensor& s_hat) { return mean(per_sample_mse(s, s_hat)); }

}  // namespace wasecom
