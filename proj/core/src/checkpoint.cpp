#include "wasecom/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace wasecom {

namespace {

constexpr char kMagic[8] = {'W', 'A', 'S', 'E', 'C', 'O', 'M', '\0'};

class Writer {
 public:
  template <class T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte offset " +
                            std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelBundle& bundle) {
  Writer w;
  w.put_raw(kMagic, sizeof(kMagic));
  w.put(kCheckpointVersion);
  const auto& d = bundle.dims;
  w.put(static_cast<std::uint32_t>(d.task));
  w.put(static_cast<std::uint64_t>(d.input_dim));
  w.put(static_cast<std::uint64_t>(d.semantic_dim));
  w.put(static_cast<std::uint64_t>(d.signal_dim));
  w.put(static_cast<std::uint64_t>(d.hidden_dim));
  w.put(static_cast<std::uint64_t>(d.hidden_layers));
  w.put(static_cast<std::uint64_t>(d.vocab_size));
  w.put(static_cast<std::uint64_t>(d.seq_len));
  w.put(static_cast<std::uint32_t>(d.activation));
  w.put(static_cast<std::uint8_t>(d.normalize_power ? 1 : 0));
  const auto params = bundle.named_parameters();
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put(static_cast<std::uint32_t>(p.name.size()));
    w.put_raw(p.name.data(), p.name.size());
    const auto& shape = p.tensor.shape();
    w.put(static_cast<std::uint32_t>(shape.size()));
    for (auto s : shape) w.put(static_cast<std::uint64_t>(s));
    for (double v : p.tensor.data()) w.put_f64(v);
  }
  return std::move(w.bytes);
}

ModelBundle deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get_string(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw CheckpointError("not a wasecom checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelDims d;
  const auto task = r.get<std::uint32_t>("task");
  if (task > 1) throw CheckpointError("invalid task kind " + std::to_string(task));
  d.task = static_cast<TaskKind>(task);
  d.input_dim = r.get<std::uint64_t>("input_dim");
  d.semantic_dim = r.get<std::uint64_t>("semantic_dim");
  d.signal_dim = r.get<std::uint64_t>("signal_dim");
  d.hidden_dim = r.get<std::uint64_t>("hidden_dim");
  d.hidden_layers = r.get<std::uint64_t>("hidden_layers");
  d.vocab_size = r.get<std::uint64_t>("vocab_size");
  d.seq_len = r.get<std::uint64_t>("seq_len");
  const auto act = r.get<std::uint32_t>("activation");
  if (act > 2) throw CheckpointError("invalid activation " + std::to_string(act));
  d.activation = static_cast<Activation>(act);
  d.normalize_power = r.get<std::uint8_t>("normalize_power") != 0;

  ModelBundle bundle;
  try {
    bundle = ModelBundle::zeros(d);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint dims invalid: ") + e.what());
  }
  auto params = bundle.named_parameters();
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, architecture expects " +
                          std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name_len = r.get<std::uint32_t>("name length");
    const auto name = r.get_string(name_len, "name");
    if (name != p.name) throw CheckpointError("expected tensor '" + p.name + "', found '" + name + "'");
    const auto rank = r.get<std::uint32_t>("rank");
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint64_t>("dims"));
    if (shape != p.tensor.shape()) {
      throw CheckpointError("tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                            shape_string(p.tensor.shape()));
    }
    auto out = p.tensor.mutable_data();
    for (auto& v : out) v = r.get_f64("payload");
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload at offset " + std::to_string(r.pos()));
  return bundle;
}

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace wasecom
