#include "wasecom/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace wasecom {

std::size_t Dataset::size() const {
  return task == TaskKind::ImageReconstruction ? images.size() : sequences.size();
}

Dataset Dataset::select(Split split) const {
  Dataset out = *this;
  out.images.clear();
  out.sequences.clear();
  out.splits.clear();
  for (std::size_t i = 0; i < size(); ++i) {
    const Split tag = i < splits.size() ? splits[i] : Split::Train;
    if (tag != split) continue;
    if (task == TaskKind::ImageReconstruction) out.images.push_back(images[i]);
    else out.sequences.push_back(sequences[i]);
    out.splits.push_back(tag);
  }
  return out;
}

void Dataset::validate() const {
  if (size() == 0) throw DataError("dataset is empty");
  if (!splits.empty() && splits.size() != size()) throw DataError("dataset: split tags do not cover every sample");
  if (task == TaskKind::ImageReconstruction) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (images[i].size() != feature_dim()) throw DataError("dataset: image " + std::to_string(i) + " has wrong size");
      for (double v : images[i]) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("dataset: image " + std::to_string(i) + " leaves [0, 1]");
      }
    }
  } else {
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      if (sequences[i].size() != seq_len) throw DataError("dataset: sequence " + std::to_string(i) + " has wrong length");
      for (auto t : sequences[i]) {
        if (t >= vocab_size) throw DataError("dataset: sequence " + std::to_string(i) + " holds an id >= vocab_size");
      }
    }
  }
}

void assign_splits(Dataset& ds, double eval_fraction, std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (n < 2) throw DataError("assign_splits: need at least two samples");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw DataError("assign_splits: eval_fraction must be in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n)));
  n_eval = std::clamp<std::size_t>(n_eval, 1, n - 1);
  ds.splits.assign(n, Split::Train);
  for (std::size_t k = n - n_eval; k < n; ++k) ds.splits[order[k]] = Split::Eval;
}

Dataset generate_synthetic_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  if (n == 0) throw DataError("generate_synthetic_images: n must be >= 1");
  if (side == 0) throw DataError("generate_synthetic_images: side must be >= 1");
  Dataset ds;
  ds.task = TaskKind::ImageReconstruction;
  ds.height = ds.width = side;
  ds.provenance = "synthetic-images(n=" + std::to_string(n) + ",side=" + std::to_string(side) +
                  ",seed=" + std::to_string(seed) + ")";
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double kPi = 3.14159265358979323846;
  ds.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double base = 0.2 + 0.6 * u(rng);
    const double gx = u(rng) - 0.5, gy = u(rng) - 0.5;
    const std::size_t blobs = 1 + static_cast<std::size_t>(u(rng) * 2.0);
    std::vector<std::array<double, 4>> blob(blobs);
    for (auto& b : blob) b = {u(rng), u(rng), 0.08 + 0.2 * u(rng), 0.8 * (u(rng) - 0.5)};
    const double stripe_amp = u(rng) < 0.5 ? 0.0 : 0.25 * u(rng);
    const double freq = 1.0 + 3.0 * u(rng), angle = kPi * u(rng), phase = 2.0 * kPi * u(rng);
    std::vector<double> img(side * side);
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const double y = side == 1 ? 0.5 : static_cast<double>(r) / static_cast<double>(side - 1);
        const double x = side == 1 ? 0.5 : static_cast<double>(c) / static_cast<double>(side - 1);
        double v = base + gx * (x - 0.5) + gy * (y - 0.5);
        for (const auto& b : blob) {
          const double d2 = (x - b[0]) * (x - b[0]) + (y - b[1]) * (y - b[1]);
          v += b[3] * std::exp(-d2 / (2.0 * b[2] * b[2]));
        }
        v += stripe_amp * std::sin(2.0 * kPi * freq * (x * std::cos(angle) + y * std::sin(angle)) + phase);
        img[r * side + c] = std::clamp(v, 0.0, 1.0);
      }
    }
    ds.images.push_back(std::move(img));
  }
  ds.splits.assign(n, Split::Train);
  return ds;
}

Dataset generate_synthetic_text(std::size_t n, std::size_t vocab_size, std::size_t max_len, std::uint64_t seed) {
  if (n == 0) throw DataError("generate_synthetic_text: n must be >= 1");
  if (vocab_size < 4) throw DataError("generate_synthetic_text: vocab_size must be >= 4");
  if (max_len == 0) throw DataError("generate_synthetic_text: max_len must be >= 1");
  Dataset ds;
  ds.task = TaskKind::TextReconstruction;
  ds.vocab_size = vocab_size;
  ds.seq_len = max_len;
  ds.provenance = "synthetic-text(n=" + std::to_string(n) + ",vocab=" + std::to_string(vocab_size) +
                  ",max_len=" + std::to_string(max_len) + ",seed=" + std::to_string(seed) + ")";
  Rng rng(seed);
  const std::uint32_t first = 2;
  const auto words = static_cast<std::uint32_t>(vocab_size) - first;
  std::uniform_int_distribution<std::uint32_t> any(0, words - 1);
  // Each word has three successors with falling probabilities.
  std::vector<std::array<std::uint32_t, 3>> next(words);
  for (auto& s : next) s = {any(rng), any(rng), any(rng)};
  std::discrete_distribution<int> branch({0.7, 0.2, 0.1});
  std::uniform_int_distribution<std::size_t> length((max_len + 1) / 2, max_len);
  ds.sequences.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> seq(max_len, kPadToken);
    const std::size_t len = length(rng);
    std::uint32_t w = any(rng);
    for (std::size_t k = 0; k < len; ++k) {
      seq[k] = first + w;
      w = next[w][static_cast<std::size_t>(branch(rng))];
    }
    ds.sequences.push_back(std::move(seq));
  }
  ds.splits.assign(n, Split::Train);
  return ds;
}

Dataset parse_cifar10_binary(std::span<const std::uint8_t> bytes, const CifarOptions& options) {
  if (bytes.empty()) throw DataError("cifar10: empty file");
  const std::size_t f = options.downsample;
  if (f == 0 || 32 % f != 0) throw DataError("cifar10: downsample factor must divide 32");
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t offset = bytes.size() / kCifarRecordBytes * kCifarRecordBytes;
    throw DataError("cifar10: truncated record at byte offset " + std::to_string(offset) + " (" +
                    std::to_string(bytes.size() - offset) + " of " + std::to_string(kCifarRecordBytes) + " bytes)");
  }
  Dataset ds;
  ds.task = TaskKind::ImageReconstruction;
  ds.height = ds.width = 32 / f;
  ds.channels = options.grayscale ? 1 : 3;
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  const std::size_t side = ds.height;
  for (std::size_t rec = 0; rec < records; ++rec) {
    const std::uint8_t* px = bytes.data() + rec * kCifarRecordBytes + 1;
    auto value = [&](std::size_t ch, std::size_t r, std::size_t c) {
      return static_cast<double>(px[ch * 1024 + r * 32 + c]) / 255.0;
    };
    std::vector<double> img(ds.feature_dim());
    for (std::size_t ch = 0; ch < ds.channels; ++ch) {
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
          double acc = 0.0;
          for (std::size_t dr = 0; dr < f; ++dr) {
            for (std::size_t dc = 0; dc < f; ++dc) {
              const std::size_t rr = r * f + dr, cc = c * f + dc;
              acc += options.grayscale
                         ? 0.299 * value(0, rr, cc) + 0.587 * value(1, rr, cc) + 0.114 * value(2, rr, cc)
                         : value(ch, rr, cc);
            }
          }
          img[(ch * side + r) * side + c] = std::clamp(acc / static_cast<double>(f * f), 0.0, 1.0);
        }
      }
    }
    ds.images.push_back(std::move(img));
  }
  ds.splits.assign(records, Split::Train);
  return ds;
}

Dataset ingest_cifar10_binary(const std::filesystem::path& path, const CifarOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cifar10: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Dataset ds = parse_cifar10_binary(bytes, options);
  ds.provenance = "cifar10-binary(" + path.filename().string() + ")";
  return ds;
}

Vocabulary Vocabulary::build(std::span<const std::string> lines, std::size_t max_size) {
  if (max_size < 3) throw DataError("vocabulary: max_size must be >= 3");
  std::map<std::string, std::size_t> freq;
  for (const auto& line : lines) {
    std::istringstream is(line);
    std::string w;
    while (is >> w) ++freq[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.words = {"<pad>", "<unk>"};
  for (const auto& [w, c] : ranked) {
    if (v.words.size() >= max_size) break;
    v.words.push_back(w);
  }
  for (std::size_t i = 0; i < v.words.size(); ++i) v.index.emplace(v.words[i], static_cast<std::uint32_t>(i));
  return v;
}

std::uint32_t Vocabulary::lookup(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? kUnkToken : it->second;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("text: cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

Dataset ingest_text_lines(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t seq_len) {
  if (seq_len == 0) throw DataError("text: seq_len must be >= 1");
  Dataset ds;
  ds.task = TaskKind::TextReconstruction;
  ds.vocab_size = vocab.size();
  ds.seq_len = seq_len;
  ds.provenance = "text-lines(" + path.filename().string() + ")";
  for (const auto& line : read_lines(path)) {
    std::istringstream is(line);
    std::vector<std::uint32_t> seq;
    for (std::string w; is >> w && seq.size() < seq_len;) seq.push_back(vocab.lookup(w));
    if (seq.empty()) continue;
    seq.resize(seq_len, kPadToken);
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty()) throw DataError("text: no sentences in " + path.string());
  ds.splits.assign(ds.sequences.size(), Split::Train);
  return ds;
}

Tensor image_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t d = ds.feature_dim();
  std::vector<double> values;
  values.reserve(indices.size() * d);
  for (auto i : indices) values.insert(values.end(), ds.images.at(i).begin(), ds.images.at(i).end());
  return Tensor::from({indices.size(), d}, std::move(values));
}

std::vector<std::uint32_t> token_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  std::vector<std::uint32_t> out;
  out.reserve(indices.size() * ds.seq_len);
  for (auto i : indices) out.insert(out.end(), ds.sequences.at(i).begin(), ds.sequences.at(i).end());
  return out;
}

std::vector<std::uint32_t> strip_padding(std::span<const std::uint32_t> tokens) {
  std::vector<std::uint32_t> out;
  for (auto t : tokens) {
    if (t != kPadToken) out.push_back(t);
  }
  return out;
}

}  // namespace wasecom
