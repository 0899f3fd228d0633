#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "wasecom/models.hpp"
#include "wasecom/tensor.hpp"

namespace wasecom {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split : std::uint8_t { Train, Eval };

inline constexpr std::uint32_t kPadToken = 0;
inline constexpr std::uint32_t kUnkToken = 1;

/// Images are flattened row-major with values in [0, 1]; token sequences are
/// padded with kPadToken to seq_len.
struct Dataset {
  TaskKind task = TaskKind::ImageReconstruction;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t vocab_size = 0;
  std::size_t seq_len = 0;
  std::vector<std::vector<double>> images;
  std::vector<std::vector<std::uint32_t>> sequences;
  std::vector<Split> splits;
  std::string provenance;

  std::size_t size() const;
  std::size_t feature_dim() const { return height * width * channels; }
  /// Samples carrying the given tag, in order.
  Dataset select(Split split) const;
  /// Throws DataError when a split is empty or a sample breaks the range rules.
  void validate() const;
};

/// Tags the last `eval_fraction` of a seeded permutation as Eval. Both splits
/// keep at least one sample.
void assign_splits(Dataset& ds, double eval_fraction, std::uint64_t seed);

/// Gradients, Gaussian blobs and stripes, clamped to [0, 1].
Dataset generate_synthetic_images(std::size_t n, std::size_t side, std::uint64_t seed);

/// Sequences from a seeded sparse Markov chain over ids 2..vocab-1, each of
/// length in [max_len / 2, max_len], padded to max_len.
Dataset generate_synthetic_text(std::size_t n, std::size_t vocab_size, std::size_t max_len, std::uint64_t seed);

struct CifarOptions {
  bool grayscale = false;
  /// Block-average factor applied per side (1 keeps 32x32).
  std::size_t downsample = 1;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// CIFAR-10 binary batch: records of one label byte and 3072 channel-major
/// pixel bytes.
Dataset ingest_cifar10_binary(const std::filesystem::path& path, const CifarOptions& options = {});
Dataset parse_cifar10_binary(std::span<const std::uint8_t> bytes, const CifarOptions& options = {});

struct Vocabulary {
  std::vector<std::string> words;  // words[0] = <pad>, words[1] = <unk>
  std::unordered_map<std::string, std::uint32_t> index;

  /// The most frequent words of the corpus, ties broken alphabetically.
  static Vocabulary build(std::span<const std::string> lines, std::size_t max_size);
  std::uint32_t lookup(const std::string& word) const;
  std::size_t size() const { return words.size(); }
};

/// One whitespace-tokenized sentence per line; unknown words map to kUnkToken.
/// Sequences are truncated or padded to seq_len; blank lines are skipped.
Dataset ingest_text_lines(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t seq_len);
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// [indices.size(), feature_dim] images.
Tensor image_batch(const Dataset& ds, std::span<const std::size_t> indices);
/// Flattened [indices.size() * seq_len] token ids.
std::vector<std::uint32_t> token_batch(const Dataset& ds, std::span<const std::size_t> indices);

/// Drops padding.
std::vector<std::uint32_t> strip_padding(std::span<const std::uint32_t> tokens);

}  // namespace wasecom
