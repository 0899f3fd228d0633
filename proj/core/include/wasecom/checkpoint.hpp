#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "wasecom/models.hpp"

namespace wasecom {

// Binary layout, all integers and floats little-endian:
//   "WASECOM\0"                        8-byte magic
//   u32 format version                 (kCheckpointVersion)
//   dims record                        u32 task, u64 input, u64 semantic,
//                                      u64 signal, u64 hidden, u64 hidden_layers,
//                                      u64 vocab, u64 seq_len, u32 activation,
//                                      u8 normalize_power
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims[rank],
//               f64 payload[product(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_checkpoint(const ModelBundle& bundle);
ModelBundle deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace wasecom
