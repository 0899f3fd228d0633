#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wasecom/models.hpp"
#include "wasecom/tensor.hpp"

namespace wasecom {

enum class ChannelKind { AWGN, Rayleigh };

std::string to_string(ChannelKind kind);
ChannelKind parse_channel_kind(const std::string& name);

struct ChannelConfig {
  ChannelKind kind = ChannelKind::AWGN;
  double snr_db = 10.0;
  std::uint64_t seed = 0;

  bool operator==(const ChannelConfig&) const = default;
};

/// One draw of the real-valued block-fading channel z = h * u + w, one fading
/// coefficient per row of u.
struct ChannelRealization {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double noise_variance = 0.0;
  std::vector<double> h;  // [rows]
  std::vector<double> w;  // [rows * cols]
};

enum class PowerReference {
  Unit,      // u is power-normalized; sigma^2 = 10^(-snr/10)
  Measured,  // sigma^2 uses the batch mean of u^2
};

/// sigma^2 = measured_power / 10^(snr_db / 10). Throws on non-positive power
/// or non-finite SNR.
double noise_variance(const ChannelConfig& cfg, double measured_power);

/// Draws h (1 for AWGN, Rayleigh with E[h^2] = 1 otherwise) and w ~ N(0, sigma^2).
ChannelRealization sample_realization(const ChannelConfig& cfg, std::size_t rows, std::size_t cols,
                                      double signal_power, Rng& rng);

/// h * u + w for a fixed realization. Gradients reach u only.
Tensor apply_channel(const Tensor& u, const ChannelRealization& realization);

struct Transmission {
  Tensor z;
  ChannelRealization realization;
};

/// Samples a realization for u and applies it. Throws on non-finite u.
Transmission transmit(const ChannelConfig& cfg, const Tensor& u, Rng& rng,
                      PowerReference reference = PowerReference::Unit);

/// 10 log10(mean((h u)^2) / mean(w^2)), capped at 200 dB.
double empirical_snr(const Tensor& u, const ChannelRealization& realization);

inline constexpr double kSnrCapDb = 200.0;

}  // namespace wasecom
