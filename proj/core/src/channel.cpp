#include "wasecom/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wasecom {

std::string to_string(ChannelKind kind) { return kind == ChannelKind::AWGN ? "awgn" : "rayleigh"; }

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "awgn" || name == "AWGN") return ChannelKind::AWGN;
  if (name == "rayleigh" || name == "Rayleigh") return ChannelKind::Rayleigh;
  throw std::invalid_argument("unknown channel kind '" + name + "' (expected awgn|rayleigh)");
}

double noise_variance(const ChannelConfig& cfg, double measured_power) {
  if (!std::isfinite(cfg.snr_db)) throw std::invalid_argument("noise_variance: snr_db must be finite");
  if (!(measured_power > 0.0)) {
    throw std::invalid_argument("noise_variance: signal power must be positive, got " + std::to_string(measured_power));
  }
  return measured_power / std::pow(10.0, cfg.snr_db / 10.0);
}

ChannelRealization sample_realization(const ChannelConfig& cfg, std::size_t rows, std::size_t cols,
                                      double signal_power, Rng& rng) {
  ChannelRealization r;
  r.rows = rows;
  r.cols = cols;
  r.noise_variance = noise_variance(cfg, signal_power);
  r.h.assign(rows, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (cfg.kind == ChannelKind::Rayleigh) {
    // |X + iY| with X, Y ~ N(0, 1/2): Rayleigh with scale 1/sqrt(2).
    const double s = std::sqrt(0.5);
    for (auto& h : r.h) {
      const double a = s * gauss(rng);
      const double b = s * gauss(rng);
      h = std::sqrt(a * a + b * b);
    }
  }
  const double sigma = std::sqrt(r.noise_variance);
  r.w.resize(rows * cols);
  for (auto& w : r.w) w = sigma * gauss(rng);
  return r;
}

Tensor apply_channel(const Tensor& u, const ChannelRealization& realization) {
  if (u.rank() != 2 || u.dim(0) != realization.rows || u.dim(1) != realization.cols) {
    throw ShapeError("apply_channel: signal " + shape_string(u.shape()) + " does not match realization [" +
                     std::to_string(realization.rows) + "," + std::to_string(realization.cols) + "]");
  }
  Tensor h = Tensor::from({realization.rows, 1}, realization.h);
  Tensor w = Tensor::from({realization.rows, realization.cols}, realization.w);
  return add(mul(u, h), w);
}

Transmission transmit(const ChannelConfig& cfg, const Tensor& u, Rng& rng, PowerReference reference) {
  if (u.rank() != 2) throw ShapeError("transmit: expected a [rows,cols] signal, got " + shape_string(u.shape()));
  double power = 0.0;
  for (double v : u.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("transmit: signal contains non-finite values");
    power += v * v;
  }
  power /= static_cast<double>(u.size());
  const double reference_power = reference == PowerReference::Unit ? 1.0 : power;
  auto realization = sample_realization(cfg, u.dim(0), u.dim(1), reference_power, rng);
  Tensor z = apply_channel(u, realization);
  return {std::move(z), std::move(realization)};
}

double empirical_snr(const Tensor& u, const ChannelRealization& realization) {
  if (u.size() != realization.w.size()) throw ShapeError("empirical_snr: realization does not match signal");
  auto d = u.data();
  double signal = 0.0, noise = 0.0;
  for (std::size_t r = 0; r < realization.rows; ++r) {
    for (std::size_t c = 0; c < realization.cols; ++c) {
      const double s = realization.h[r] * d[r * realization.cols + c];
      signal += s * s;
      const double w = realization.w[r * realization.cols + c];
      noise += w * w;
    }
  }
  if (noise <= 0.0) return kSnrCapDb;
  const double db = 10.0 * std::log10(signal / noise);
  return std::min(db, kSnrCapDb);
}

}  // namespace wasecom
