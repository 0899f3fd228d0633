#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wasecom/models.hpp"

namespace wasecom {

/// Row-mean squared error averaged over rows, summed in the same order as
/// reconstruction_loss so the two agree bit for bit. `cols` is the row width.
double mse(std::span<const double> x, std::span<const double> x_hat, std::size_t cols);
double mse(std::span<const double> x, std::span<const double> x_hat);

inline constexpr double kPsnrCapDb = 100.0;

/// 10 log10(max^2 / mse), capped at 100 dB once mse < max^2 * 1e-10.
double psnr(std::span<const double> x, std::span<const double> x_hat, double max_val = 1.0);
double psnr_from_mse(double mse_value, double max_val = 1.0);

struct SsimOptions {
  std::size_t window = 8;
  double max_val = 1.0;
  /// Defaults to (0.01 max)^2 and (0.03 max)^2 when unset.
  std::optional<double> c1;
  std::optional<double> c2;
};

/// Mean local SSIM over all stride-1 uniform windows of a height x width image.
double ssim(std::span<const double> x, std::span<const double> y, std::size_t height, std::size_t width,
            const SsimOptions& options = {});

/// Sentence BLEU with clipped n-gram precisions, zero counts smoothed by 1e-9,
/// and the brevity penalty exp(1 - r / c) when c < r. The closest reference
/// length sets r.
double bleu(std::span<const std::uint32_t> candidate, std::span<const std::vector<std::uint32_t>> references,
            std::size_t max_n = 4);
double bleu(std::span<const std::uint32_t> candidate, std::span<const std::uint32_t> reference,
            std::size_t max_n = 4);

struct MetricsRecord {
  TaskKind task = TaskKind::ImageReconstruction;
  double snr_db = 0.0;
  std::string attack = "none";
  double mse = 0.0;
  std::optional<double> psnr_db;
  std::optional<double> ssim;
  std::optional<double> bleu;
  std::size_t n = 0;

  bool operator==(const MetricsRecord&) const = default;
};

/// `task,snr_db,attack,mse,psnr_db,ssim,bleu,n`
std::string metrics_csv_header();
/// Doubles are written in shortest round-trip form; absent metrics are empty.
std::string metrics_csv_row(const MetricsRecord& record);
std::string format_double(double v);

}  // namespace wasecom
