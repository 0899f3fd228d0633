#include "wasecom/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

namespace wasecom {

double mse(std::span<const double> x, std::span<const double> x_hat, std::size_t cols) {
  if (x.size() != x_hat.size()) {
    throw std::invalid_argument("mse: sizes " + std::to_string(x.size()) + " and " + std::to_string(x_hat.size()) +
                                " differ");
  }
  if (x.empty() || cols == 0 || x.size() % cols != 0) throw std::invalid_argument("mse: bad row width");
  const std::size_t rows = x.size() / cols;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x[r * cols + c] - x_hat[r * cols + c];
      acc += d * d;
    }
    total += acc / static_cast<double>(cols);
  }
  return total / static_cast<double>(rows);
}

double mse(std::span<const double> x, std::span<const double> x_hat) { return mse(x, x_hat, x.size()); }

double psnr_from_mse(double mse_value, double max_val) {
  if (!(max_val > 0.0)) throw std::invalid_argument("psnr: max_val must be > 0");
  const double peak = max_val * max_val;
  if (mse_value < peak * 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak / mse_value));
}

double psnr(std::span<const double> x, std::span<const double> x_hat, double max_val) {
  return psnr_from_mse(mse(x, x_hat), max_val);
}

double ssim(std::span<const double> x, std::span<const double> y, std::size_t height, std::size_t width,
            const SsimOptions& options) {
  if (x.size() != y.size() || x.size() != height * width) {
    throw std::invalid_argument("ssim: images must both be " + std::to_string(height) + "x" + std::to_string(width));
  }
  const std::size_t win = options.window;
  if (win == 0 || win > std::min(height, width)) {
    throw std::invalid_argument("ssim: window " + std::to_string(win) + " exceeds image side");
  }
  const double c1 = options.c1.value_or((0.01 * options.max_val) * (0.01 * options.max_val));
  const double c2 = options.c2.value_or((0.03 * options.max_val) * (0.03 * options.max_val));
  const double count = static_cast<double>(win * win);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r0 = 0; r0 + win <= height; ++r0) {
    for (std::size_t c0 = 0; c0 + win <= width; ++c0) {
      double mx = 0.0, my = 0.0;
      for (std::size_t r = r0; r < r0 + win; ++r) {
        for (std::size_t c = c0; c < c0 + win; ++c) {
          mx += x[r * width + c];
          my += y[r * width + c];
        }
      }
      mx /= count;
      my /= count;
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (std::size_t r = r0; r < r0 + win; ++r) {
        for (std::size_t c = c0; c < c0 + win; ++c) {
          const double dx = x[r * width + c] - mx;
          const double dy = y[r * width + c] - my;
          vx += dx * dx;
          vy += dy * dy;
          cov += dx * dy;
        }
      }
      vx /= count;
      vy /= count;
      cov /= count;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

namespace {

using Ngram = std::vector<std::uint32_t>;

std::map<Ngram, std::size_t> count_ngrams(std::span<const std::uint32_t> seq, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (seq.size() < n) return out;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++out[Ngram(seq.begin() + i, seq.begin() + i + n)];
  return out;
}

}  // namespace

double bleu(std::span<const std::uint32_t> candidate, std::span<const std::vector<std::uint32_t>> references,
            std::size_t max_n) {
  if (max_n == 0) throw std::invalid_argument("bleu: max_n must be >= 1");
  if (references.empty()) throw std::invalid_argument("bleu: no references");
  if (candidate.empty()) return 0.0;
  constexpr double kSmooth = 1e-9;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = count_ngrams(candidate, n);
    std::map<Ngram, std::size_t> ceiling;
    for (const auto& ref : references) {
      for (const auto& [g, c] : count_ngrams(ref, n)) ceiling[g] = std::max(ceiling[g], c);
    }
    std::size_t clipped = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = ceiling.find(g);
      if (it != ceiling.end()) clipped += std::min(c, it->second);
    }
    const double num = clipped == 0 ? kSmooth : static_cast<double>(clipped);
    const double den = total == 0 ? 1.0 : static_cast<double>(total);
    log_sum += std::log(num / den);
  }
  const double c = static_cast<double>(candidate.size());
  double r = static_cast<double>(references.front().size());
  for (const auto& ref : references) {
    const double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

double bleu(std::span<const std::uint32_t> candidate, std::span<const std::uint32_t> reference, std::size_t max_n) {
  std::vector<std::vector<std::uint32_t>> refs{std::vector<std::uint32_t>(reference.begin(), reference.end())};
  return bleu(candidate, refs, max_n);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv_header() { return "task,snr_db,attack,mse,psnr_db,ssim,bleu,n"; }

std::string metrics_csv_row(const MetricsRecord& m) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return to_string(m.task) + "," + format_double(m.snr_db) + "," + m.attack + "," + format_double(m.mse) + "," +
         opt(m.psnr_db) + "," + opt(m.ssim) + "," + opt(m.bleu) + "," + std::to_string(m.n);
}

}  // namespace wasecom
