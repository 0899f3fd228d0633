#include "wasecom/perturbation.hpp"

#include <cmath>
#include <stdexcept>

namespace wasecom {

std::string to_string(PerturbMethod method) {
  switch (method) {
    case PerturbMethod::None: return "none";
    case PerturbMethod::GaussianSample: return "gaussian";
    case PerturbMethod::FGSM: return "fgsm";
    case PerturbMethod::PGD: return "pgd";
  }
  return "none";
}

PerturbMethod parse_perturb_method(const std::string& name) {
  if (name == "none") return PerturbMethod::None;
  if (name == "gaussian") return PerturbMethod::GaussianSample;
  if (name == "fgsm") return PerturbMethod::FGSM;
  if (name == "pgd") return PerturbMethod::PGD;
  throw std::invalid_argument("unknown perturbation method '" + name + "' (expected none|gaussian|fgsm|pgd)");
}

void PerturbSpec::validate() const {
  if (!(radius >= 0.0)) throw std::invalid_argument("perturbation radius must be >= 0");
  if (steps < 1) throw std::invalid_argument("perturbation steps must be >= 1");
  if (samples < 1) throw std::invalid_argument("perturbation sample count must be >= 1");
  if (!(step_size >= 0.0) || !(epsilon_inf >= 0.0)) {
    throw std::invalid_argument("perturbation step sizes must be >= 0");
  }
}

namespace {

struct RowLayout {
  std::size_t rows;
  std::size_t cols;
};

RowLayout layout(const Tensor& x) {
  if (x.rank() == 1) return {1, x.size()};
  return {x.dim(0), x.size() / x.dim(0)};
}

struct Evaluation {
  std::vector<double> values;
  std::vector<double> grad;
};

Evaluation evaluate(const RowObjective& objective, const Shape& shape, const std::vector<double>& point,
                    std::size_t rows) {
  Tensor leaf = Tensor::from(shape, point, true);
  Tensor v = objective(leaf);
  if (v.size() != rows) {
    throw ShapeError("perturbation objective must return one value per row; got " + shape_string(v.shape()) +
                     " for " + std::to_string(rows) + " rows");
  }
  sum(v).backward();
  return {v.to_vector(), leaf.grad()};
}

void project_rows(std::vector<double>& x, std::span<const double> center, RowLayout l, double radius) {
  if (std::isinf(radius)) return;
  for (std::size_t r = 0; r < l.rows; ++r) {
    double norm2 = 0.0;
    for (std::size_t c = 0; c < l.cols; ++c) {
      const double d = x[r * l.cols + c] - center[r * l.cols + c];
      norm2 += d * d;
    }
    const double norm = std::sqrt(norm2);
    if (norm <= radius) continue;
    const double f = radius / norm;
    for (std::size_t c = 0; c < l.cols; ++c) {
      const std::size_t j = r * l.cols + c;
      x[j] = center[j] + f * (x[j] - center[j]);
    }
  }
}

}  // namespace

Tensor project_ball(const Tensor& x_tilde, const Tensor& center, double radius) {
  if (x_tilde.shape() != center.shape()) {
    throw ShapeError("project_ball: shapes " + shape_string(x_tilde.shape()) + " and " +
                     shape_string(center.shape()) + " differ");
  }
  if (!(radius >= 0.0)) throw std::invalid_argument("project_ball: radius must be >= 0");
  auto out = x_tilde.to_vector();
  project_rows(out, center.data(), layout(center), radius);
  return Tensor::from(center.shape(), std::move(out));
}

Tensor fgsm(const RowObjective& objective, const Tensor& x, const PerturbSpec& spec) {
  const auto l = layout(x);
  const auto base = x.to_vector();
  if (spec.epsilon_inf == 0.0 || spec.radius == 0.0) return Tensor::from(x.shape(), base);
  const auto eval = evaluate(objective, x.shape(), base, l.rows);
  std::vector<double> out = base;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = eval.grad[i];
    out[i] += spec.epsilon_inf * static_cast<double>((g > 0.0) - (g < 0.0));
  }
  project_rows(out, base, l, spec.radius);
  return Tensor::from(x.shape(), std::move(out));
}

Tensor pgd(const RowObjective& objective, const Tensor& x, const PerturbSpec& spec, PgdTrace* trace) {
  const auto l = layout(x);
  const auto base = x.to_vector();
  if (spec.radius == 0.0 || spec.step_size == 0.0) return Tensor::from(x.shape(), base);

  auto record = [&](const std::vector<double>& best_values) {
    if (!trace) return;
    double total = 0.0;
    for (double v : best_values) total += v;
    trace->best_total.push_back(total);
  };

  std::vector<double> best = base;
  auto first = evaluate(objective, x.shape(), best, l.rows);
  std::vector<double> best_value = first.values;
  std::vector<double> best_grad = std::move(first.grad);
  std::vector<double> step(l.rows, spec.step_size);
  record(best_value);

  std::vector<double> candidate(base.size());
  for (std::size_t it = 0; it < spec.steps; ++it) {
    for (std::size_t r = 0; r < l.rows; ++r) {
      double norm2 = 0.0;
      for (std::size_t c = 0; c < l.cols; ++c) norm2 += best_grad[r * l.cols + c] * best_grad[r * l.cols + c];
      const double norm = std::sqrt(norm2);
      for (std::size_t c = 0; c < l.cols; ++c) {
        const std::size_t j = r * l.cols + c;
        candidate[j] = norm > 0.0 ? best[j] + step[r] * best_grad[j] / norm : best[j];
      }
    }
    project_rows(candidate, base, l, spec.radius);
    auto eval = evaluate(objective, x.shape(), candidate, l.rows);
    for (std::size_t r = 0; r < l.rows; ++r) {
      if (eval.values[r] > best_value[r]) {
        best_value[r] = eval.values[r];
        for (std::size_t c = 0; c < l.cols; ++c) {
          const std::size_t j = r * l.cols + c;
          best[j] = candidate[j];
          best_grad[j] = eval.grad[j];
        }
      } else {
        step[r] *= 0.5;
      }
    }
    record(best_value);
  }
  return Tensor::from(x.shape(), std::move(best));
}

std::vector<Tensor> gaussian_samples(const Tensor& x, const PerturbSpec& spec, Rng& rng) {
  spec.validate();
  if (std::isinf(spec.radius)) throw std::invalid_argument("gaussian_samples: radius must be finite");
  const auto l = layout(x);
  const double sigma = spec.radius / std::sqrt(static_cast<double>(l.cols));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Tensor> out;
  out.reserve(spec.samples);
  const auto base = x.to_vector();
  for (std::size_t k = 0; k < spec.samples; ++k) {
    auto v = base;
    if (sigma > 0.0) {
      for (auto& e : v) e += sigma * gauss(rng);
    }
    out.push_back(Tensor::from(x.shape(), std::move(v)));
  }
  return out;
}

Tensor perturb(const RowObjective& objective, const Tensor& x, const PerturbSpec& spec) {
  switch (spec.method) {
    case PerturbMethod::None: return x.detach();
    case PerturbMethod::FGSM: return fgsm(objective, x, spec);
    case PerturbMethod::PGD: return pgd(objective, x, spec);
    case PerturbMethod::GaussianSample:
      throw std::invalid_argument("perturb: gaussian sampling yields several candidates; use gaussian_samples");
  }
  return x.detach();
}

}  // namespace wasecom
