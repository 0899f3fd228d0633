#include "wasecom/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wasecom/checkpoint.hpp"

namespace wasecom {

std::string to_string(TrainMode mode) { return mode == TrainMode::WaSeCom ? "wasecom" : "erm"; }

TrainMode parse_train_mode(const std::string& name) {
  if (name == "wasecom") return TrainMode::WaSeCom;
  if (name == "erm") return TrainMode::ERM;
  throw std::invalid_argument("unknown train mode '" + name + "' (expected wasecom or erm)");
}

std::string to_string(FractionMode mode) { return mode == FractionMode::Samples ? "samples" : "magnitude"; }

FractionMode parse_fraction_mode(const std::string& name) {
  if (name == "samples") return FractionMode::Samples;
  if (name == "magnitude") return FractionMode::Magnitude;
  throw std::invalid_argument("unknown fraction mode '" + name + "' (expected samples or magnitude)");
}

std::string to_string(AttackReference ref) { return ref == AttackReference::Perturbed ? "perturbed" : "clean"; }

AttackReference parse_attack_reference(const std::string& name) {
  if (name == "perturbed") return AttackReference::Perturbed;
  if (name == "clean") return AttackReference::Clean;
  throw std::invalid_argument("unknown attack reference '" + name + "' (expected perturbed or clean)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  if (substeps == 0) throw std::invalid_argument("train: substeps must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be finite and >= 0");
  if (!std::isfinite(channel.snr_db)) throw std::invalid_argument("train: snr_db must be finite");
  robustness.validate();
  perturb_inner.validate();
  perturb_outer.validate();
  model.validate();
  if (erm_joint && mode != TrainMode::ERM) throw std::invalid_argument("train: erm_joint requires mode erm");
}

std::string TrainLog::to_csv(bool include_wall_time) const {
  std::ostringstream os;
  os << "step,phase,total,penalty,expectation,lambda,gamma,wall_ms\n";
  for (const auto& r : steps) {
    os << r.step << ',' << r.phase << ',' << format_double(r.total) << ',' << format_double(r.penalty) << ','
       << format_double(r.expectation) << ',' << format_double(r.lambda) << ',' << format_double(r.gamma) << ','
       << (include_wall_time ? format_double(r.wall_ms) : std::string("0")) << '\n';
  }
  return os.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv();
}

ModelBundle initial_bundle(const TrainConfig& cfg) { return ModelBundle::create(cfg.model, cfg.seed); }

namespace {

void check_compatible(const ModelDims& dims, const Dataset& data) {
  data.validate();
  if (data.task != dims.task) throw std::invalid_argument("train: dataset task does not match the model");
  if (dims.task == TaskKind::ImageReconstruction) {
    if (data.feature_dim() != dims.input_dim) {
      throw std::invalid_argument("train: images have " + std::to_string(data.feature_dim()) +
                                  " values but the model expects " + std::to_string(dims.input_dim));
    }
  } else if (data.vocab_size != dims.vocab_size || data.seq_len != dims.seq_len) {
    throw std::invalid_argument("train: text vocab/seq_len do not match the model");
  }
}

SemanticBatch make_batch(const ModelBundle& bundle, const Dataset& data, std::span<const std::size_t> idx) {
  if (data.task == TaskKind::ImageReconstruction) return make_image_batch(image_batch(data, idx));
  return make_text_batch(bundle, token_batch(data, idx));
}

double signal_power(const ModelBundle& bundle, const Tensor& u) {
  if (bundle.dims.normalize_power) return 1.0;
  double acc = 0.0;
  for (double v : u.data()) acc += v * v;
  return std::max(acc / static_cast<double>(u.size()), 1e-12);
}

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, ModelBundle bundle)
      : cfg_(cfg),
        bundle_(std::move(bundle)),
        robustness_(cfg.robustness),
        data_rng_(cfg.seed),
        channel_rng_(cfg.channel.seed ^ (cfg.seed * 0x9E3779B97F4A7C15ULL)),
        perturb_rng_(cfg.seed + 0x5DEECE66DULL),
        start_(std::chrono::steady_clock::now()) {
    if (cfg.mode == TrainMode::ERM && cfg.erm_joint) {
      joint_ = make_optimizer(cfg.optimizer, bundle_.all_parameters(), cfg.lr);
    } else {
      auto outer = bundle_.psi();
      auto omega = bundle_.omega();
      outer.insert(outer.end(), omega.begin(), omega.end());
      auto inner = bundle_.theta();
      auto phi = bundle_.phi();
      inner.insert(inner.end(), phi.begin(), phi.end());
      outer_params_ = outer;
      inner_params_ = inner;
      outer_ = make_optimizer(cfg.optimizer, std::move(outer), cfg.lr);
      inner_ = make_optimizer(cfg.optimizer, std::move(inner), cfg.lr);
    }
  }

  TrainResult run(const Dataset& train, const Dataset* eval) {
    TrainLog log;
    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    std::size_t batches = 0;
    bool stop = false;
    for (std::size_t epoch = 0; epoch < cfg_.epochs && !stop; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), data_rng_);
      double outer_sum = 0.0, inner_sum = 0.0;
      std::size_t outer_count = 0, inner_count = 0;
      for (std::size_t lo = 0; lo < n; lo += cfg_.batch_size) {
        if (cfg_.max_batches != 0 && batches >= cfg_.max_batches) {
          stop = true;
          break;
        }
        const std::size_t hi = std::min(n, lo + cfg_.batch_size);
        std::span<const std::size_t> idx(order.data() + lo, hi - lo);
        if (joint_) {
          log.steps.push_back(joint_step(train, idx));
          notify(log.steps.back());
          inner_sum += log.steps.back().total;
          ++inner_count;
        } else {
          for (std::size_t k = 0; k < cfg_.substeps; ++k) {
            log.steps.push_back(outer_step(train, idx, log.steps.size()));
            notify(log.steps.back());
            outer_sum += log.steps.back().total;
            ++outer_count;
          }
          for (std::size_t k = 0; k < cfg_.substeps; ++k) {
            log.steps.push_back(inner_step(train, idx, log.steps.size()));
            notify(log.steps.back());
            inner_sum += log.steps.back().total;
            ++inner_count;
          }
        }
        ++batches;
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.mean_outer = outer_count ? outer_sum / static_cast<double>(outer_count) : 0.0;
      rec.mean_inner = inner_count ? inner_sum / static_cast<double>(inner_count) : 0.0;
      if (eval && cfg_.eval_channel && cfg_.eval_every_epoch) rec.eval = evaluate(bundle_, *eval, *cfg_.eval_channel);
      log.epochs.push_back(rec);
      if (cfg_.checkpoint_every != 0 && !cfg_.checkpoint_dir.empty() && (epoch + 1) % cfg_.checkpoint_every == 0) {
        std::filesystem::create_directories(cfg_.checkpoint_dir);
        save_checkpoint(bundle_, cfg_.checkpoint_dir / ("epoch_" + std::to_string(epoch + 1) + ".ckpt"));
      }
    }
    if (eval && cfg_.eval_channel) log.final_eval = evaluate(bundle_, *eval, *cfg_.eval_channel);
    return {bundle_, std::move(log), robustness_};
  }

 private:
  void notify(const StepRecord& r) const {
    if (cfg_.on_step) cfg_.on_step(r, bundle_);
  }

  bool robust() const { return cfg_.mode == TrainMode::WaSeCom; }

  ChannelRealization draw_channel(const Tensor& u) {
    return sample_realization(cfg_.channel, u.dim(0), u.dim(1), signal_power(bundle_, u), channel_rng_);
  }

  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

  StepRecord finish(std::size_t step, const char* phase, const Tensor& loss, double penalty, double expectation) {
    StepRecord r{step, phase, loss.item(), penalty, expectation, robustness_.lambda, robustness_.gamma, elapsed_ms()};
    if (!std::isfinite(r.total) || !std::isfinite(r.expectation)) {
      std::ostringstream os;
      os << "non-finite " << phase << " loss at step " << step << " (total=" << r.total << ", penalty=" << r.penalty
         << ", expectation=" << r.expectation << ", lambda=" << r.lambda << ", gamma=" << r.gamma << ")";
      throw TrainingError(os.str(), r);
    }
    return r;
  }

  StepRecord outer_step(const Dataset& data, std::span<const std::size_t> idx, std::size_t step) {
    set_requires_grad(inner_params_, false);
    set_requires_grad(outer_params_, true);
    const SemanticBatch batch = make_batch(bundle_, data, idx);
    const Tensor s = semantic_encode(bundle_, batch.features).detach();
    const Tensor u = channel_encode(bundle_, s);
    const ChannelRealization ch = draw_channel(u);
    Tensor loss;
    double penalty = 0.0, expectation = 0.0, mean_cost = 0.0;
    if (robust()) {
      DualObjectiveValue v = outer_dual_loss(bundle_, s, ch, robustness_, cfg_.perturb_outer, perturb_rng_);
      loss = v.total;
      penalty = v.penalty_term;
      expectation = v.expectation_term;
      mean_cost = v.mean_cost;
    } else {
      loss = mean(channel_row_loss(bundle_, s, apply_channel(u, ch)));
      expectation = loss.item();
    }
    StepRecord rec = finish(step, "outer", loss, penalty, expectation);
    backward(loss);
    outer_->step();
    if (robust() && robustness_.lambda_learnable) {
      robustness_ = update_duals(robustness_, std::nullopt, dual_gradient(robustness_.mu, mean_cost),
                                 robustness_.dual_lr);
    }
    set_requires_grad(inner_params_, true);
    return rec;
  }

  StepRecord inner_step(const Dataset& data, std::span<const std::size_t> idx, std::size_t step) {
    set_requires_grad(outer_params_, false);
    set_requires_grad(inner_params_, true);
    const SemanticBatch batch = make_batch(bundle_, data, idx);
    Tensor u;
    {
      FrozenParameters frozen(bundle_);
      u = channel_encode(bundle_, semantic_encode(bundle_, batch.features.detach()));
    }
    const ChannelRealization ch = draw_channel(u);
    Tensor loss;
    double penalty = 0.0, expectation = 0.0, mean_cost = 0.0;
    if (robust()) {
      DualObjectiveValue v = inner_dual_loss(bundle_, batch, ch, robustness_, cfg_.perturb_inner, perturb_rng_);
      loss = v.total;
      penalty = v.penalty_term;
      expectation = v.expectation_term;
      mean_cost = v.mean_cost;
    } else {
      loss = mean(semantic_row_loss(bundle_, batch, batch.features, ch));
      expectation = loss.item();
    }
    StepRecord rec = finish(step, "inner", loss, penalty, expectation);
    backward(loss);
    inner_->step();
    if (robust() && robustness_.lambda_learnable) {
      robustness_ = update_duals(robustness_, dual_gradient(robustness_.rho, mean_cost), std::nullopt,
                                 robustness_.dual_lr);
    }
    set_requires_grad(outer_params_, true);
    return rec;
  }

  StepRecord joint_step(const Dataset& data, std::span<const std::size_t> idx) {
    const SemanticBatch batch = make_batch(bundle_, data, idx);
    Tensor u;
    {
      FrozenParameters frozen(bundle_);
      u = channel_encode(bundle_, semantic_encode(bundle_, batch.features.detach()));
    }
    const ChannelRealization ch = draw_channel(u);
    Tensor loss = mean(semantic_row_loss(bundle_, batch, batch.features, ch));
    StepRecord rec = finish(step_counter_++, "joint", loss, 0.0, loss.item());
    backward(loss);
    joint_->step();
    return rec;
  }

  const TrainConfig& cfg_;
  ModelBundle bundle_;
  RobustnessConfig robustness_;
  Rng data_rng_;
  Rng channel_rng_;
  Rng perturb_rng_;
  std::chrono::steady_clock::time_point start_;
  std::vector<Tensor> outer_params_;
  std::vector<Tensor> inner_params_;
  std::unique_ptr<Optimizer> outer_;
  std::unique_ptr<Optimizer> inner_;
  std::unique_ptr<Optimizer> joint_;
  std::size_t step_counter_ = 0;
};

TrainResult run_training(const TrainConfig& cfg, const Dataset& train, const Dataset* eval) {
  cfg.validate();
  check_compatible(cfg.model, train);
  if (eval) check_compatible(cfg.model, *eval);
  Trainer t(cfg, initial_bundle(cfg));
  return t.run(train, eval);
}

}  // namespace

TrainResult train_wasecom(const TrainConfig& cfg, const Dataset& train, const Dataset* eval) {
  TrainConfig c = cfg;
  c.mode = TrainMode::WaSeCom;
  c.erm_joint = false;
  return run_training(c, train, eval);
}

TrainResult train_erm(const TrainConfig& cfg, const Dataset& train, const Dataset* eval) {
  TrainConfig c = cfg;
  c.mode = TrainMode::ERM;
  return run_training(c, train, eval);
}

TrainResult train(const TrainConfig& cfg, const Dataset& train, const Dataset* eval) {
  return cfg.mode == TrainMode::WaSeCom ? train_wasecom(cfg, train, eval) : train_erm(cfg, train, eval);
}

namespace {

std::vector<std::uint32_t> argmax_tokens(const Tensor& logits) {
  const std::size_t vocab = logits.dim(2);
  const std::size_t rows = logits.size() / vocab;
  auto d = logits.data();
  std::vector<std::uint32_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto first = d.begin() + static_cast<std::ptrdiff_t>(r * vocab);
    out[r] = static_cast<std::uint32_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(vocab)) - first);
  }
  return out;
}

Tensor select_rows(const Tensor& attacked, const Tensor& clean, const std::vector<bool>& mask) {
  const std::size_t rows = clean.dim(0);
  const std::size_t cols = clean.size() / rows;
  std::vector<double> out = clean.to_vector();
  auto a = attacked.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (mask[r]) std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  return Tensor::from(clean.shape(), std::move(out));
}

}  // namespace

MetricsRecord evaluate(const ModelBundle& bundle, const Dataset& data, const ChannelConfig& channel,
                       const std::optional<AttackSpec>& attack, const EvalOptions& options) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  check_compatible(bundle.dims, data);
  if (options.batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  FrozenParameters frozen(bundle);

  PerturbSpec spec;
  if (attack) {
    spec = attack->perturb;
    if (!(attack->fraction >= 0.0 && attack->fraction <= 1.0)) {
      throw std::invalid_argument("evaluate: attack fraction must be in [0, 1]");
    }
    if (attack->fraction_mode == FractionMode::Magnitude) spec.epsilon_inf = attack->fraction;
    spec.validate();
    if (spec.method == PerturbMethod::GaussianSample) throw std::invalid_argument("evaluate: gaussian is not an attack");
  }
  const bool attacking = attack && spec.method != PerturbMethod::None;
  const bool clean_reference = attack && attack->reference == AttackReference::Clean;

  Rng channel_rng(channel.seed);
  Rng attack_rng(channel.seed ^ 0xA5A5A5A5DEADBEEFULL);
  const bool image = data.task == TaskKind::ImageReconstruction;
  const std::size_t n = data.size();
  const std::size_t side_h = data.height, side_w = data.width * data.channels;
  SsimOptions ssim_opts;
  if (image) ssim_opts.window = std::min<std::size_t>({8, side_h, side_w});

  MetricsRecord rec;
  rec.task = data.task;
  rec.snr_db = channel.snr_db;
  rec.attack = attack ? attack->name : "none";
  rec.n = n;
  double mse_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0, bleu_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t lo = 0; lo < n; lo += options.batch_size) {
    const std::size_t hi = std::min(n, lo + options.batch_size);
    idx.resize(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    const SemanticBatch batch = make_batch(bundle, data, idx);
    const Tensor x = batch.features.detach();
    const Tensor u0 = channel_encode(bundle, semantic_encode(bundle, x));
    const ChannelRealization ch = sample_realization(channel, u0.dim(0), u0.dim(1), signal_power(bundle, u0), channel_rng);

    Tensor x_tilde = x;
    if (attacking) {
      std::vector<bool> mask(idx.size(), true);
      if (attack->fraction_mode == FractionMode::Samples) {
        std::vector<std::size_t> perm(idx.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), attack_rng);
        const auto k = static_cast<std::size_t>(std::llround(attack->fraction * static_cast<double>(idx.size())));
        std::fill(mask.begin(), mask.end(), false);
        for (std::size_t j = 0; j < k; ++j) mask[perm[j]] = true;
      }
      RowObjective objective = [&](const Tensor& cand) {
        if (!image || !clean_reference) return semantic_row_loss(bundle, batch, cand, ch);
        Tensor out = semantic_decode(bundle, channel_decode(bundle, apply_channel(
                                                                    channel_encode(bundle, semantic_encode(bundle, cand)), ch)));
        return per_sample_mse(x, out);
      };
      if (std::find(mask.begin(), mask.end(), true) != mask.end()) {
        x_tilde = select_rows(perturb(objective, x, spec), x, mask);
      }
    }

    Tensor out = semantic_decode(bundle, channel_decode(bundle, apply_channel(
                                                                channel_encode(bundle, semantic_encode(bundle, x_tilde)), ch)));
    if (image) {
      const Tensor& ref = clean_reference ? x : x_tilde;
      const std::size_t d = data.feature_dim();
      auto r = ref.data();
      auto o = out.data();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        auto ri = r.subspan(i * d, d);
        auto oi = o.subspan(i * d, d);
        const double m = mse(ri, oi);
        mse_sum += m;
        psnr_sum += psnr_from_mse(m);
        ssim_sum += ssim(ri, oi, side_h, side_w, ssim_opts);
      }
    } else {
      const auto ce = per_sample_cross_entropy(batch.tokens, out).to_vector();
      const auto decoded = argmax_tokens(out);
      const std::size_t len = data.seq_len;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        mse_sum += ce[i];
        std::span<const std::uint32_t> ref_tokens(batch.tokens.data() + i * len, len);
        std::span<const std::uint32_t> cand_tokens(decoded.data() + i * len, len);
        const auto ref_words = strip_padding(ref_tokens);
        const auto cand_words = strip_padding(cand_tokens);
        bleu_sum += ref_words.empty() ? (cand_words.empty() ? 1.0 : 0.0) : bleu(cand_words, ref_words);
      }
    }
  }
  const double count = static_cast<double>(n);
  rec.mse = mse_sum / count;
  if (image) {
    rec.psnr_db = psnr_sum / count;
    rec.ssim = ssim_sum / count;
  } else {
    rec.bleu = bleu_sum / count;
  }
  return rec;
}

}  // namespace wasecom
