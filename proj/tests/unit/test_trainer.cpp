#include <stdexcept>
#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "test_support.hpp"
#include "wasecom/checkpoint.hpp"
#include "wasecom/trainer.hpp"

using namespace wasecom;

namespace {

std::pair<Dataset, Dataset> image_data(std::size_t n = 120) {
  Dataset all = generate_synthetic_images(n, 4, 5);
  assign_splits(all, 0.25, 6);
  return {all.select(Split::Train), all.select(Split::Eval)};
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 16;
  c.lr = 0.01;
  c.seed = 3;
  c.model.input_dim = 16;
  c.model.semantic_dim = 4;
  c.model.signal_dim = 6;
  c.model.hidden_dim = 12;
  c.robustness.rho = 0.2;
  c.robustness.mu = 0.1;
  return c;
}

std::uint64_t group_hash(const std::vector<Tensor>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    for (double v : p.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ULL;
    }
  }
  return h;
}

template <class... G>
std::vector<Tensor> concat(G... groups) {
  std::vector<Tensor> out;
  (out.insert(out.end(), groups.begin(), groups.end()), ...);
  return out;
}

}  // namespace

TEST_CASE("zero epochs return the initialization") {
  auto [train_set, eval_set] = image_data();
  TrainConfig c = small_config();
  c.epochs = 0;
  const auto r = train(c, train_set);
  CHECK(r.bundle.hash() == initial_bundle(c).hash());
  CHECK(r.log.steps.empty());
}

TEST_CASE("same seed reproduces the log and checkpoints") {
  auto [train_set, eval_set] = image_data();
  TrainConfig c = small_config();
  c.checkpoint_every = 1;
  const auto dir = test::scratch("repro");
  c.checkpoint_dir = dir / "a";
  const auto a = train(c, train_set);
  c.checkpoint_dir = dir / "b";
  const auto b = train(c, train_set);
  CHECK(a.log.to_csv(false) == b.log.to_csv(false));
  CHECK(a.bundle.hash() == b.bundle.hash());
  for (const char* f : {"epoch_1.ckpt", "epoch_2.ckpt"}) {
    CHECK(load_checkpoint(dir / "a" / f).hash() == load_checkpoint(dir / "b" / f).hash());
  }
}

TEST_CASE("zero radii without attacks track ERM bit for bit") {
  auto [train_set, eval_set] = image_data();
  TrainConfig c = small_config();
  c.epochs = 3;
  c.robustness.rho = 0.0;
  c.robustness.mu = 0.0;
  c.perturb_inner.method = PerturbMethod::None;
  c.perturb_outer.method = PerturbMethod::None;
  std::vector<std::uint64_t> ha, hb;
  c.on_step = [&](const StepRecord&, const ModelBundle& m) { ha.push_back(m.hash()); };
  c.mode = TrainMode::WaSeCom;
  train(c, train_set);
  c.on_step = [&](const StepRecord&, const ModelBundle& m) { hb.push_back(m.hash()); };
  c.mode = TrainMode::ERM;
  train(c, train_set);
  CHECK(ha.size() == 2 * 3 * 6);
  CHECK(ha == hb);
}

TEST_CASE("ERM lowers the held-out loss") {
  auto [train_set, eval_set] = image_data(400);
  TrainConfig c = small_config();
  c.mode = TrainMode::ERM;
  c.epochs = 20;
  c.max_batches = 100;  // 200 optimizer steps
  c.channel.snr_db = 20.0;
  const ChannelConfig ec{ChannelKind::AWGN, 20.0, 77};
  const double before = evaluate(initial_bundle(c), eval_set, ec).mse;
  const auto r = train(c, train_set);
  CHECK(r.log.steps.size() == 200);
  const double after = evaluate(r.bundle, eval_set, ec).mse;
  CHECK(after < before);
  CHECK(after < 0.5 * before);
}

TEST_CASE("zero learning rate keeps parameters") {
  auto [train_set, eval_set] = image_data();
  TrainConfig c = small_config();
  c.lr = 0.0;
  for (auto mode : {TrainMode::ERM, TrainMode::WaSeCom}) {
    c.mode = mode;
    CHECK(train(c, train_set).bundle.hash() == initial_bundle(c).hash());
  }
}

TEST_CASE("each phase moves only its own parameters and multiplier") {
  auto [train_set, eval_set] = image_data();
  TrainConfig c = small_config();
  c.robustness.dual_lr = 0.5;
  std::uint64_t inner_prev = 0, outer_prev = 0;
  // Records carry the multipliers seen at the start of their step, so record
  // k + 1 shows what step k did to them.
  double lambda_prev = c.robustness.lambda, gamma_prev = c.robustness.gamma;
  std::string prev_phase;
  std::size_t checked = 0;
  const auto init = initial_bundle(c);
  inner_prev = group_hash(concat(init.theta(), init.phi()));
  outer_prev = group_hash(concat(init.psi(), init.omega()));
  c.on_step = [&](const StepRecord& r, const ModelBundle& m) {
    const auto inner = group_hash(concat(m.theta(), m.phi()));
    const auto outer = group_hash(concat(m.psi(), m.omega()));
    if (r.phase == "outer") {
      CHECK(inner == inner_prev);
      CHECK(outer != outer_prev);
    } else {
      CHECK(outer == outer_prev);
      CHECK(inner != inner_prev);
    }
    if (prev_phase == "outer") CHECK(r.lambda == lambda_prev);
    if (prev_phase == "inner") CHECK(r.gamma == gamma_prev);
    inner_prev = inner;
    outer_prev = outer;
    lambda_prev = r.lambda;
    gamma_prev = r.gamma;
    prev_phase = r.phase;
    ++checked;
  };
  const auto res = train(c, train_set);
  CHECK(checked == res.log.steps.size());
  CHECK(res.log.steps.size() == 2 * 2 * 6);
  CHECK(res.robustness.lambda >= 0.0);
  CHECK(res.robustness.gamma >= 0.0);
}

TEST_CASE("evaluation: overfit toy set, radius-0 attack, no side effects") {
  Dataset toy;
  toy.height = 2;
  toy.width = 2;
  toy.images = {{0.1, 0.9, 0.2, 0.8}, {0.9, 0.1, 0.8, 0.2}, {0.5, 0.5, 0.1, 0.9}, {0.3, 0.7, 0.6, 0.4}};
  toy.provenance = "toy";
  TrainConfig c;
  c.mode = TrainMode::ERM;
  c.epochs = 1500;
  c.batch_size = 4;
  c.lr = 0.01;
  c.model.input_dim = 4;
  c.model.semantic_dim = 4;
  c.model.signal_dim = 4;
  c.model.hidden_dim = 16;
  c.channel.snr_db = 200.0;
  const auto r = train(c, toy);
  const ChannelConfig noiseless{ChannelKind::AWGN, 200.0, 1};
  const auto h = r.bundle.hash();
  const auto clean = evaluate(r.bundle, toy, noiseless);
  CHECK(clean.mse < 1e-3);
  CHECK(r.bundle.hash() == h);

  AttackSpec zero{"zero", PerturbSpec{PerturbMethod::FGSM, 0.0, 0.05, 7, 1, 0.1}};
  auto attacked = evaluate(r.bundle, toy, noiseless, zero);
  attacked.attack = clean.attack;
  CHECK(attacked == clean);
  CHECK(r.bundle.hash() == h);
}

TEST_CASE("attacked evaluation sees the clean noise and hurts") {
  auto [train_set, eval_set] = image_data(200);
  TrainConfig c = small_config();
  c.epochs = 5;
  const auto r = train(c, train_set);
  const ChannelConfig ch{ChannelKind::Rayleigh, 10.0, 5};
  AttackSpec a{"fgsm", PerturbSpec{PerturbMethod::FGSM, INFINITY, 0.05, 7, 1, 0.1}, 1.0};
  const auto clean = evaluate(r.bundle, eval_set, ch);
  const auto hit = evaluate(r.bundle, eval_set, ch, a);
  CHECK(hit.psnr_db.value() < clean.psnr_db.value());
  a.fraction = 0.0;
  auto none = evaluate(r.bundle, eval_set, ch, a);
  CHECK(none.mse == clean.mse);
  a.reference = AttackReference::Clean;
  a.fraction = 1.0;
  CHECK(evaluate(r.bundle, eval_set, ch, a).psnr_db.value() < clean.psnr_db.value());
  a.fraction_mode = FractionMode::Magnitude;
  a.fraction = 0.0;
  CHECK(evaluate(r.bundle, eval_set, ch, a).mse == clean.mse);
}

TEST_CASE("robust training keeps clean loss within twice ERM") {
  auto [train_set, eval_set] = image_data(300);
  TrainConfig c = small_config();
  c.epochs = 8;
  const ChannelConfig ch{ChannelKind::AWGN, 10.0, 9};
  c.mode = TrainMode::ERM;
  const double erm = evaluate(train(c, train_set).bundle, eval_set, ch).mse;
  c.mode = TrainMode::WaSeCom;
  const double robust = evaluate(train(c, train_set).bundle, eval_set, ch).mse;
  CHECK(robust <= 2.0 * erm);
}

TEST_CASE("text training and joint ERM run") {
  Dataset all = generate_synthetic_text(60, 10, 5, 2);
  assign_splits(all, 0.2, 1);
  const Dataset tr = all.select(Split::Train);
  TrainConfig c = small_config();
  c.model.task = TaskKind::TextReconstruction;
  c.model.input_dim = 4;
  c.model.vocab_size = 10;
  c.model.seq_len = 5;
  const auto r = train(c, tr);
  CHECK(r.log.steps.size() == 2 * 2 * 3);
  c.mode = TrainMode::ERM;
  c.erm_joint = true;
  const auto j = train(c, tr);
  CHECK(j.log.steps.size() == 2 * 3);
  CHECK(j.log.steps.front().phase == "joint");
  const auto m = evaluate(r.bundle, all.select(Split::Eval), {ChannelKind::AWGN, 10.0, 1});
  CHECK(m.bleu.has_value());
  CHECK(m.bleu.value() >= 0.0);
  CHECK(m.bleu.value() <= 1.0);
}

TEST_CASE("a diverging run aborts with the offending record") {
  auto [train_set, eval_set] = image_data();
  TrainConfig c = small_config();
  c.optimizer = OptimizerKind::Sgd;
  c.lr = 1e300;
  c.mode = TrainMode::ERM;
  CHECK_THROWS_AS(train(c, train_set), TrainingError);
  try {
    train(c, train_set);
  } catch (const TrainingError& e) {
    CHECK_FALSE(std::isfinite(e.record().total));
  }
}

TEST_CASE("config validation and log format") {
  TrainConfig c = small_config();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.erm_joint = true;
  c.mode = TrainMode::WaSeCom;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  TrainLog log;
  log.steps.push_back({0, "outer", 1.5, 0.25, 1.25, 1.0, 0.5, 3.0});
  CHECK(log.to_csv() == "step,phase,total,penalty,expectation,lambda,gamma,wall_ms\n0,outer,1.5,0.25,1.25,1,0.5,3\n");
  CHECK(parse_train_mode("erm") == TrainMode::ERM);
  CHECK_THROWS_AS(parse_train_mode("dro"), std::invalid_argument);
}
