// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wasecom/checkpoint.hpp"
#include "wasecom/config.hpp"
#include "wasecom/gradcheck.hpp"
#include "wasecom/metrics.hpp"
#include "wasecom/objectives.hpp"
#include "wasecom/theory.hpp"
#include "wasecom/trainer.hpp"

namespace fs = std::filesystem;
using namespace wasecom;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- 1

Outcome gradients() {
  Timer t;
  const auto suite = random_gradcheck_suite(50, 2024);
  std::size_t failed = 0, max_params = 0;
  double worst_rel = 0.0;
  GradCheckTolerance tol;
  tol.relative = 1e-4;
  tol.absolute = 1e-6;
  for (const auto& c : suite) {
    const auto r = check_gradients(c.name, c.loss, c.leaves, tol);
    failed += !r.ok();
    max_params = std::max(max_params, r.parameters);
    worst_rel = std::max(worst_rel, r.max_rel_error);
  }
  const double secs = t.seconds();
  const bool ok = suite.size() == 50 && failed == 0 && max_params <= 1000 && secs < 30.0;
  return {ok, std::to_string(suite.size()) + " graphs, " + std::to_string(failed) + " failed, max params " +
                  std::to_string(max_params) + ", max rel err " + fmt(worst_rel) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 2, 3

std::vector<DualityReport> duality_reports(double& secs) {
  Timer t;
  std::vector<DualityReport> out;
  for (const auto& inst : duality_instances()) out.push_back(check_duality(inst, 100, 11));
  secs = t.seconds();
  return out;
}

Outcome strong_duality(const std::vector<DualityReport>& reports, double secs) {
  double worst = 0.0;
  bool closed_form = false;
  for (const auto& r : reports) {
    worst = std::max(worst, r.relative_gap);
    if (r.name == "point-mass-linear") {
      closed_form = std::abs(r.primal - 0.5) <= 1e-9 && std::abs(r.dual - 0.5) / 0.5 <= 0.02;
    }
  }
  const bool ok = reports.size() >= 10 && worst <= 0.02 && closed_form && secs < 60.0;
  return {ok, std::to_string(reports.size()) + " instances, max relative gap " + fmt(worst) +
                  (closed_form ? ", point mass = 0.5" : ", point mass wrong") + ", " + fmt(secs, 3) + " s"};
}

Outcome upper_bound(const std::vector<DualityReport>& reports) {
  std::size_t checked = 0, violations = 0;
  bool all_sampled = true;
  for (const auto& r : reports) {
    checked += r.distributions_checked;
    violations += r.upper_bound_violations;
    all_sampled = all_sampled && r.distributions_checked == 100;
  }
  return {all_sampled && violations == 0 && !reports.empty(),
          std::to_string(checked) + " sampled Q, " + std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------- 4

Outcome excess_risk() {
  std::size_t members = 0, violations = 0;
  double min_margin = 1.0;
  for (const auto& fam : lemma1_families()) {
    for (const auto& r : check_family(fam)) {
      ++members;
      const bool hypothesis = r.lambda >= r.lipschitz / fam.radius - 1e-12;
      const double bound = r.robustness_term + r.multiplier_term;
      const bool ok = r.passed() && hypothesis && r.margin >= 0.05 && r.excess_gap <= bound;
      violations += !ok;
      min_margin = std::min(min_margin, r.margin);
    }
  }
  return {members > 0 && violations == 0,
          std::to_string(members) + " members, " + std::to_string(violations) + " violations, min margin " +
              fmt(min_margin)};
}

// ---------------------------------------------------------------- 5

Outcome lse_sandwich() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 64);
  std::uniform_real_distribution<double> scale(-3.0, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t violations = 0, sets = 0;
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    const double mag = std::pow(10.0, scale(rng));
    for (auto& e : v) e = mag * gauss(rng);
    const double top = *std::max_element(v.begin(), v.end());
    const double log_k = std::log(static_cast<double>(v.size()));
    for (double eps : {1.0, 0.1, 0.01}) {
      const double l = lse_smooth(v, eps);
      violations += !(top - eps * log_k - 1e-9 <= l && l <= top + 1e-9);
    }
    ++sets;
  }
  return {violations == 0, std::to_string(sets) + " sets x 3 temperatures, " + std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------- 6

Outcome channel_calibration() {
  constexpr std::size_t draws = 100000;
  bool ok = true;
  std::ostringstream os;
  for (double snr : {0.0, 10.0, 20.0}) {
    ChannelConfig cfg{ChannelKind::AWGN, snr, 0};
    Rng rng(static_cast<std::uint64_t>(snr) + 1);
    const auto r = sample_realization(cfg, draws, 1, 1.0, rng);
    double m = 0.0, m2 = 0.0;
    for (double w : r.w) {
      m += w;
      m2 += w * w;
    }
    m /= draws;
    const double var = m2 / draws - m * m;
    const double expected = noise_variance(cfg, 1.0);
    const double err = std::abs(var / expected - 1.0);
    ok = ok && err <= 0.02;
    os << "awgn " << snr << " dB var err " << fmt(err, 3) << "; ";
  }
  ChannelConfig ray{ChannelKind::Rayleigh, 10.0, 0};
  Rng rng(99);
  const auto r = sample_realization(ray, draws, 1, 1.0, rng);
  double h1 = 0.0, h2 = 0.0;
  for (double h : r.h) {
    h1 += h;
    h2 += h * h;
  }
  h1 /= draws;
  h2 /= draws;
  const double mean_ref = std::sqrt(M_PI) / 2.0;
  const bool ray_ok = std::abs(h2 - 1.0) <= 0.02 && std::abs(h1 / mean_ref - 1.0) <= 0.02;
  os << "rayleigh E[h^2]=" << fmt(h2) << " E[h]=" << fmt(h1);
  return {ok && ray_ok, os.str()};
}

// ---------------------------------------------------------------- 7

Outcome degenerate_radius() {
  DatasetSpec spec;
  spec.n = 300;
  spec.side = 4;
  spec.seed = 3;
  const auto [train_set, eval_set] = load_datasets(spec);
  TrainConfig cfg;
  fit_model_to_dataset(cfg.model, train_set);
  cfg.model.semantic_dim = 6;
  cfg.model.signal_dim = 6;
  cfg.model.hidden_dim = 16;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.lr = 0.01;
  cfg.seed = 42;
  cfg.robustness.rho = 0.0;
  cfg.robustness.mu = 0.0;
  cfg.perturb_inner = PerturbSpec{PerturbMethod::None};
  cfg.perturb_outer = PerturbSpec{PerturbMethod::None};

  auto trajectory = [&](TrainMode mode) {
    TrainConfig c = cfg;
    c.mode = mode;
    std::vector<std::uint64_t> hashes;
    c.on_step = [&](const StepRecord&, const ModelBundle& b) { hashes.push_back(b.hash()); };
    const auto result = train(c, train_set);
    hashes.push_back(result.bundle.hash());
    return hashes;
  };
  const auto robust = trajectory(TrainMode::WaSeCom);
  const auto erm = trajectory(TrainMode::ERM);
  std::size_t first_diff = robust.size();
  for (std::size_t i = 0; i < std::min(robust.size(), erm.size()); ++i) {
    if (robust[i] != erm[i]) {
      first_diff = i;
      break;
    }
  }
  const std::size_t steps = robust.size() - 1;
  const bool ok = robust.size() == erm.size() && first_diff == robust.size() && steps >= 200;
  return {ok, std::to_string(steps) + " optimizer steps, " +
                  (first_diff == robust.size() ? std::string("all parameter hashes equal")
                                               : "first divergence at step " + std::to_string(first_diff))};
}

// ---------------------------------------------------------------- 8, 9, 10

struct CellKey {
  ChannelKind channel;
  double snr;
  std::string attack;
  bool operator<(const CellKey& o) const {
    return std::tie(channel, snr, attack) < std::tie(o.channel, o.snr, o.attack);
  }
};

using Sweep = std::map<CellKey, MetricsRecord>;

// Trains once and evaluates every (channel, snr, attack) cell of cfg.eval,
// exactly as the sweep command does.
Sweep train_and_sweep(ExperimentConfig cfg) {
  auto [train_set, eval_set] = load_datasets(cfg.dataset);
  fit_model_to_dataset(cfg.train.model, train_set);
  cfg.validate();
  const TrainResult r = train(cfg.train, train_set);
  Sweep out;
  for (ChannelKind kind : cfg.eval.channels) {
    for (double snr : cfg.eval.snr_db) {
      for (const auto& a : cfg.eval.attacks) {
        ChannelConfig ch{kind, snr, cfg.eval.channel_seed};
        out[{kind, snr, a.name}] = evaluate(r.bundle, eval_set, ch, a.to_spec(), {cfg.eval.batch_size});
      }
    }
  }
  return out;
}

const char* kImageBase = R"({
  "dataset": {"kind": "synthetic-images", "n": 2000, "side": 8},
  "train": {"epochs": 30, "batch_size": 32, "lr": 0.003},
  "eval": {"snr_db": [0, 10, 20], "channels": ["awgn", "rayleigh"], "attacks": [
    {"name": "clean", "fraction": 0.0},
    {"name": "f10", "fraction": 0.1, "perturb": {"method": "fgsm", "epsilon_inf": 0.1}},
    {"name": "f30", "fraction": 0.3, "perturb": {"method": "fgsm", "epsilon_inf": 0.1}}]}
})";

ExperimentConfig image_config(TrainMode mode, std::uint64_t seed) {
  ExperimentConfig cfg = parse_config(kImageBase);
  cfg.train.mode = mode;
  cfg.train.seed = seed;
  cfg.train.robustness.rho = 0.8;
  cfg.train.robustness.mu = 0.3;
  cfg.train.perturb_inner.step_size = 0.2;
  return cfg;
}

struct ImageStudy {
  Outcome robustness;
  Outcome parity;
};

ImageStudy image_study() {
  Timer t;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6};
  std::map<CellKey, std::pair<double, double>> erm_drop, robust_drop;  // (psnr, ssim) sums
  double erm_clean = 0.0, robust_clean = 0.0;
  auto accumulate = [](const Sweep& s, auto& drops) {
    for (const auto& [k, rec] : s) {
      if (k.attack == "clean") continue;
      const auto& clean = s.at({k.channel, k.snr, "clean"});
      drops[k].first += *clean.psnr_db - *rec.psnr_db;
      drops[k].second += *clean.ssim - *rec.ssim;
    }
  };
  for (auto seed : seeds) {
    const Sweep erm = train_and_sweep(image_config(TrainMode::ERM, seed));
    const Sweep robust = train_and_sweep(image_config(TrainMode::WaSeCom, seed));
    accumulate(erm, erm_drop);
    accumulate(robust, robust_drop);
    erm_clean += *erm.at({ChannelKind::AWGN, 20.0, "clean"}).psnr_db;
    robust_clean += *robust.at({ChannelKind::AWGN, 20.0, "clean"}).psnr_db;
  }
  // Nine cells: both fractions on AWGN, the 30% fraction on Rayleigh.
  int cells = 0, psnr_wins = 0, ssim_wins = 0;
  for (const auto& [k, e] : erm_drop) {
    if (k.channel == ChannelKind::Rayleigh && k.attack != "f30") continue;
    const auto& w = robust_drop.at(k);
    ++cells;
    psnr_wins += w.first < e.first;
    ssim_wins += w.second < e.second;
  }
  const double ratio = robust_clean / erm_clean;
  ImageStudy s;
  s.robustness = {cells == 9 && psnr_wins >= 8 && ssim_wins >= 7,
                  "PSNR-drop wins " + std::to_string(psnr_wins) + "/" + std::to_string(cells) + ", SSIM-drop wins " +
                      std::to_string(ssim_wins) + "/" + std::to_string(cells) + " over " +
                      std::to_string(seeds.size()) + " seeds, " + fmt(t.seconds(), 3) + " s"};
  s.parity = {ratio >= 0.9, "clean 20 dB PSNR ratio " + fmt(ratio) + " (robust " + fmt(robust_clean / 6.0) +
                                " dB, ERM " + fmt(erm_clean / 6.0) + " dB)"};
  return s;
}

const char* kTextBase = R"({
  "dataset": {"kind": "synthetic-text", "n": 2000, "vocab_size": 32, "seq_len": 8},
  "model": {"input_dim": 8, "semantic_dim": 8, "signal_dim": 8, "hidden_dim": 32},
  "train": {"epochs": 20, "batch_size": 32, "lr": 0.003},
  "robustness": {"rho": 0.3, "mu": 0.3},
  "eval": {"snr_db": [0, 6, 12, 18], "channels": ["awgn", "rayleigh"], "attacks": [
    {"name": "clean", "fraction": 0.0},
    {"name": "fgsm", "fraction": 1.0, "perturb": {"method": "fgsm", "epsilon_inf": 0.01}}]}
})";

Outcome text_study() {
  Timer t;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::map<CellKey, double> erm, robust;
  for (auto seed : seeds) {
    for (auto mode : {TrainMode::ERM, TrainMode::WaSeCom}) {
      ExperimentConfig cfg = parse_config(kTextBase);
      cfg.train.mode = mode;
      cfg.train.seed = seed;
      auto& dst = mode == TrainMode::ERM ? erm : robust;
      for (const auto& [k, rec] : train_and_sweep(cfg)) dst[k] += *rec.bleu / static_cast<double>(seeds.size());
    }
  }
  bool monotone = true;
  std::ostringstream os;
  for (ChannelKind kind : {ChannelKind::AWGN, ChannelKind::Rayleigh}) {
    double prev = -1.0;
    os << to_string(kind) << " BLEU";
    for (double snr : {0.0, 6.0, 12.0, 18.0}) {
      const double b = robust.at({kind, snr, "clean"});
      monotone = monotone && b >= prev - 0.02;
      prev = b;
      os << " " << fmt(b, 3);
    }
    os << "; ";
  }
  int wins = 0;
  for (ChannelKind kind : {ChannelKind::AWGN, ChannelKind::Rayleigh}) {
    for (double snr : {0.0, 6.0}) wins += robust.at({kind, snr, "fgsm"}) >= erm.at({kind, snr, "fgsm"});
  }
  os << "attacked wins " << wins << "/4, " << fmt(t.seconds(), 3) << " s";
  return {monotone && wins >= 3, os.str()};
}

// ---------------------------------------------------------------- 11

Outcome metric_identities() {
  const bool p = psnr_from_mse(0.01, 1.0) == 20.0;
  std::vector<double> img(64);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>((i * 37) % 64) / 63.0;
  const bool s = ssim(img, img, 8, 8) == 1.0;
  const std::vector<std::uint32_t> ab{1, 2}, abcd{1, 2, 3, 4};
  const double b = bleu(ab, abcd, 2);
  const bool bl = std::abs(b - std::exp(-1.0)) <= 1e-6;
  return {p && s && bl, std::string("PSNR ") + (p ? "ok" : "wrong") + ", SSIM " + (s ? "ok" : "wrong") +
                            ", BLEU " + fmt(b, 12)};
}

// ---------------------------------------------------------------- 12

Outcome persistence(const fs::path& dir) {
  fs::create_directories(dir);
  DatasetSpec spec;
  spec.n = 200;
  spec.side = 4;
  const auto [train_set, eval_set] = load_datasets(spec);
  TrainConfig cfg;
  fit_model_to_dataset(cfg.model, train_set);
  cfg.epochs = 2;
  cfg.seed = 8;
  const auto result = train(cfg, train_set);
  const auto path = dir / "model.ckpt";
  save_checkpoint(result.bundle, path);
  const ModelBundle loaded = load_checkpoint(path);
  const ChannelConfig ch{ChannelKind::Rayleigh, 5.0, 12345};
  AttackSpec attack;
  attack.perturb.epsilon_inf = 0.05;
  attack.fraction = 0.5;
  const bool clean_eq = evaluate(result.bundle, eval_set, ch) == evaluate(loaded, eval_set, ch);
  const bool attacked_eq = evaluate(result.bundle, eval_set, ch, attack) == evaluate(loaded, eval_set, ch, attack);
  const bool bytes_eq = serialize_checkpoint(loaded) == serialize_checkpoint(result.bundle);

  std::vector<std::uint8_t> fixture;
  for (int r = 0; r < 2; ++r) {
    fixture.push_back(static_cast<std::uint8_t>(r));
    for (int i = 0; i < 3072; ++i) fixture.push_back(static_cast<std::uint8_t>((i + 31 * r) % 256));
  }
  bool parsed = false;
  try {
    const auto ds = parse_cifar10_binary(fixture);
    parsed = ds.size() == 2 && ds.images[1][0] == 31.0 / 255.0;
  } catch (const DataError&) {
  }
  std::string message;
  auto truncated = fixture;
  truncated.pop_back();
  try {
    parse_cifar10_binary(truncated);
  } catch (const DataError& e) {
    message = e.what();
  }
  const bool rejected = message.find("offset 3073") != std::string::npos;
  const bool ok = clean_eq && attacked_eq && bytes_eq && parsed && rejected;
  return {ok, std::string("metrics ") + (clean_eq && attacked_eq ? "identical" : "differ") + ", bytes " +
                  (bytes_eq ? "identical" : "differ") + ", fixture " + (parsed ? "parsed" : "not parsed") +
                  ", truncation " + (rejected ? "rejected at 3073" : "not rejected correctly")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string out = (fs::temp_directory_path() / "wasecom_acceptance").string();
  std::vector<int> only;
  app.add_option("--out", out, "scratch directory");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.passed ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    failures += !o.passed;
  };
  auto run = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!want(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("threw: ") + e.what()});
    }
  };

  run(1, "gradient correctness", gradients);
  if (want(2) || want(3)) {
    double secs = 0.0;
    std::vector<DualityReport> reports;
    try {
      reports = duality_reports(secs);
    } catch (const std::exception& e) {
      std::cerr << "duality check threw: " << e.what() << "\n";
    }
    run(2, "strong duality", [&] { return strong_duality(reports, secs); });
    run(3, "surrogate upper bound", [&] { return upper_bound(reports); });
  }
  run(4, "excess-risk sandwich", excess_risk);
  run(5, "log-sum-exp sandwich", lse_sandwich);
  run(6, "channel calibration", channel_calibration);
  run(7, "zero-radius equivalence", degenerate_radius);
  if (want(8) || want(9)) {
    ImageStudy s;
    try {
      s = image_study();
    } catch (const std::exception& e) {
      s.robustness = s.parity = {false, std::string("threw: ") + e.what()};
    }
    if (want(8)) report(8, "image robustness", s.robustness);
    if (want(9)) report(9, "clean parity", s.parity);
  }
  run(10, "text trend", text_study);
  run(11, "metric identities", metric_identities);
  run(12, "persistence", [&] { return persistence(fs::path(out) / "persistence"); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
