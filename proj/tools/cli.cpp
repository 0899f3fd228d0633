#include "cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wasecom/checkpoint.hpp"
#include "wasecom/config.hpp"
#include "wasecom/gradcheck.hpp"
#include "wasecom/metrics.hpp"
#include "wasecom/theory.hpp"
#include "wasecom/trainer.hpp"
#include "wasecom/version.hpp"

namespace fs = std::filesystem;

namespace wasecom::cli {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::vector<double> snr;
  std::optional<double> rho;
  std::optional<double> mu;
  std::optional<double> attack_eps;
  std::string attack;
  std::string checkpoint;
  std::size_t count = 50;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("wasecom", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::info);
  if (const char* level = std::getenv("WASECOM_LOG")) log->set_level(spdlog::level::from_str(level));
  return log;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("short write to " + path.string());
}

// A single --snr retargets the training/eval channel; sweep instead replaces
// its SNR list.
ExperimentConfig load_with_overrides(const Options& o, bool snr_is_list = false) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (snr_is_list && !o.snr.empty()) cfg.eval.snr_db = o.snr;
  if (!snr_is_list && o.snr.size() == 1) cfg.train.channel.snr_db = o.snr.front();
  if (o.rho) cfg.train.robustness.rho = *o.rho;
  if (o.mu) cfg.train.robustness.mu = *o.mu;
  if (o.attack_eps) {
    for (auto& a : cfg.eval.attacks) a.perturb.epsilon_inf = *o.attack_eps;
  }
  cfg.validate();
  return cfg;
}

// Writes the config snapshot and version stamp every run leaves behind.
void prepare_output(const fs::path& out, const ExperimentConfig& cfg) {
  fs::create_directories(out);
  write_file(out / "config.json", serialize_config(cfg));
  write_file(out / "VERSION", std::string(version_string()) + "\n");
}

std::string metrics_table(const std::vector<MetricsRecord>& rows) {
  std::string s = metrics_csv_header() + "\n";
  for (const auto& r : rows) s += metrics_csv_row(r) + "\n";
  return s;
}

ModelBundle load_model(const Options& o, const ExperimentConfig& cfg) {
  const fs::path path = o.checkpoint.empty() ? fs::path(o.out) / "model.ckpt" : fs::path(o.checkpoint);
  ModelBundle b = load_checkpoint(path);
  if (!(b.dims == cfg.train.model)) throw std::runtime_error("checkpoint " + path.string() + " does not match the configured model");
  return b;
}

int cmd_train(const Options& o, std::ostream& out, spdlog::logger& log) {
  ExperimentConfig cfg = load_with_overrides(o);
  auto [train_set, eval_set] = load_datasets(cfg.dataset);
  fit_model_to_dataset(cfg.train.model, train_set);
  cfg.validate();
  const fs::path dir(o.out);
  prepare_output(dir, cfg);
  TrainConfig tc = cfg.train;
  tc.eval_channel = cfg.eval_channel();
  tc.checkpoint_dir = dir / "checkpoints";
  log.info("training {} on {} samples ({} eval)", to_string(tc.mode), train_set.size(), eval_set.size());
  TrainResult result = train(tc, train_set, &eval_set);
  save_checkpoint(result.bundle, dir / "model.ckpt");
  result.log.write_csv(dir / "train_log.csv");
  std::vector<MetricsRecord> rows;
  if (result.log.final_eval) rows.push_back(*result.log.final_eval);
  write_file(dir / "metrics.csv", metrics_table(rows));
  out << metrics_table(rows);
  log.info("wrote {}", (dir / "model.ckpt").string());
  return kExitOk;
}

std::optional<AttackSpec> pick_attack(const Options& o, const ExperimentConfig& cfg) {
  if (!o.attack.empty()) {
    for (const auto& a : cfg.eval.attacks) {
      if (a.name == o.attack) return a.to_spec();
    }
    throw ConfigError("no attack named '" + o.attack + "' in eval.attacks");
  }
  if (o.attack_eps) {
    AttackConfig a;
    a.perturb.epsilon_inf = *o.attack_eps;
    a.name = "fgsm-" + format_double(*o.attack_eps);
    return a.to_spec();
  }
  return std::nullopt;
}

int cmd_eval(const Options& o, std::ostream& out, spdlog::logger& log) {
  ExperimentConfig cfg = load_with_overrides(o);
  auto [train_set, eval_set] = load_datasets(cfg.dataset);
  fit_model_to_dataset(cfg.train.model, train_set);
  auto attack = pick_attack(o, cfg);
  const ModelBundle bundle = load_model(o, cfg);
  const fs::path dir(o.out);
  prepare_output(dir, cfg);
  const MetricsRecord rec = evaluate(bundle, eval_set, cfg.eval_channel(), attack, {cfg.eval.batch_size});
  const std::string table = metrics_table({rec});
  write_file(dir / "metrics.csv", table);
  out << table;
  log.info("evaluated {} samples", rec.n);
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, spdlog::logger& log) {
  ExperimentConfig cfg = load_with_overrides(o, true);
  auto [train_set, eval_set] = load_datasets(cfg.dataset);
  fit_model_to_dataset(cfg.train.model, train_set);
  const fs::path dir(o.out);
  prepare_output(dir, cfg);
  ModelBundle bundle;
  if (o.checkpoint.empty() && !fs::exists(dir / "model.ckpt")) {
    TrainConfig tc = cfg.train;
    log.info("no checkpoint given; training {} first", to_string(tc.mode));
    TrainResult r = train(tc, train_set);
    save_checkpoint(r.bundle, dir / "model.ckpt");
    r.log.write_csv(dir / "train_log.csv");
    bundle = r.bundle;
  } else {
    bundle = load_model(o, cfg);
  }

  std::vector<std::optional<AttackSpec>> levels;
  for (const auto& a : cfg.eval.attacks) levels.push_back(a.to_spec());
  if (levels.empty()) levels.push_back(std::nullopt);

  for (ChannelKind kind : cfg.eval.channels) {
    struct Cell {
      double snr;
      std::optional<AttackSpec> attack;
    };
    std::vector<Cell> cells;
    for (double snr : cfg.eval.snr_db) {
      for (const auto& a : levels) cells.push_back({snr, a});
    }
    std::vector<MetricsRecord> rows(cells.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(o.workers, cells.size()));
    // Each worker owns a clone because evaluation toggles gradient flags.
    auto work = [&](std::size_t w) {
      const ModelBundle local = workers == 1 ? bundle : bundle.clone();
      for (std::size_t i = w; i < cells.size(); i += workers) {
        ChannelConfig ch{kind, cells[i].snr, cfg.eval.channel_seed};
        rows[i] = evaluate(local, eval_set, ch, cells[i].attack, {cfg.eval.batch_size});
      }
    };
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 1; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w));
    work(0);
    for (auto& j : jobs) j.get();
    const std::string table = metrics_table(rows);
    write_file(dir / ("metrics_" + to_string(kind) + ".csv"), table);
    out << "# channel " << to_string(kind) << "\n" << table;
    log.info("{}: {} cells", to_string(kind), rows.size());
  }
  return kExitOk;
}

int cmd_check_theory(const Options& o, std::ostream& out, spdlog::logger& log) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file(dir / "VERSION", std::string(version_string()) + "\n");
  std::ostringstream csv;
  csv << "check,instance,primal,dual,gap,lambda,lambda_star,bound_2lrho,bound_lambda,excess_gap,margin,passed\n";
  nlohmann::json report = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v)); };
  bool ok = true;
  for (const auto& inst : duality_instances()) {
    const DualityReport r = check_duality(inst);
    report.push_back({{"check", "duality"}, {"instance", r.name}, {"primal", num(r.primal)}, {"dual", num(r.dual)},
                      {"lambda_star", num(r.lambda_star)}, {"relative_gap", num(r.relative_gap)},
                      {"distributions_checked", r.distributions_checked},
                      {"upper_bound_violations", r.upper_bound_violations}});
    const bool pass = r.relative_gap <= 0.02 && r.upper_bound_violations == 0;
    ok = ok && pass;
    csv << "duality," << r.name << ',' << format_double(r.primal) << ',' << format_double(r.dual) << ','
        << format_double(std::abs(r.dual - r.primal)) << ",," << format_double(r.lambda_star) << ",,,,"
        << format_double(r.relative_gap) << ',' << (pass ? "true" : "false") << '\n';
  }
  for (const auto& fam : lemma1_families()) {
    for (const auto& r : check_family(fam)) {
      ok = ok && r.passed();
      report.push_back({{"check", "excess-risk"}, {"instance", r.instance}, {"primal", num(r.primal)},
                        {"dual", num(r.dual)}, {"gap", num(r.gap)}, {"lambda", num(r.lambda)},
                        {"lambda_star", num(r.lambda_star)}, {"lipschitz", num(r.lipschitz)},
                        {"bound_2lrho", num(r.robustness_term)}, {"bound_lambda", num(r.multiplier_term)},
                        {"excess_gap", num(r.excess_gap)}, {"margin", num(r.margin)},
                        {"distributions_checked", r.distributions_checked}, {"upper_bound_ok", r.upper_bound_ok},
                        {"sandwich_ok", r.sandwich_ok}});
      csv << "excess-risk," << r.instance << ',' << format_double(r.primal) << ',' << format_double(r.dual) << ','
          << format_double(r.gap) << ',' << format_double(r.lambda) << ',' << format_double(r.lambda_star) << ','
          << format_double(r.robustness_term) << ',' << format_double(r.multiplier_term) << ','
          << format_double(r.excess_gap) << ',' << format_double(r.margin) << ',' << (r.passed() ? "true" : "false")
          << '\n';
    }
  }
  for (const auto& inst : duality_instances()) {
    const double lip = estimate_lipschitz(inst.loss, inst.grid);
    const auto r = check_ball_gap(inst.p, inst.loss, inst.radius, lip, inst.grid, 100, 23);
    ok = ok && r.violations == 0;
    report.push_back({{"check", "ball-gap"}, {"instance", inst.name}, {"worst_case", num(r.worst_case)},
                      {"min_expectation", num(r.min_expectation)}, {"bound_2lrho", num(r.bound_term)},
                      {"distributions_checked", r.distributions_checked}, {"violations", r.violations}});
    csv << "ball-gap," << inst.name << ',' << format_double(r.worst_case) << ','
        << format_double(r.min_expectation) << ",,,," << format_double(r.bound_term) << ",,,,"
        << (r.violations == 0 ? "true" : "false") << '\n';
  }
  write_file(dir / "theory.csv", csv.str());
  write_file(dir / "theory.json", report.dump(2) + "\n");
  out << csv.str();
  if (!ok) {
    log.error("theory checks failed; see {}", (dir / "theory.csv").string());
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out, spdlog::logger& log) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file(dir / "VERSION", std::string(version_string()) + "\n");
  std::ostringstream csv;
  csv << "case,parameters,max_abs_error,max_rel_error,failures\n";
  std::size_t failed = 0;
  for (auto& c : random_gradcheck_suite(o.count, o.seed.value_or(2024))) {
    const auto r = check_gradients(c.name, c.loss, c.leaves);
    failed += r.ok() ? 0 : 1;
    csv << r.name << ',' << r.parameters << ',' << format_double(r.max_abs_error) << ','
        << format_double(r.max_rel_error) << ',' << r.failures << '\n';
  }
  write_file(dir / "gradcheck.csv", csv.str());
  out << csv.str();
  if (failed) {
    log.error("{} of {} graphs disagree with finite differences", failed, o.count);
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wasserstein-robust semantic communication experiments", "wasecom"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "experiment config (JSON)");
    if (needs_config) c->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "training seed override");
  };
  auto* train = app.add_subcommand("train", "train a model and write checkpoint, log and metrics");
  add_common(train, true);
  train->add_option("--snr", o.snr, "training SNR in dB")->expected(1);
  train->add_option("--rho", o.rho, "semantic radius");
  train->add_option("--mu", o.mu, "channel radius");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one (snr, attack) cell");
  add_common(eval, true);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <out>/model.ckpt)");
  eval->add_option("--snr", o.snr, "evaluation SNR in dB")->expected(1);
  eval->add_option("--attack", o.attack, "attack name from eval.attacks");
  eval->add_option("--attack-eps", o.attack_eps, "FGSM epsilon_inf");

  auto* sweep = app.add_subcommand("sweep", "SNR x attack grid into metrics CSV files");
  add_common(sweep, true);
  sweep->add_option("--checkpoint", o.checkpoint, "checkpoint path (trains first when absent)");
  sweep->add_option("--snr", o.snr, "SNR list in dB");
  sweep->add_option("--rho", o.rho, "semantic radius");
  sweep->add_option("--mu", o.mu, "channel radius");
  sweep->add_option("--attack-eps", o.attack_eps, "epsilon_inf for every configured attack");
  sweep->add_option("--workers", o.workers, "concurrent cells")->check(CLI::PositiveNumber);

  auto* theory = app.add_subcommand("check-theory", "duality and excess-risk checks on bundled instances");
  theory->add_option("--out", o.out, "output directory")->required();
  theory->add_option("--workers", o.workers, "ignored; checks run sequentially");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of random graphs");
  grad->add_option("--out", o.out, "output directory")->required();
  grad->add_option("--seed", o.seed, "suite seed");
  grad->add_option("--count", o.count, "number of graphs")->check(CLI::PositiveNumber);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  auto log = make_logger(err);
  try {
    if (train->parsed()) return cmd_train(o, out, *log);
    if (eval->parsed()) return cmd_eval(o, out, *log);
    if (sweep->parsed()) return cmd_sweep(o, out, *log);
    if (theory->parsed()) return cmd_check_theory(o, out, *log);
    if (grad->parsed()) return cmd_gradcheck(o, out, *log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace wasecom::cli
