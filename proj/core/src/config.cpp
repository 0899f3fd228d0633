#include "wasecom/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "json.hpp"

namespace wasecom {

using nlohmann::json;

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::SyntheticImages: return "synthetic-images";
    case DatasetKind::SyntheticText: return "synthetic-text";
    case DatasetKind::Cifar10: return "cifar10";
    case DatasetKind::TextLines: return "text-lines";
  }
  return "synthetic-images";
}

DatasetKind parse_dataset_kind(const std::string& name) {
  for (auto k : {DatasetKind::SyntheticImages, DatasetKind::SyntheticText, DatasetKind::Cifar10, DatasetKind::TextLines}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown dataset kind '" + name + "'");
}

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Section() = default;

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw ConfigError(where_ + "." + key + ": expected a non-negative integer");
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  void read_double(const char* key, double& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_string()) {
      const auto s = it->get<std::string>();
      if (s == "inf") out = std::numeric_limits<double>::infinity();
      else throw ConfigError(where_ + "." + key + ": expected a number or \"inf\"");
    } else if (it->is_number()) {
      out = it->get<double>();
    } else {
      throw ConfigError(where_ + "." + key + ": expected a number");
    }
  }

  template <class E, class Parse>
  void read_enum(const char* key, E& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    read(key, s);
    if (!present) return;
    try {
      out = parse(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json number(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

json to_json(const PerturbSpec& p) {
  return {{"method", to_string(p.method)}, {"radius", number(p.radius)}, {"step_size", p.step_size},
          {"steps", p.steps},              {"samples", p.samples},      {"epsilon_inf", p.epsilon_inf}};
}

void from_json_section(const json& j, const std::string& where, PerturbSpec& p) {
  Section s(j, where);
  s.read_enum("method", p.method, parse_perturb_method);
  s.read_double("radius", p.radius);
  s.read_double("step_size", p.step_size);
  s.read("steps", p.steps);
  s.read("samples", p.samples);
  s.read_double("epsilon_inf", p.epsilon_inf);
  s.finish();
}

}  // namespace

ChannelConfig ExperimentConfig::eval_channel() const {
  ChannelConfig c = train.channel;
  c.seed = eval.channel_seed;
  return c;
}

void ExperimentConfig::validate() const {
  try {
    if (run_id.empty()) throw ConfigError("run_id must not be empty");
    for (char ch : run_id) {
      if (ch == '/' || ch == '\\') throw ConfigError("run_id must not contain path separators");
    }
    if (dataset.n == 0) throw ConfigError("dataset.n must be >= 1");
    if (!(dataset.eval_fraction > 0.0 && dataset.eval_fraction < 1.0)) {
      throw ConfigError("dataset.eval_fraction must be in (0, 1)");
    }
    if ((dataset.kind == DatasetKind::Cifar10 || dataset.kind == DatasetKind::TextLines) && dataset.path.empty()) {
      throw ConfigError("dataset.path is required for " + to_string(dataset.kind));
    }
    TrainConfig t = train;
    t.validate();
    if (eval.batch_size == 0) throw ConfigError("eval.batch_size must be >= 1");
    for (double s : eval.snr_db) {
      if (!std::isfinite(s)) throw ConfigError("eval.snr_db entries must be finite");
    }
    for (const auto& a : eval.attacks) {
      a.perturb.validate();
      if (!(a.fraction >= 0.0 && a.fraction <= 1.0)) throw ConfigError("eval.attacks.fraction must be in [0, 1]");
      if (a.name.empty() || a.name.find(',') != std::string::npos) throw ConfigError("eval.attacks.name must be a non-empty CSV-safe label");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "config");
  top.read("run_id", cfg.run_id);

  if (const json* d = top.child("dataset")) {
    Section s(*d, "dataset");
    s.read_enum("kind", cfg.dataset.kind, parse_dataset_kind);
    s.read("n", cfg.dataset.n);
    s.read("side", cfg.dataset.side);
    s.read("vocab_size", cfg.dataset.vocab_size);
    s.read("seq_len", cfg.dataset.seq_len);
    s.read("seed", cfg.dataset.seed);
    s.read_double("eval_fraction", cfg.dataset.eval_fraction);
    s.read("path", cfg.dataset.path);
    s.read("grayscale", cfg.dataset.grayscale);
    s.read("downsample", cfg.dataset.downsample);
    s.finish();
  }
  TrainConfig& t = cfg.train;
  if (const json* m = top.child("model")) {
    Section s(*m, "model");
    s.read_enum("task", t.model.task, parse_task_kind);
    s.read("input_dim", t.model.input_dim);
    s.read("semantic_dim", t.model.semantic_dim);
    s.read("signal_dim", t.model.signal_dim);
    s.read("hidden_dim", t.model.hidden_dim);
    s.read("hidden_layers", t.model.hidden_layers);
    s.read("vocab_size", t.model.vocab_size);
    s.read("seq_len", t.model.seq_len);
    s.read_enum("activation", t.model.activation, parse_activation);
    s.read("normalize_power", t.model.normalize_power);
    s.finish();
  }
  if (const json* tr = top.child("train")) {
    Section s(*tr, "train");
    s.read("epochs", t.epochs);
    s.read("batch_size", t.batch_size);
    s.read_double("lr", t.lr);
    s.read_enum("optimizer", t.optimizer, [](const std::string& n) {
      if (n == "adam") return OptimizerKind::Adam;
      if (n == "sgd") return OptimizerKind::Sgd;
      throw std::invalid_argument("unknown optimizer '" + n + "'");
    });
    s.read("seed", t.seed);
    s.read_enum("mode", t.mode, parse_train_mode);
    s.read("substeps", t.substeps);
    s.read("erm_joint", t.erm_joint);
    s.read("checkpoint_every", t.checkpoint_every);
    s.read("max_batches", t.max_batches);
    s.read("eval_every_epoch", t.eval_every_epoch);
    s.finish();
  }
  if (const json* r = top.child("robustness")) {
    Section s(*r, "robustness");
    s.read_double("rho", t.robustness.rho);
    s.read_double("mu", t.robustness.mu);
    s.read_double("lambda", t.robustness.lambda);
    s.read_double("gamma", t.robustness.gamma);
    s.read_double("epsilon_temp", t.robustness.epsilon_temp);
    s.read("use_lse", t.robustness.use_lse);
    s.read("lambda_learnable", t.robustness.lambda_learnable);
    s.read_double("dual_lr", t.robustness.dual_lr);
    s.finish();
  }
  if (const json* c = top.child("channel")) {
    Section s(*c, "channel");
    s.read_enum("kind", t.channel.kind, parse_channel_kind);
    s.read_double("snr_db", t.channel.snr_db);
    s.read("seed", t.channel.seed);
    s.finish();
  }
  if (const json* p = top.child("perturb_inner")) from_json_section(*p, "perturb_inner", t.perturb_inner);
  if (const json* p = top.child("perturb_outer")) from_json_section(*p, "perturb_outer", t.perturb_outer);
  if (const json* e = top.child("eval")) {
    Section s(*e, "eval");
    s.read("channel_seed", cfg.eval.channel_seed);
    s.read("snr_db", cfg.eval.snr_db);
    s.read("batch_size", cfg.eval.batch_size);
    std::vector<std::string> kinds;
    const bool has_kinds = e->contains("channels");
    s.read("channels", kinds);
    if (has_kinds) {
      cfg.eval.channels.clear();
      for (const auto& k : kinds) {
        try {
          cfg.eval.channels.push_back(parse_channel_kind(k));
        } catch (const std::invalid_argument& ex) {
          throw ConfigError(std::string("eval.channels: ") + ex.what());
        }
      }
    }
    if (const json* attacks = s.child("attacks")) {
      if (!attacks->is_array()) throw ConfigError("eval.attacks: expected an array");
      for (std::size_t i = 0; i < attacks->size(); ++i) {
        const std::string where = "eval.attacks[" + std::to_string(i) + "]";
        Section a((*attacks)[i], where);
        AttackConfig ac;
        a.read("name", ac.name);
        a.read_double("fraction", ac.fraction);
        a.read_enum("fraction_mode", ac.fraction_mode, parse_fraction_mode);
        a.read_enum("reference", ac.reference, parse_attack_reference);
        if (const json* p = a.child("perturb")) from_json_section(*p, where + ".perturb", ac.perturb);
        a.finish();
        cfg.eval.attacks.push_back(ac);
      }
    }
    s.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json attacks = json::array();
  for (const auto& a : cfg.eval.attacks) {
    attacks.push_back({{"name", a.name},
                       {"fraction", a.fraction},
                       {"fraction_mode", to_string(a.fraction_mode)},
                       {"reference", to_string(a.reference)},
                       {"perturb", to_json(a.perturb)}});
  }
  json channels = json::array();
  for (auto k : cfg.eval.channels) channels.push_back(to_string(k));
  json root = {
      {"run_id", cfg.run_id},
      {"dataset",
       {{"kind", to_string(cfg.dataset.kind)},
        {"n", cfg.dataset.n},
        {"side", cfg.dataset.side},
        {"vocab_size", cfg.dataset.vocab_size},
        {"seq_len", cfg.dataset.seq_len},
        {"seed", cfg.dataset.seed},
        {"eval_fraction", cfg.dataset.eval_fraction},
        {"path", cfg.dataset.path},
        {"grayscale", cfg.dataset.grayscale},
        {"downsample", cfg.dataset.downsample}}},
      {"model",
       {{"task", to_string(t.model.task)},
        {"input_dim", t.model.input_dim},
        {"semantic_dim", t.model.semantic_dim},
        {"signal_dim", t.model.signal_dim},
        {"hidden_dim", t.model.hidden_dim},
        {"hidden_layers", t.model.hidden_layers},
        {"vocab_size", t.model.vocab_size},
        {"seq_len", t.model.seq_len},
        {"activation", to_string(t.model.activation)},
        {"normalize_power", t.model.normalize_power}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"lr", t.lr},
        {"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
        {"seed", t.seed},
        {"mode", to_string(t.mode)},
        {"substeps", t.substeps},
        {"erm_joint", t.erm_joint},
        {"checkpoint_every", t.checkpoint_every},
        {"max_batches", t.max_batches},
        {"eval_every_epoch", t.eval_every_epoch}}},
      {"robustness",
       {{"rho", number(t.robustness.rho)},
        {"mu", number(t.robustness.mu)},
        {"lambda", t.robustness.lambda},
        {"gamma", t.robustness.gamma},
        {"epsilon_temp", t.robustness.epsilon_temp},
        {"use_lse", t.robustness.use_lse},
        {"lambda_learnable", t.robustness.lambda_learnable},
        {"dual_lr", t.robustness.dual_lr}}},
      {"channel", {{"kind", to_string(t.channel.kind)}, {"snr_db", t.channel.snr_db}, {"seed", t.channel.seed}}},
      {"perturb_inner", to_json(t.perturb_inner)},
      {"perturb_outer", to_json(t.perturb_outer)},
      {"eval",
       {{"channel_seed", cfg.eval.channel_seed},
        {"snr_db", cfg.eval.snr_db},
        {"channels", channels},
        {"batch_size", cfg.eval.batch_size},
        {"attacks", attacks}}},
  };
  return root.dump(2) + "\n";
}

void fit_model_to_dataset(ModelDims& dims, const Dataset& data) {
  dims.task = data.task;
  if (data.task == TaskKind::ImageReconstruction) {
    dims.input_dim = data.feature_dim();
  } else {
    dims.vocab_size = data.vocab_size;
    dims.seq_len = data.seq_len;
  }
}

std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& spec) {
  Dataset all;
  switch (spec.kind) {
    case DatasetKind::SyntheticImages: all = generate_synthetic_images(spec.n, spec.side, spec.seed); break;
    case DatasetKind::SyntheticText:
      all = generate_synthetic_text(spec.n, spec.vocab_size, spec.seq_len, spec.seed);
      break;
    case DatasetKind::Cifar10:
      all = ingest_cifar10_binary(spec.path, {spec.grayscale, spec.downsample});
      if (all.size() > spec.n) {
        all.images.resize(spec.n);
        all.splits.resize(spec.n);
      }
      break;
    case DatasetKind::TextLines: {
      const auto lines = read_lines(spec.path);
      const Vocabulary vocab = Vocabulary::build(lines, spec.vocab_size);
      all = ingest_text_lines(spec.path, vocab, spec.seq_len);
      if (all.size() > spec.n) {
        all.sequences.resize(spec.n);
        all.splits.resize(spec.n);
      }
      break;
    }
  }
  assign_splits(all, spec.eval_fraction, spec.seed + 1);
  Dataset train = all.select(Split::Train);
  Dataset eval = all.select(Split::Eval);
  train.validate();
  eval.validate();
  return {std::move(train), std::move(eval)};
}

}  // namespace wasecom
