#include "d4am/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "d4am/errors.hpp"

namespace d4am {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Value parsers throw std::invalid_argument with a description of what was
// expected; the caller adds line and key.
double to_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::int64_t to_i64(const std::string& s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  const std::string u = upper(s);
  if (u == "TRUE" || u == "1" || u == "YES" || u == "ON") return true;
  if (u == "FALSE" || u == "0" || u == "NO" || u == "OFF") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::size_t> to_dims(const std::string& s, char sep) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, sep)) out.push_back(to_u64(part));
  return out;
}

std::string join_dims(const std::vector<std::size_t>& d, char sep) {
  std::string out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(d[i]);
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += f(xs[i]);
  }
  return out;
}

struct Key {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define D4AM_SIZE(path, field)                                                          \
  {path,                                                                                \
   {[](ExperimentConfig& c, const std::string& v) { c.field = to_u64(v); },            \
    [](const ExperimentConfig& c) { return std::to_string(c.field); }}}
#define D4AM_INT(path, field)                                                           \
  {path,                                                                                \
   {[](ExperimentConfig& c, const std::string& v) {                                     \
      c.field = static_cast<decltype(c.field)>(to_i64(v));                              \
    },                                                                                  \
    [](const ExperimentConfig& c) { return std::to_string(c.field); }}}
#define D4AM_REAL(path, field)                                                          \
  {path,                                                                                \
   {[](ExperimentConfig& c, const std::string& v) { c.field = to_double(v); },         \
    [](const ExperimentConfig& c) { return fmt_double(c.field); }}}
#define D4AM_BOOL(path, field)                                                          \
  {path,                                                                                \
   {[](ExperimentConfig& c, const std::string& v) { c.field = to_bool(v); },           \
    [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }}}

const std::map<std::string, Key>& schema() {
  static const std::map<std::string, Key> keys = {
      D4AM_SIZE("task.feature_dim", task.feature_dim),
      D4AM_SIZE("task.num_classes", task.num_classes),
      D4AM_REAL("task.snr_low_db", task.snr_low_db),
      D4AM_REAL("task.snr_high_db", task.snr_high_db),
      {"task.clean_generator",
       {[](ExperimentConfig& c, const std::string& v) {
          c.task.clean_generator = parse_clean_generator(v);
        },
        [](const ExperimentConfig& c) { return to_string(c.task.clean_generator); }}},
      {"task.noise_generator",
       {[](ExperimentConfig& c, const std::string& v) {
          c.task.noise_generator = parse_noise_generator(v);
        },
        [](const ExperimentConfig& c) { return to_string(c.task.noise_generator); }}},
      D4AM_SIZE("task.train_size", task.train_size),
      D4AM_SIZE("task.val_size", task.val_size),
      D4AM_SIZE("task.test_size", task.test_size),
      D4AM_REAL("task.label_fraction", task.label_fraction),
      D4AM_SIZE("task.subspace_rank", task.subspace_rank),
      D4AM_REAL("task.class_separation", task.class_separation),
      D4AM_REAL("task.within_class_scale", task.within_class_scale),
      D4AM_BOOL("task.shared_subspace", task.shared_subspace),

      {"enhancer.hidden",
       {[](ExperimentConfig& c, const std::string& v) { c.enhancer.hidden = to_dims(v, ','); },
        [](const ExperimentConfig& c) { return join_dims(c.enhancer.hidden, ','); }}},
      {"enhancer.activation",
       {[](ExperimentConfig& c, const std::string& v) {
          c.enhancer.activation = parse_activation(v);
        },
        [](const ExperimentConfig& c) { return to_string(c.enhancer.activation); }}},
      {"proxy.hidden",
       {[](ExperimentConfig& c, const std::string& v) { c.proxy.hidden = to_dims(v, ','); },
        [](const ExperimentConfig& c) { return join_dims(c.proxy.hidden, ','); }}},
      {"proxy.activation",
       {[](ExperimentConfig& c, const std::string& v) { c.proxy.activation = parse_activation(v); },
        [](const ExperimentConfig& c) { return to_string(c.proxy.activation); }}},
      {"evaluators",
       {[](ExperimentConfig& c, const std::string& v) {
          c.evaluators.clear();
          for (const auto& a : split(v, ',')) c.evaluators.push_back(parse_arch(a));
        },
        [](const ExperimentConfig& c) {
          return join(c.evaluators, [](const ArchSpec& a) { return to_string(a); });
        }}},

      D4AM_SIZE("classifier.steps", classifier.steps),
      D4AM_SIZE("classifier.batch_size", classifier.batch_size),
      D4AM_REAL("classifier.learning_rate", classifier.learning_rate),
      D4AM_REAL("classifier.accuracy_floor", classifier.accuracy_floor),

      D4AM_INT("pretrain.steps", pretrain.total_steps),
      {"pretrain.epsilon",
       {[](ExperimentConfig& c, const std::string& v) {
          c.pretrain.epsilon = EpsilonSchedule::constant(to_double(v));
        },
        [](const ExperimentConfig& c) { return fmt_double(c.pretrain.epsilon.start); }}},
      D4AM_SIZE("pretrain.batch_size", pretrain.batch_size_reg),

      D4AM_INT("trainer.steps", trainer.total_steps),
      {"trainer.epsilon",
       {[](ExperimentConfig& c, const std::string& v) {
          const bool decay = c.trainer.epsilon.kind == EpsilonSchedule::Kind::LinearDecay;
          c.trainer.epsilon.start = to_double(v);
          if (!decay) c.trainer.epsilon.end = c.trainer.epsilon.start;
        },
        [](const ExperimentConfig& c) { return fmt_double(c.trainer.epsilon.start); }}},
      {"trainer.epsilon_end",
       {[](ExperimentConfig& c, const std::string& v) {
          const std::string u = upper(v);
          if (u == "NONE" || u.empty()) {
            c.trainer.epsilon = EpsilonSchedule::constant(c.trainer.epsilon.start);
          } else {
            c.trainer.epsilon.kind = EpsilonSchedule::Kind::LinearDecay;
            c.trainer.epsilon.end = to_double(v);
          }
        },
        [](const ExperimentConfig& c) {
          return c.trainer.epsilon.kind == EpsilonSchedule::Kind::LinearDecay
                     ? fmt_double(c.trainer.epsilon.end)
                     : std::string("none");
        }}},
      {"trainer.langevin",
       {[](ExperimentConfig& c, const std::string& v) {
          if (upper(v) == "AUTO") {
            c.trainer.langevin.reset();
          } else {
            c.trainer.langevin = to_bool(v);
          }
        },
        [](const ExperimentConfig& c) {
          if (!c.trainer.langevin) return std::string("auto");
          return std::string(*c.trainer.langevin ? "true" : "false");
        }}},
      D4AM_REAL("trainer.langevin_temperature", trainer.langevin_temperature),
      D4AM_SIZE("trainer.batch_size_cls", trainer.batch_size_cls),
      D4AM_SIZE("trainer.batch_size_reg", trainer.batch_size_reg),
      D4AM_INT("trainer.eval_every", trainer.eval_every),

      D4AM_REAL("combiner.beta", trainer.combiner.beta),
      D4AM_INT("combiner.update_period", trainer.combiner.update_period),
      D4AM_REAL("combiner.clamp_lo", trainer.combiner.clamp_lo),
      D4AM_REAL("combiner.clamp_hi", trainer.combiner.clamp_hi),
      D4AM_REAL("combiner.alpha_init", trainer.combiner.alpha_srpr_init),
      D4AM_REAL("combiner.eps_guard", trainer.combiner.eps_guard),

      {"modes",
       {[](ExperimentConfig& c, const std::string& v) {
          c.ablation_modes.clear();
          if (upper(trim(v)) == "NONE") return;
          for (const auto& m : split(v, ',')) c.ablation_modes.push_back(upper(m));
        },
        [](const ExperimentConfig& c) {
          if (c.ablation_modes.empty()) return std::string("none");
          return join(c.ablation_modes, [](const std::string& s) { return s; });
        }}},
      {"grid_weights",
       {[](ExperimentConfig& c, const std::string& v) {
          c.grid_weights.clear();
          for (const auto& w : split(v, ',')) c.grid_weights.push_back(to_double(w));
        },
        [](const ExperimentConfig& c) { return join(c.grid_weights, fmt_double); }}},
      D4AM_BOOL("grid", run_grid),
      {"seeds",
       {[](ExperimentConfig& c, const std::string& v) {
          c.seeds.clear();
          for (const auto& s : split(v, ',')) c.seeds.push_back(to_u64(s));
        },
        [](const ExperimentConfig& c) {
          return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); });
        }}},
      {"output_dir",
       {[](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
        [](const ExperimentConfig& c) { return c.output_dir.string(); }}},
      D4AM_SIZE("jobs", jobs),
      D4AM_BOOL("checkpoints", save_checkpoints),
  };
  return keys;
}

#undef D4AM_SIZE
#undef D4AM_INT
#undef D4AM_REAL
#undef D4AM_BOOL

const std::set<std::string> kArms = {"NOIS", "INIT", "CLSO", "SRPR", "GCLB", "D4AM"};

}  // namespace

std::string to_string(const ArchSpec& a) {
  return to_string(a.activation) + ":" + join_dims(a.hidden, 'x');
}

ArchSpec parse_arch(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("architecture '" + s + "' must look like activation:width[xwidth...]");
  }
  ArchSpec a;
  a.activation = parse_activation(trim(s.substr(0, colon)));
  try {
    a.hidden = to_dims(s.substr(colon + 1), 'x');
  } catch (const std::invalid_argument& e) {
    throw ConfigError("architecture '" + s + "': " + e.what());
  }
  return a;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream * 0xD1B54A32D192ED03ull + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.task.feature_dim = 16;
  c.task.num_classes = 8;
  c.task.subspace_rank = 4;
  c.task.class_separation = 0.6;
  c.task.within_class_scale = 0.2;
  c.task.shared_subspace = false;

  c.classifier.steps = 4000;
  c.classifier.batch_size = 32;
  c.classifier.learning_rate = 0.05;
  c.classifier.accuracy_floor = 0.95;

  c.pretrain.mode = Mode::InitPretrain;
  c.pretrain.total_steps = 20000;
  c.pretrain.epsilon = EpsilonSchedule::constant(2.0);
  c.pretrain.batch_size_reg = 16;

  c.trainer.mode = Mode::D4am;
  c.trainer.total_steps = 5000;
  c.trainer.epsilon = EpsilonSchedule::constant(0.005);
  c.trainer.langevin_temperature = 1e-6;
  c.trainer.eval_every = 500;

  c.ablation_modes = {"NOIS", "INIT", "CLSO", "SRPR", "GCLB", "D4AM"};
  c.grid_weights = {0.0, 0.1, 1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0};
  return c;
}

void ExperimentConfig::validate() const {
  auto section = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(name) + ": " + e.what());
    }
  };
  section("task", [&] { task.validate(); });
  section("enhancer", [&] { enhancer_spec().validate(); });
  section("proxy", [&] { proxy_spec(0).net.validate(); });
  section("evaluators", [&] {
    for (const auto& e : evaluator_specs(0)) e.net.validate();
  });
  if (classifier.steps < 1 || classifier.batch_size < 1 || !(classifier.learning_rate > 0.0)) {
    throw ConfigError("classifier: steps, batch_size and learning_rate must be positive");
  }
  if (!(classifier.accuracy_floor >= 0.0 && classifier.accuracy_floor <= 1.0)) {
    throw ConfigError("classifier.accuracy_floor must lie in [0, 1]");
  }
  if (pretrain.mode != Mode::InitPretrain) throw ConfigError("pretrain: mode must be INIT");
  section("pretrain", [&] { pretrain.validate(); });
  section("trainer", [&] { trainer.validate(); });

  if (ablation_modes.empty() && !(run_grid && !grid_weights.empty())) {
    throw ConfigError("modes: nothing to run (no ablation modes and no grid search)");
  }
  std::set<std::string> seen_modes;
  for (const auto& m : ablation_modes) {
    if (!kArms.count(m)) throw ConfigError("modes: unknown mode '" + m + "'");
    if (!seen_modes.insert(m).second) throw ConfigError("modes: duplicate mode '" + m + "'");
  }
  if (run_grid && grid_weights.empty()) throw ConfigError("grid_weights: empty but grid is on");
  std::set<double> seen_w;
  for (double w : grid_weights) {
    if (!(w >= 0.0)) throw ConfigError("grid_weights: weights must be >= 0");
    if (!seen_w.insert(w).second) throw ConfigError("grid_weights: duplicate weight " + fmt_double(w));
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  std::set<std::uint64_t> seen_seeds;
  for (auto s : seeds) {
    if (!seen_seeds.insert(s).second) {
      throw ConfigError("seeds: duplicate seed " + std::to_string(s));
    }
  }
  if (jobs < 1) throw ConfigError("jobs: must be >= 1");
}

NetworkSpec ExperimentConfig::enhancer_spec() const {
  std::vector<std::size_t> dims{task.feature_dim};
  dims.insert(dims.end(), enhancer.hidden.begin(), enhancer.hidden.end());
  dims.push_back(task.feature_dim);
  return NetworkSpec::mlp(dims, enhancer.activation, OutputActivation::Identity);
}

namespace {
NetworkSpec classifier_net(const ArchSpec& a, const TaskSpec& task) {
  std::vector<std::size_t> dims{task.feature_dim};
  dims.insert(dims.end(), a.hidden.begin(), a.hidden.end());
  dims.push_back(task.num_classes);
  return NetworkSpec::mlp(dims, a.activation, OutputActivation::Softmax);
}
}  // namespace

ClassifierSpec ExperimentConfig::proxy_spec(std::uint64_t seed) const {
  return {classifier_net(proxy, task), derive_seed(seed, 1)};
}

std::vector<ClassifierSpec> ExperimentConfig::evaluator_specs(std::uint64_t seed) const {
  std::vector<ClassifierSpec> out;
  for (std::size_t i = 0; i < evaluators.size(); ++i) {
    out.push_back({classifier_net(evaluators[i], task), derive_seed(seed, 100 + i)});
  }
  return out;
}

TaskSpec ExperimentConfig::task_for(std::uint64_t seed) const {
  TaskSpec t = task;
  t.seed = seed;
  return t;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(line);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = schema().find(key);
    if (it == schema().end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": '" + key + "' given twice");
    try {
      it->second.set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + key + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, k] : schema()) out += key + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace d4am
