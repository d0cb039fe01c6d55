#include "metabayes/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "metabayes/errors.hpp"

namespace metabayes {
namespace {

// Thrown by value parsers; the caller adds key and line.
struct BadValue {
  std::string what;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_integer(const std::string& s) {
  long long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) throw BadValue{"expected an integer, got '" + s + "'"};
  return v;
}

int to_int(const std::string& s) {
  const long long v = to_integer(s);
  if (v < INT32_MIN || v > INT32_MAX) throw BadValue{"integer out of range: " + s};
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw BadValue{"expected a non-negative integer, got '" + s + "'"};
  }
  return v;
}

double to_double(const std::string& s) {
  if (s.empty()) throw BadValue{"expected a number"};
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw BadValue{"expected a number, got '" + s + "'"};
  if (!std::isfinite(v)) throw BadValue{"value must be finite"};
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::vector<int> to_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item)));
  if (out.empty()) throw BadValue{"expected a comma-separated list of integers"};
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

void at_least(double v, double lo, const char* what = nullptr) {
  if (!(v >= lo)) throw BadValue{what ? what : "must be >= " + fmt(lo)};
}

void positive(double v) {
  if (!(v > 0.0)) throw BadValue{"must be > 0"};
}

struct Entry {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(NAME, HELP, FIELD, LO)                                          \
  Entry {                                                                       \
    NAME, HELP, [](RunConfig& c, const std::string& v) {                        \
      const int x = to_int(v);                                                  \
      at_least(x, LO);                                                          \
      c.FIELD = x;                                                              \
    },                                                                          \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }              \
  }

#define POS_KEY(NAME, HELP, FIELD)                                              \
  Entry {                                                                       \
    NAME, HELP, [](RunConfig& c, const std::string& v) {                        \
      const double x = to_double(v);                                            \
      positive(x);                                                              \
      c.FIELD = x;                                                              \
    },                                                                          \
        [](const RunConfig& c) { return fmt(c.FIELD); }                         \
  }

#define NONNEG_KEY(NAME, HELP, FIELD)                                           \
  Entry {                                                                       \
    NAME, HELP, [](RunConfig& c, const std::string& v) {                        \
      const double x = to_double(v);                                            \
      at_least(x, 0.0);                                                         \
      c.FIELD = x;                                                              \
    },                                                                          \
        [](const RunConfig& c) { return fmt(c.FIELD); }                         \
  }

#define REAL_KEY(NAME, HELP, FIELD)                                             \
  Entry {                                                                       \
    NAME, HELP, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                         \
  }

#define BOOL_KEY(NAME, HELP, FIELD)                                             \
  Entry {                                                                       \
    NAME, HELP, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                         \
  }

void unit_interval(double v) {
  if (!(v >= 0.0 && v < 1.0)) throw BadValue{"must lie in [0, 1)"};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      {"kind", "supervised | supervised_dataset | bandit | capacity_sweep | oracle_check | dominance_test | gradient_check",
       [](RunConfig& c, const std::string& v) {
         try {
           c.kind = parse_experiment_kind(v);
         } catch (const ValidationError& e) {
           throw BadValue{e.what()};
         }
       },
       [](const RunConfig& c) { return to_string(c.kind); }},
      {"seed", "root seed (unsigned 64-bit)", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"out_dir", "output directory (default runs/<kind>)", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},

      {"family.kind", "gaussian | exponential",
       [](RunConfig& c, const std::string& v) {
         if (v == "gaussian") c.family.kind = FamilyKind::gaussian;
         else if (v == "exponential") c.family.kind = FamilyKind::exponential;
         else throw BadValue{"expected gaussian or exponential, got '" + v + "'"};
       },
       [](const RunConfig& c) { return std::string(c.family.kind == FamilyKind::gaussian ? "gaussian" : "exponential"); }},
      REAL_KEY("family.prior_mean", "prior mean of mu (gaussian)", family.prior_mean),
      POS_KEY("family.prior_sd", "prior sd of mu (gaussian)", family.prior_sd),
      POS_KEY("family.likelihood_sd", "observation noise sd", family.likelihood_sd),
      POS_KEY("family.prior_rate", "rate of the exponential prior", family.prior_rate),
      INT_KEY("family.seq_len", "T; each sequence holds T + 1 observations", family.seq_len, 1),

      INT_KEY("model.hidden_size", "GRU width", supervised.hidden_size, 1),
      {"constraint.kind", "hidden_units | weight_budget",
       [](RunConfig& c, const std::string& v) {
         if (v == "hidden_units") c.supervised.constraint.kind = ConstraintKind::hidden_units;
         else if (v == "weight_budget") c.supervised.constraint.kind = ConstraintKind::weight_budget;
         else throw BadValue{"expected hidden_units or weight_budget, got '" + v + "'"};
       },
       [](const RunConfig& c) {
         return std::string(c.supervised.constraint.kind == ConstraintKind::hidden_units ? "hidden_units"
                                                                                          : "weight_budget");
       }},
      NONNEG_KEY("constraint.beta", "weight-budget penalty coefficient", supervised.constraint.beta),
      NONNEG_KEY("constraint.budget", "squared-norm budget", supervised.constraint.budget),

      {"optim.kind", "adam | sgd",
       [](RunConfig& c, const std::string& v) {
         if (v == "adam") c.supervised.optimizer.kind = OptimizerKind::adam;
         else if (v == "sgd") c.supervised.optimizer.kind = OptimizerKind::sgd;
         else throw BadValue{"expected adam or sgd, got '" + v + "'"};
       },
       [](const RunConfig& c) { return std::string(c.supervised.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"); }},
      POS_KEY("optim.lr", "learning rate", supervised.optimizer.learning_rate),
      {"optim.beta1", "first-moment decay",
       [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         unit_interval(x);
         c.supervised.optimizer.beta1 = x;
       },
       [](const RunConfig& c) { return fmt(c.supervised.optimizer.beta1); }},
      {"optim.beta2", "second-moment decay",
       [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         unit_interval(x);
         c.supervised.optimizer.beta2 = x;
       },
       [](const RunConfig& c) { return fmt(c.supervised.optimizer.beta2); }},
      POS_KEY("optim.eps", "Adam epsilon", supervised.optimizer.epsilon),

      INT_KEY("train.steps", "supervised optimizer steps", supervised.steps, 0),
      INT_KEY("train.batch_size", "sequences per step", supervised.batch_size, 1),
      INT_KEY("train.eval_interval", "steps between curve rows and checkpoints", supervised.eval_interval, 1),
      INT_KEY("train.eval_tasks", "frozen held-out tasks", supervised.eval_tasks, 1),
      BOOL_KEY("train.final_prefix_only", "train on the last prefix only", supervised.final_prefix_only),
      INT_KEY("oracle.eval_bins", "grid bins for non-conjugate evaluation oracles", supervised.oracle_bins, 2),

      {"dataset.path", "sample-dataset file for supervised_dataset", [](RunConfig& c, const std::string& v) { c.dataset_path = v; },
       [](const RunConfig& c) { return c.dataset_path; }},
      BOOL_KEY("dataset.oracle", "score dataset runs against the family.* oracle", dataset_oracle),

      INT_KEY("bandit.arms", "number of arms K", bandit.arms, 2),
      INT_KEY("bandit.horizon", "episode length H", bandit.horizon, 1),
      {"bandit.prior_alpha", "Beta prior alpha, shared by all arms",
       [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         positive(x);
         c.bandit.prior = {{x, c.bandit.prior.front().beta}};
       },
       [](const RunConfig& c) { return fmt(c.bandit.prior.front().alpha); }},
      {"bandit.prior_beta", "Beta prior beta, shared by all arms",
       [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         positive(x);
         c.bandit.prior = {{c.bandit.prior.front().alpha, x}};
       },
       [](const RunConfig& c) { return fmt(c.bandit.prior.front().beta); }},
      INT_KEY("bandit.batch", "episodes per update", bandit.batch_episodes, 1),
      INT_KEY("bandit.updates", "policy-gradient updates", bandit.updates, 0),
      INT_KEY("bandit.eval_interval", "updates between curve rows and checkpoints", bandit.eval_interval, 1),
      INT_KEY("bandit.curve_episodes", "fresh episodes behind each curve row", bandit.curve_episodes, 1),
      INT_KEY("bandit.eval_episodes", "episodes in the final evaluation", bandit_eval_episodes, 1),
      NONNEG_KEY("bandit.value_coef", "baseline loss coefficient", bandit.coefficients.value),
      NONNEG_KEY("bandit.entropy_coef", "entropy bonus coefficient", bandit.coefficients.entropy),

      {"sweep.hidden_sizes", "comma-separated hidden sizes",
       [](RunConfig& c, const std::string& v) {
         auto xs = to_int_list(v);
         for (int x : xs) at_least(x, 1, "hidden sizes must be >= 1");
         c.sweep_hidden_sizes = std::move(xs);
       },
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.sweep_hidden_sizes.size(); ++i) {
           s += (i ? "," : "") + std::to_string(c.sweep_hidden_sizes[i]);
         }
         return s;
       }},

      INT_KEY("oracle.instances", "randomized conjugate-vs-grid instances", oracle_instances, 1),
      INT_KEY("oracle.bins", "grid bins for the oracle check", oracle_bins, 2),

      INT_KEY("dominance.t", "prefix length", dominance.prefix_length, 0),
      INT_KEY("dominance.n_mc", "Monte-Carlo samples", dominance.n_mc, 2),
      {"dominance.reference", "prior_predictive | posterior_predictive | constant | scaled | shifted",
       [](RunConfig& c, const std::string& v) {
         if (v != "prior_predictive" && v != "posterior_predictive" && v != "constant" && v != "scaled" && v != "shifted") {
           throw BadValue{"unknown reference rule '" + v + "'"};
         }
         c.dominance.reference = v;
       },
       [](const RunConfig& c) { return c.dominance.reference; }},
      REAL_KEY("dominance.constant_mean", "mean of the constant reference", dominance.constant_mean),
      POS_KEY("dominance.constant_sd", "sd of the constant reference", dominance.constant_sd),
      POS_KEY("dominance.scale", "sd factor of the scaled reference", dominance.scale),
      REAL_KEY("dominance.shift", "mean offset of the shifted reference", dominance.shift),

      INT_KEY("gradcheck.hidden_size", "supervised model width", gradcheck.hidden_size, 1),
      INT_KEY("gradcheck.seq_len", "supervised sequence length T", gradcheck.seq_len, 1),
      INT_KEY("gradcheck.batch", "supervised sequences in the checked loss", gradcheck.batch, 1),
      INT_KEY("gradcheck.rl_hidden_size", "policy width", gradcheck.rl_hidden_size, 1),
      INT_KEY("gradcheck.rl_horizon", "policy horizon H", gradcheck.rl_horizon, 1),
      INT_KEY("gradcheck.rl_episodes", "episodes in the checked surrogate loss", gradcheck.rl_episodes, 1),
      POS_KEY("gradcheck.floor", "magnitude floor of the relative error", gradcheck.floor),

      POS_KEY("accept.max_kl", "supervised: mean KL threshold", accept.max_kl),
      POS_KEY("accept.max_nll_gap", "supervised: eval NLL minus oracle NLL threshold", accept.max_nll_gap),
      POS_KEY("accept.min_frac_optimal", "bandit: fraction-of-optimal threshold", accept.min_frac_optimal),
      NONNEG_KEY("accept.monotone_tolerance", "sweep: allowed NLL increase per size step", accept.monotone_tolerance),
      NONNEG_KEY("accept.min_capacity_gap", "sweep: NLL(smallest) - NLL(largest) threshold", accept.min_capacity_gap),
      POS_KEY("accept.oracle_kl", "oracle check: KL threshold", accept.oracle_kl),
      POS_KEY("accept.gradient_tolerance", "gradient check: relative error threshold", accept.gradient_tolerance),
  };
  return table;
}

const Entry* find_entry(const std::string& key) {
  for (const Entry& e : entries()) {
    if (key == e.name) return &e;
  }
  return nullptr;
}

void apply(RunConfig& c, const std::string& key, const std::string& value) {
  const Entry* e = find_entry(key);
  if (!e) throw ValidationError("unknown key '" + key + "'");
  try {
    e->set(c, value);
  } catch (const BadValue& bad) {
    throw ValidationError("key '" + key + "': " + bad.what);
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::supervised: return "supervised";
    case ExperimentKind::supervised_dataset: return "supervised_dataset";
    case ExperimentKind::bandit: return "bandit";
    case ExperimentKind::capacity_sweep: return "capacity_sweep";
    case ExperimentKind::oracle_check: return "oracle_check";
    case ExperimentKind::dominance_test: return "dominance_test";
    case ExperimentKind::gradient_check: return "gradient_check";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  for (auto k : {ExperimentKind::supervised, ExperimentKind::supervised_dataset, ExperimentKind::bandit,
                 ExperimentKind::capacity_sweep, ExperimentKind::oracle_check, ExperimentKind::dominance_test,
                 ExperimentKind::gradient_check}) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError("unknown experiment kind '" + text + "'");
}

TaskFamily FamilySettings::family() const {
  if (kind == FamilyKind::gaussian) return GaussianTaskFamily{prior_mean, prior_sd, likelihood_sd, seq_len};
  return ExponentialPriorTaskFamily{prior_rate, likelihood_sd, seq_len};
}

std::filesystem::path RunConfig::output_directory() const {
  return out_dir.empty() ? std::filesystem::path("runs") / to_string(kind) : std::filesystem::path(out_dir);
}

BanditConfig RunConfig::bandit_config() const {
  BanditConfig b = bandit;
  b.hidden_size = supervised.hidden_size;
  b.optimizer = supervised.optimizer;
  return b;
}

void RunConfig::validate() const {
  metabayes::validate(family.family());
  supervised.validate();
  bandit_config().validate();
  if (kind == ExperimentKind::supervised_dataset && dataset_path.empty()) {
    throw ValidationError("missing required key 'dataset.path' for kind supervised_dataset");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Entry& e : entries()) out.push_back({e.name, e.help});
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  apply(config, key, trim(value));
}

RunConfig parse_config(const std::string& text, std::optional<ExperimentKind> default_kind) {
  RunConfig c;
  bool have_kind = false;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key before '='");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      throw ParseError(line_no, "key '" + key + "' already set on line " + std::to_string(it->second));
    }
    try {
      apply(c, key, value);
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    if (key == "kind") have_kind = true;
  }
  if (!have_kind) {
    if (!default_kind) throw ValidationError("missing required key 'kind'");
    c.kind = *default_kind;
  }
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides,
                      std::optional<ExperimentKind> default_kind) {
  std::string text;
  if (path) {
    std::ifstream f(*path);
    if (!f) throw ValidationError("cannot open config file " + path->string());
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  // A --set kind=... counts as supplying the required key.
  for (const auto& [k, v] : overrides) {
    if (k == "kind" && !default_kind) default_kind = parse_experiment_kind(v);
  }
  RunConfig c = parse_config(text, default_kind);
  for (const auto& [k, v] : overrides) set_config_value(c, k, v);
  c.validate();
  return c;
}

std::map<std::string, std::string> config_echo(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const Entry& e : entries()) {
    if (std::string(e.name) != "out_dir") out[e.name] = e.get(config);
  }
  return out;
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_echo(config)) out += k + " = " + v + "\n";
  return out;
}

RunConfig config_from_echo(const std::map<std::string, std::string>& echo) {
  RunConfig c;
  for (const auto& [k, v] : echo) set_config_value(c, k, v);
  c.validate();
  return c;
}

}  // namespace metabayes
