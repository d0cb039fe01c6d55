// End-to-end acceptance suite. Each criterion loads a checked-in config from
// configs/, runs it exactly as `metabayes <verb> --config ...` would, and prints
// one PASS/FAIL line. Exit status is the number of failed criteria (capped).
#include <CLI11.hpp>
#include <boost/rational.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "metabayes/harness/experiment.hpp"
#include "metabayes/harness/metrics.hpp"
#include "metabayes/oracles/bandit_oracle.hpp"
#include "metabayes/tasks/batch.hpp"
#include "metabayes/tasks/dataset.hpp"

using namespace metabayes;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Suite {
  fs::path configs;
  fs::path out;
  std::vector<std::uint64_t> extra_seeds;
  bool verbose = false;
  std::map<std::string, fs::path> run_dirs;  // config name -> output of its first run

  RunConfig config(const std::string& name, const std::string& run_name,
                   std::vector<std::pair<std::string, std::string>> overrides = {}) const {
    overrides.emplace_back("out_dir", (out / run_name).string());
    return load_config(configs / (name + ".cfg"), overrides);
  }

  json run(const RunConfig& cfg) const {
    fs::remove_all(cfg.output_directory());
    RunOptions opts;
    if (verbose) opts.log = &std::cerr;
    const RunResult r = run_experiment(cfg, opts);
    if (!r.summary["error"].is_null()) {
      throw std::runtime_error(cfg.out_dir + ": " + r.summary["error"].get<std::string>());
    }
    return r.summary;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double num(const json& j) { return j.is_null() ? NAN : j.get<double>(); }

// ---- criteria ----

Verdict conjugate_oracle(Suite& s) {
  // Hand derivation for obs (16, 12, 15), mu0 = 10, sd0 = 3, sd = 2:
  // precision 1/9 + 3/4 = 31/36, mean (10/9 + 43/4) / (31/36) = 427/31,
  // posterior variance 36/31, predictive variance 36/31 + 4 = 160/31.
  const double mean = 427.0 / 31.0, post_var = 36.0 / 31.0, pred_var = 160.0 / 31.0;
  const json sum = s.run(s.config("oracle_check", "c1_oracle_check"));
  s.run_dirs["oracle_check"] = s.out / "c1_oracle_check";
  const json& m = sum["metrics"];
  const double err = std::max({std::abs(num(m["reference_posterior"][0]) - mean),
                               std::abs(std::pow(num(m["reference_posterior"][1]), 2) - post_var),
                               std::abs(num(m["reference_predictive"][0]) - mean),
                               std::abs(std::pow(num(m["reference_predictive"][1]), 2) - pred_var)});
  const double kl = num(m["max_kl"]);
  const double secs = num(sum["wall_time_s"]);
  return {err <= 1e-9 && kl < 1e-4 && m["instances"] == 100 && m["bins"] == 4096 && secs < 10.0,
          fmt("posterior N(%.4f, %.4f) predictive N(%.4f, %.4f), max |err| %.2e; max grid KL %.2e over 100 instances; %.1f s",
              num(m["reference_posterior"][0]), num(m["reference_posterior"][1]), num(m["reference_predictive"][0]),
              num(m["reference_predictive"][1]), err, kl, secs)};
}

Verdict gradient_fidelity(Suite& s) {
  const json sum = s.run(s.config("gradient_check", "c2_gradient_check"));
  s.run_dirs["gradient_check"] = s.out / "c2_gradient_check";
  const json& m = sum["metrics"];
  const double sl = num(m["supervised"]["max_relative_error"]), rl = num(m["policy"]["max_relative_error"]);
  const double secs = num(sum["wall_time_s"]);
  return {sl < 1e-4 && rl < 1e-4 && secs < 30.0,
          fmt("supervised (hidden 8, T 5) %.2e over %d entries; policy (hidden 4, H 3) %.2e over %d entries; %.1f s", sl,
              m["supervised"]["checked"].get<int>(), rl, m["policy"]["checked"].get<int>(), secs)};
}

Verdict dominance(Suite& s) {
  const json sum = s.run(s.config("dominance", "c3_dominance"));
  s.run_dirs["dominance"] = s.out / "c3_dominance";
  const json& m = sum["metrics"];
  const double secs = num(sum["wall_time_s"]);
  return {num(m["ci_low"]) > 0.0 && num(m["estimator_gap"]) <= 1e-12 && m["samples"] == 100000 && secs < 30.0,
          fmt("dE = %.5f, 95%% CI [%.5f, %.5f]; log-ratio vs expected-KL gap %.1e; %.1f s", num(m["delta_e"]),
              num(m["ci_low"]), num(m["ci_high"]), num(m["estimator_gap"]), secs)};
}

Verdict supervised_convergence(Suite& s) {
  const json sum = s.run(s.config("supervised", "c4_supervised"));
  s.run_dirs["supervised"] = s.out / "c4_supervised";
  const json& m = sum["metrics"];
  const double kl = num(m["mean_kl"]), gap = num(m["nll_gap"]), secs = num(sum["wall_time_s"]);
  bool pass = kl < 0.05 && gap <= 0.05 && secs < 15 * 60;
  std::string detail = fmt("seed 0: mean KL %.4f, eval NLL %.4f vs oracle %.4f (gap %.4f); %.0f s", kl,
                           num(m["eval_nll"]), num(m["oracle_nll"]), gap, secs);
  for (std::uint64_t seed : s.extra_seeds) {
    const json extra = s.run(s.config("supervised", "c4_supervised_seed" + std::to_string(seed), {{"seed", std::to_string(seed)}}));
    const double k = num(extra["metrics"]["mean_kl"]), g = num(extra["metrics"]["nll_gap"]);
    pass = pass && k < 0.05 && g <= 0.05;
    detail += fmt("; seed %llu: KL %.4f gap %.4f", static_cast<unsigned long long>(seed), k, g);
  }
  return {pass, detail};
}

Verdict non_conjugate(Suite& s) {
  const json sum = s.run(s.config("exponential", "c5_exponential"));
  const json& m = sum["metrics"];
  const double kl = num(m["mean_kl"]), secs = num(sum["wall_time_s"]);
  return {kl < 0.1 && secs < 20 * 60,
          fmt("mean quadrature KL %.4f (prefix 0: %.4f), eval NLL %.4f vs grid oracle %.4f; %.0f s", kl,
              num(m["per_prefix_kl"][0]), num(m["eval_nll"]), num(m["oracle_nll"]), secs)};
}

Verdict samples_only(Suite& s) {
  // Same steps as `metabayes export-dataset --config configs/dataset.cfg --count 50000`.
  const fs::path data = s.out / "conjugate_50k.txt";
  RunConfig gen = s.config("dataset", "c6_dataset", {{"dataset.path", data.string()}});
  SeededRng rng(gen.seed);
  fs::create_directories(s.out);
  write_file_atomic(data, format_sample_dataset(export_sample_dataset(gen.family.family(), 50000, rng)));
  const json sum = s.run(gen);
  const json& m = sum["metrics"];
  const double kl = num(m["mean_kl"]);
  return {kl < 0.05 + 0.02, fmt("50000 recorded sequences: mean KL %.4f (threshold 0.07), eval NLL %.4f vs oracle %.4f; %.0f s",
                                kl, num(m["eval_nll"]), num(m["oracle_nll"]), num(sum["wall_time_s"]))};
}

Verdict resource_rationality(Suite& s) {
  const json sum = s.run(s.config("capacity_sweep", "c7_capacity_sweep"));
  const json& rows = sum["metrics"]["rows"];
  std::vector<double> nll;
  std::string listing;
  for (const json& r : rows) {
    nll.push_back(num(r["eval_nll"]));
    listing += fmt("%s%d:%.4f", listing.empty() ? "" : " ", r["hidden_size"].get<int>(), nll.back());
  }
  bool monotone = nll.size() == 5;
  for (std::size_t i = 1; i < nll.size(); ++i) monotone = monotone && nll[i] <= nll[i - 1] + 0.02;
  const double gap = nll.front() - nll.back();
  return {monotone && gap >= 0.05, fmt("eval NLL by size {%s}; NLL(1) - NLL(32) = %.4f; %s; %.0f s", listing.c_str(), gap,
                                       monotone ? "non-increasing within 0.02" : "NOT monotone", num(sum["wall_time_s"]))};
}

Verdict bayes_adaptive_bandit(Suite& s) {
  using Q = boost::rational<long long>;
  const BanditPrior<Q> uniform{{Q(1), Q(1)}};
  const Q v1 = bayes_optimal_bandit(uniform, 2, 1).root_value();
  const Q v2 = bayes_optimal_bandit(uniform, 2, 2).root_value();
  // H = 1: either arm, E[p] = 1/2. H = 2: 1/2 + E[max(E[p|r], 1/2)] = 1/2 + (1/2)(2/3) + (1/2)(1/2) = 13/12.
  const bool exact = v1 == Q(1, 2) && v2 == Q(13, 12);

  const json sum = s.run(s.config("bandit", "c8_bandit"));
  s.run_dirs["bandit"] = s.out / "c8_bandit";
  const json& m = sum["metrics"];
  const double frac = num(m["frac_optimal"]), secs = num(sum["wall_time_s"]);
  return {exact && frac >= 0.95 && m["episodes"] == 100000 && secs < 20 * 60,
          fmt("V*(H=1) = %lld/%lld, V*(H=2) = %lld/%lld; policy return %.4f +- %.4f vs V* %.4f, fraction of optimal %.4f "
              "over 1e5 episodes; %.0f s",
              v1.numerator(), v1.denominator(), v2.numerator(), v2.denominator(), num(m["mean_return"]),
              num(m["sem"]), num(m["oracle_value"]), frac, secs)};
}

Verdict reproducibility(Suite& s) {
  // Reruns every earlier run that produced artifacts and compares them byte for byte.
  const std::map<std::string, std::vector<std::string>> files{
      {"oracle_check", {"oracle_check.csv"}},
      {"gradient_check", {"gradient_check.csv"}},
      {"dominance", {"dominance.csv"}},
      {"supervised", {"metrics.csv", "checkpoint.json"}},
      {"bandit", {"metrics.csv", "checkpoint.json"}},
  };
  bool pass = !s.run_dirs.empty();
  std::string detail;
  for (const auto& [name, first] : s.run_dirs) {
    s.run(s.config(name, "c9_repeat_" + name));
    bool same = true;
    for (const std::string& f : files.at(name)) {
      same = same && read_file(first / f) == read_file(s.out / ("c9_repeat_" + name) / f);
    }
    pass = pass && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  if (s.run_dirs.empty()) detail = "nothing to repeat (run criteria 1-4 and 8 first)";
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  Suite suite;
  suite.configs = METABAYES_CONFIG_DIR;
  suite.out = "acceptance_runs";
  std::string out, configs, only;
  app.add_option("--out", out, "scratch directory for the runs");
  app.add_option("--configs", configs, "directory holding the *.cfg files");
  app.add_option("--only", only, "comma-separated criterion numbers");
  app.add_option("--extra-seeds", suite.extra_seeds, "re-check criterion 4 at these seeds")->delimiter(',');
  app.add_flag("-v,--verbose", suite.verbose, "progress lines on stderr");
  CLI11_PARSE(app, argc, argv);
  if (!out.empty()) suite.out = out;
  if (!configs.empty()) suite.configs = configs;
  std::set<int> selected;
  if (!only.empty()) {
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
  }

  const std::vector<std::pair<std::string, std::function<Verdict(Suite&)>>> criteria{
      {"conjugate oracle", conjugate_oracle},
      {"gradient fidelity", gradient_fidelity},
      {"dominance", dominance},
      {"supervised convergence", supervised_convergence},
      {"non-conjugate inference", non_conjugate},
      {"samples-only training", samples_only},
      {"resource rationality", resource_rationality},
      {"Bayes-adaptive bandit", bayes_adaptive_bandit},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second(suite);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << v.detail << std::endl;
  }
  return std::min(failed, 100);
}
