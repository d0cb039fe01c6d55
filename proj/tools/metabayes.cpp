// Command-line front end: one experiment per invocation.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "metabayes/errors.hpp"
#include "metabayes/harness/experiment.hpp"
#include "metabayes/harness/metrics.hpp"
#include "metabayes/tasks/batch.hpp"
#include "metabayes/tasks/dataset.hpp"

using namespace metabayes;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "root seed (overrides the file)");
  cmd->add_option("--out", f.out, "output directory or file");
  cmd->add_option("--set", f.sets, "key=value override, applied after the file (repeatable)")->take_all();
}

std::vector<std::pair<std::string, std::string>> overrides(const CommonFlags& f) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.seed) out.emplace_back("seed", std::to_string(*f.seed));
  return out;
}

// `forced` pins the kind for single-purpose verbs.
RunConfig build_config(const CommonFlags& f, ExperimentKind default_kind, bool forced, bool out_is_dir = true) {
  std::optional<std::filesystem::path> path;
  if (!f.config.empty()) path = f.config;
  auto ov = overrides(f);
  if (forced) ov.emplace_back("kind", to_string(default_kind));
  RunConfig cfg = load_config(path, ov, default_kind);
  if (out_is_dir && !f.out.empty()) cfg.out_dir = f.out;
  return cfg;
}

int run(const RunConfig& cfg, bool resume, bool strict, bool quiet) {
  RunOptions opts{.resume = resume, .strict = strict, .log = quiet ? nullptr : &std::cerr};
  const RunResult r = run_experiment(cfg, opts);
  std::cout << r.summary.dump(2) << "\n";
  if (!r.summary["error"].is_null()) std::cerr << "error: " << r.summary["error"].get<std::string>() << "\n";
  return r.exit_code;
}

std::vector<double> parse_sequence(const std::string& text) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str() + b, &end);
    if (end == item.c_str() + b || item.find_first_not_of(" \t", end - item.c_str()) != std::string::npos) {
      throw ValidationError("bad sequence value '" + item + "'");
    }
    xs.push_back(v);
  }
  return xs;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") std::cout << text;
  else write_file_atomic(out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned Bayesian inference experiments"};
  app.require_subcommand(1);
  bool resume = false, strict = false, quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress lines on stderr");

  CommonFlags train_f, sweep_f, oracle_f, dom_f, grad_f, data_f;
  auto* train = app.add_subcommand("train", "supervised, supervised_dataset or bandit training (kind from the config)");
  add_common(train, train_f);
  train->add_flag("--resume", resume, "continue from <out>/checkpoint.json");
  train->add_flag("--strict", strict, "exit 3 when an acceptance threshold is missed");

  auto* sweep = app.add_subcommand("capacity-sweep", "one supervised run per sweep.hidden_sizes entry");
  add_common(sweep, sweep_f);
  sweep->add_flag("--resume", resume, "continue each size from its checkpoint");
  sweep->add_flag("--strict", strict, "exit 3 when an acceptance threshold is missed");

  auto* oracle = app.add_subcommand("oracle-check", "conjugate closed form against the grid oracle");
  add_common(oracle, oracle_f);
  auto* dom = app.add_subcommand("dominance-test", "posterior predictive against a reference rule");
  add_common(dom, dom_f);
  auto* grad = app.add_subcommand("gradient-check", "reverse mode against finite differences");
  add_common(grad, grad_f);

  std::string checkpoint, out_file;
  std::optional<std::string> sequence_opt;
  int count = 0;
  std::uint64_t eval_seed = 0;
  int bins = 4096;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on fresh tasks or episodes");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--count", count, "tasks (supervised) or episodes (bandit); default 1024 / 100000");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--out", out_file, "output JSON file (default stdout)");

  auto* trace = app.add_subcommand("export-trace", "per-prefix model and oracle predictives for one sequence");
  trace->add_option("--checkpoint", checkpoint, "supervised checkpoint.json")->required()->check(CLI::ExistingFile);
  trace->add_option("--sequence", sequence_opt, "comma-separated observations; omit to sample a task");
  trace->add_option("--seed", eval_seed, "seed for the sampled task");
  trace->add_option("--bins", bins, "grid bins for non-conjugate oracles");
  trace->add_option("--out", out_file, "output JSON file (default stdout)");

  int dataset_count = 50000;
  auto* dataset = app.add_subcommand("export-dataset", "write a sample-dataset file from a task family");
  add_common(dataset, data_f);
  dataset->add_option("--count", dataset_count, "number of sequences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    if (*train) return run(build_config(train_f, ExperimentKind::supervised, false), resume, strict, quiet);
    if (*sweep) return run(build_config(sweep_f, ExperimentKind::capacity_sweep, true), resume, strict, quiet);
    if (*oracle) return run(build_config(oracle_f, ExperimentKind::oracle_check, true), false, false, quiet);
    if (*dom) return run(build_config(dom_f, ExperimentKind::dominance_test, true), false, false, quiet);
    if (*grad) return run(build_config(grad_f, ExperimentKind::gradient_check, true), false, false, quiet);
    if (*eval) {
      const Checkpoint ck = load_checkpoint(checkpoint);
      if (count == 0) count = ck.supervised() ? 1024 : 100000;
      emit(out_file, evaluate_checkpoint(ck, count, eval_seed).dump(2) + "\n");
      return exit_ok;
    }
    if (*trace) {
      const Checkpoint ck = load_checkpoint(checkpoint);
      std::vector<double> xs;
      std::optional<double> latent;
      if (sequence_opt) {
        xs = parse_sequence(*sequence_opt);
      } else {
        // A logged task: its first T observations and the latent mean.
        const RunConfig cfg = config_from_echo(ck.config);
        SeededRng rng = SeededRng(eval_seed).substream(11);
        const TaskSample task = sample_task(cfg.family.family(), rng);
        xs.assign(task.observations.data(), task.observations.data() + task.observations.size() - 1);
        latent = task.latent;
      }
      emit(out_file, export_predictive_trace(ck, xs, latent, bins).dump(2) + "\n");
      return exit_ok;
    }
    if (*dataset) {
      const RunConfig cfg = build_config(data_f, ExperimentKind::supervised, false, false);
      if (dataset_count <= 0) throw ValidationError("--count must be positive");
      SeededRng rng(cfg.seed);
      const SampleDataset ds = export_sample_dataset(cfg.family.family(), dataset_count, rng);
      emit(data_f.out, format_sample_dataset(ds));
      return exit_ok;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  }
  return exit_runtime;
}
