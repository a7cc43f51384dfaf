#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pe/harness.hpp"

namespace {

pe::ExperimentConfig resolve(const std::string& source) {
  const std::string prefix = "preset:";
  if (source.rfind(prefix, 0) == 0) return pe::preset(source.substr(prefix.size()));
  return pe::load_config(source);
}

struct RunArgs {
  std::string source;
  std::optional<int> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<int> horizon;
  std::vector<std::string> only;
  bool quiet = false;
};

int run(const RunArgs& args) {
  pe::ExperimentConfig cfg = resolve(args.source);
  if (args.replicates) cfg.replicates = *args.replicates;
  if (args.seed) cfg.seed = *args.seed;
  if (args.out_dir) cfg.out_dir = *args.out_dir;
  if (args.workers) cfg.workers = *args.workers;
  if (args.horizon) cfg.horizon = *args.horizon;
  if (!args.only.empty()) {
    const std::set<std::string> keep(args.only.begin(), args.only.end());
    for (const auto& name : keep) {
      const bool found = std::any_of(cfg.variants.begin(), cfg.variants.end(),
                                     [&](const auto& v) { return v.name == name; });
      if (!found) throw pe::PreconditionError("no variant named '" + name + "'");
    }
    std::erase_if(cfg.variants, [&](const auto& v) { return !keep.count(v.name); });
  }
  cfg.validate();

  pe::ProgressFn progress;
  if (!args.quiet) {
    progress = [](const std::string& variant, int replicate, std::size_t done,
                  std::size_t total) {
      std::cerr << "\r[" << done << "/" << total << "] " << variant << " #" << replicate
                << "          " << std::flush;
      if (done == total) std::cerr << "\n";
    };
  }
  const pe::ExperimentResult result = pe::run_experiment(cfg, progress);
  pe::write_outputs(cfg, result, cfg.out_dir);
  std::cout << pe::summary_csv(result);
  if (!result.failures.empty()) {
    std::cerr << "warning: " << result.failures.size()
              << " episode(s) failed; see metadata.json\n";
  }
  std::cerr << "wrote " << cfg.out_dir << "/{summary.csv,episodes.csv,metadata.json}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tuned logistic exploration schedules for bandits and a glucose MDP"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write its outputs");
  run_cmd->add_option("config", run_args.source, "Config file path or preset:NAME")->required();
  run_cmd->add_option("--replicates,-r", run_args.replicates, "Override the replicate count");
  run_cmd->add_option("--seed,-s", run_args.seed, "Override the base seed");
  run_cmd->add_option("--out-dir,-o", run_args.out_dir, "Override the output directory");
  run_cmd->add_option("--workers,-j", run_args.workers, "Worker threads");
  run_cmd->add_option("--horizon,-T", run_args.horizon, "Override the horizon");
  run_cmd->add_option("--variants", run_args.only, "Run only these variants")->delimiter(',');
  run_cmd->add_flag("--quiet,-q", run_args.quiet, "No progress output");

  auto* list_cmd = app.add_subcommand("list-presets", "List built-in experiments");

  std::string show_name;
  auto* show_cmd = app.add_subcommand("show-preset", "Print a preset's config text");
  show_cmd->add_option("name", show_name, "Preset name")->required();

  std::string log_path;
  auto* sum_cmd = app.add_subcommand("summarize", "Rebuild summary.csv from episodes.csv");
  sum_cmd->add_option("episodes", log_path, "Path to episodes.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(run_args);
    if (*list_cmd) {
      for (const auto& n : pe::preset_names()) std::cout << n << "\n";
      return 0;
    }
    if (*show_cmd) {
      std::cout << pe::preset_text(show_name);
      return 0;
    }
    if (*sum_cmd) {
      std::ifstream in(log_path);
      if (!in) throw pe::PreconditionError("cannot open '" + log_path + "'");
      std::cout << pe::summary_rows_csv(pe::summarize_episode_log(in));
      return 0;
    }
  } catch (const pe::PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
