// Command-line driver for the credit-assignment experiments.
//
//   lab online|offline|rmse|bench|loss-diag [--config f] [--seed n]
//       [--seeds a,b,c] [--out dir] [--fast] [key=value ...]
//   lab plot-data <run-dir>
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include "lab/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoull(item));
  if (out.empty()) throw lab::ConfigError("--seeds: empty list");
  return out;
}

struct CommonArgs {
  std::string config_file;
  std::string out_dir = "run";
  std::string seeds_csv;
  std::uint64_t seed = 0;
  bool fast = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "config file (key=value lines)");
  cmd->add_option("--seed", args.seed, "single run seed");
  cmd->add_option("--seeds", args.seeds_csv, "comma-separated seed list");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_flag("--fast", args.fast, "divide training budgets by 10");
  cmd->add_option("overrides", args.overrides, "key=value config overrides");
}

lab::RunConfig build_config(lab::ExperimentKind kind, const CommonArgs& args) {
  lab::RunConfig config(kind);
  if (!args.config_file.empty()) config.load_file(args.config_file);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw lab::ConfigError("override must be key=value: " + kv);
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.fast) config.apply_fast_profile();
  config.seeds = args.seeds_csv.empty() ? std::vector<std::uint64_t>{args.seed}
                                        : parse_seeds(args.seeds_csv);
  config.out_dir = args.out_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed-reward credit assignment lab"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* desc;
    lab::ExperimentKind kind;
  };
  const std::vector<Sub> subs = {
      {"online", "online RL with immediate/delayed/inferred rewards",
       lab::ExperimentKind::OnlineGridworld},
      {"cartpole", "CartPole DQN online run", lab::ExperimentKind::Cartpole},
      {"offline", "offline reward inference + tabular Q-learning",
       lab::ExperimentKind::OfflineGridworld},
      {"rmse", "inferred-vs-true reward RMSE curves",
       lab::ExperimentKind::RmseCurve},
      {"bench", "InferNet vs InferGP wall-clock scaling",
       lab::ExperimentKind::TimeBench},
      {"loss-diag", "objective-loss vs true-loss co-descent",
       lab::ExperimentKind::LossDiag},
  };

  std::map<std::string, CommonArgs> args;
  std::map<std::string, CLI::App*> cmds;
  for (const auto& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.desc);
    add_common(cmd, args[sub.name]);
    cmds[sub.name] = cmd;
  }
  std::string plot_dir;
  CLI::App* plot = app.add_subcommand("plot-data",
                                      "re-emit CSV from a stored run");
  plot->add_option("run-dir", plot_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (plot->parsed()) {
      lab::RunResult result = lab::load_result(plot_dir);
      std::cout << lab::to_csv(result.series);
      return 0;
    }
    for (const auto& sub : subs) {
      if (!cmds[sub.name]->parsed()) continue;
      lab::RunConfig config = build_config(sub.kind, args[sub.name]);
      lab::RunResult result = lab::run_experiment(config);
      lab::emit_metrics(result, config.out_dir);
      std::cout << "wrote " << config.out_dir << "/metrics.csv ("
                << result.series.size() << " series, config hash "
                << result.config_hash << ")\n";
      return 0;
    }
  } catch (const lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
