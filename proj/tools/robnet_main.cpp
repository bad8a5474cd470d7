#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "robnet/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long seed_override = -1;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs* args) {
  sub->add_option("--config", args->config_path, "experiment config file")->required();
  sub->add_option("--out", args->out_dir, "output directory (overrides [output] dir)");
  sub->add_option("--seed", args->seed_override, "override the training seed");
  sub->add_flag("--quiet", args->quiet, "suppress progress output");
}

robnet::ExperimentConfig load_config(const CommonArgs& args) {
  robnet::ExperimentConfig cfg = robnet::ExperimentConfig::load(args.config_path);
  if (!args.out_dir.empty()) cfg.output.dir = args.out_dir;
  if (args.seed_override >= 0)
    cfg.train.seed = static_cast<std::uint64_t>(args.seed_override);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized adversarial training simulator"};
  app.set_version_flag("--version", std::string(robnet::kVersion));
  app.require_subcommand(1);

  CommonArgs graph_args, train_args, eval_args, sweep_args;
  std::string models_path;
  std::string sweep_param;
  std::vector<std::string> sweep_values;

  CLI::App* graph_cmd = app.add_subcommand("graph", "generate a graph and write graph.json");
  add_common(graph_cmd, &graph_args);

  CLI::App* train_cmd = app.add_subcommand("train", "run training, write metrics and models");
  add_common(train_cmd, &train_args);

  CLI::App* eval_cmd = app.add_subcommand("eval", "robustness curves for trained models");
  add_common(eval_cmd, &eval_args);
  eval_cmd->add_option("--models", models_path, "final_models.json from a train run")
      ->required();

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train across a parameter grid");
  add_common(sweep_cmd, &sweep_args);
  sweep_cmd->add_option("--param", sweep_param, "mu | B | epsilon | strategy")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-free value list")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return robnet::kExitConfig;
  }

  try {
    if (graph_cmd->parsed()) {
      const auto cfg = load_config(graph_args);
      return robnet::cmd_graph(cfg, cfg.output.dir, graph_args.quiet, std::cout);
    }
    if (train_cmd->parsed()) {
      const auto cfg = load_config(train_args);
      return robnet::cmd_train(cfg, cfg.output.dir, train_args.quiet, std::cout);
    }
    if (eval_cmd->parsed()) {
      const auto cfg = load_config(eval_args);
      return robnet::cmd_eval(models_path, cfg, cfg.output.dir, eval_args.quiet, std::cout);
    }
    if (sweep_cmd->parsed()) {
      const auto cfg = load_config(sweep_args);
      return robnet::cmd_sweep(cfg, sweep_param, sweep_values, cfg.output.dir,
                               sweep_args.quiet, std::cout);
    }
  } catch (const robnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return robnet::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
