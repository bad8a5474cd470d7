#pragma once

#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "robnet/config.hpp"
#include "robnet/graph.hpp"
#include "robnet/runner.hpp"

namespace robnet {

inline constexpr std::string_view kVersion = "0.1.0";

// Stable CLI contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;

// Everything a run needs, materialized from an ExperimentConfig.
struct Experiment {
  ExperimentConfig cfg;
  CombinationMatrix comb;
  nlohmann::json graph_json;
  LossModel model = LossModel::logistic(1);
  std::vector<AgentDataSource> sources;
  TrainConfig tcfg;
};

Experiment resolve_experiment(const ExperimentConfig& cfg);

// Trained models container written by cmd_train and consumed by cmd_eval.
struct ModelsFile {
  LossModel model = LossModel::logistic(1);
  Strategy strategy = Strategy::diffusion;
  std::vector<Eigen::VectorXd> w;
};

ModelsFile load_models_file(const std::string& path);

// CLI verbs; each returns a process exit code.
int cmd_graph(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet,
              std::ostream& log);
int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet,
              std::ostream& log);
int cmd_eval(const std::string& models_path, const ExperimentConfig& cfg,
             const std::string& out_dir, bool quiet, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, const std::string& parameter,
              const std::vector<std::string>& values, const std::string& out_dir,
              bool quiet, std::ostream& log);

// Mean over the last 10% of records (at least one) of a metric selected by
// `field`: the steady-state proxy used by sweeps and acceptance checks.
double tail_mean(const std::vector<MetricsRecord>& records,
                 double (*field)(const MetricsRecord&));

inline double field_disagreement(const MetricsRecord& r) { return r.disagreement; }
inline double field_msd(const MetricsRecord& r) { return r.msd.value_or(0.0); }
inline double field_excess(const MetricsRecord& r) { return r.excess_risk.value_or(0.0); }
inline double field_moreau(const MetricsRecord& r) { return r.moreau_grad_sq.value_or(0.0); }

}  // namespace robnet
