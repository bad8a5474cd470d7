#pragma once

#include <optional>
#include <vector>

#include "robnet/metrics.hpp"
#include "robnet/train.hpp"

namespace robnet {

struct DivergenceInfo {
  long iteration = 0;
  int agent = 0;
};

struct TrainResult {
  NetworkState state;
  std::vector<MetricsRecord> records;
  std::optional<DivergenceInfo> divergence;

  bool completed() const { return !divergence.has_value(); }
};

// Runs the configured strategy for cfg.iterations steps. Deterministic given
// cfg.seed: every mini-batch and attack draw comes from a stream keyed by
// (seed, agent, iteration), so results do not depend on cfg.threads.
// Divergence (non-finite iterate or norm beyond the threshold) stops the run
// and preserves the partial record stream.
TrainResult run_training(const LossModel& model, const CombinationMatrix& comb,
                         const std::vector<AgentDataSource>& sources,
                         const TrainConfig& cfg, MetricsRecorder* recorder = nullptr);

}  // namespace robnet
