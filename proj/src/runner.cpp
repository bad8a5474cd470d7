#include "robnet/runner.hpp"

namespace robnet {

TrainResult run_training(const LossModel& model, const CombinationMatrix& comb,
                         const std::vector<AgentDataSource>& sources,
                         const TrainConfig& cfg, MetricsRecorder* recorder) {
  const int agents = static_cast<int>(sources.size());
  cfg.validate(agents);
  if (cfg.strategy != Strategy::centralized && comb.size() != agents)
    throw std::invalid_argument("run_training: combination matrix size mismatch");

  // Noncooperative is exactly diffusion with the identity combination.
  const bool noncoop = cfg.strategy == Strategy::noncooperative;
  const CombinationMatrix identity =
      noncoop ? identity_combination(agents) : CombinationMatrix{};
  const CombinationMatrix& effective = noncoop ? identity : comb;

  TrainResult result;
  result.state = initial_state(model, agents, cfg);

  auto record = [&](const NetworkState& state, long n) {
    if (recorder != nullptr) {
      result.records.push_back(recorder->evaluate(state, n));
      return;
    }
    MetricsRecord rec;
    rec.n = n;
    const Eigen::VectorXd pi =
        state.agents() == 1 ? Eigen::VectorXd::Ones(1) : effective.perron;
    rec.disagreement = network_disagreement(state.w, pi);
    result.records.push_back(rec);
  };

  for (long n = 1; n <= cfg.iterations; ++n) {
    std::vector<std::vector<Sample>> batches(static_cast<std::size_t>(agents));
    for (int k = 0; k < agents; ++k) {
      Rng rng = minibatch_stream(cfg.seed, k, n);
      batches[static_cast<std::size_t>(k)] = sources[static_cast<std::size_t>(k)]
          .minibatch(cfg.batch_size, rng);
    }

    try {
      switch (cfg.strategy) {
        case Strategy::diffusion:
        case Strategy::noncooperative:
          result.state = diffusion_step(result.state, effective, batches, model, cfg);
          break;
        case Strategy::consensus:
          result.state = consensus_step(result.state, effective, batches, model, cfg);
          break;
        case Strategy::centralized:
          result.state = centralized_step(result.state, batches, model, cfg);
          break;
      }
    } catch (const DivergenceError& err) {
      result.divergence = DivergenceInfo{err.iteration, err.agent};
      break;
    }

    // Norm blow-up counts as divergence before it turns into inf/nan.
    for (int k = 0; k < result.state.agents(); ++k) {
      if (result.state.w[static_cast<std::size_t>(k)].norm() > cfg.divergence_threshold) {
        result.divergence = DivergenceInfo{n, k};
        break;
      }
    }
    if (result.divergence.has_value()) break;

    if (cfg.record_every > 0 && n % cfg.record_every == 0) record(result.state, n);
  }
  return result;
}

}  // namespace robnet
