#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "robnet/data.hpp"
#include "robnet/graph.hpp"
#include "robnet/model.hpp"
#include "robnet/perturb.hpp"

namespace robnet {

enum class Strategy { diffusion, consensus, noncooperative, centralized };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

// Stacked iterate: one parameter vector per agent (a single vector for the
// centralized strategy), plus the iteration counter.
struct NetworkState {
  std::vector<Eigen::VectorXd> w;
  long iteration = 0;

  int agents() const { return static_cast<int>(w.size()); }
};

struct TrainConfig {
  Strategy strategy = Strategy::diffusion;
  double mu = 0.01;
  int batch_size = 1;
  long iterations = 0;
  // One spec per agent, or a single spec broadcast to all.
  std::vector<PerturbationSpec> specs;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e8;
  long record_every = 100;
  int threads = 1;
  // Piecewise-constant decay: mu is divided by decay_factor at each
  // fraction of the total iteration budget.
  std::vector<double> decay_points;
  double decay_factor = 10.0;
  enum class Init { zero, gaussian } init = Init::zero;
  double init_scale = 0.1;

  double mu_at(long n) const;
  const PerturbationSpec& spec_for(int agent) const;
  void validate(int agent_count) const;
};

// Iterate left the finite range: first-class outcome, carried by the step
// functions as an exception and surfaced by the runner as a result field.
struct DivergenceError : std::runtime_error {
  DivergenceError(long n, int k)
      : std::runtime_error("divergence at iteration " + std::to_string(n) +
                           ", agent " + std::to_string(k)),
        iteration(n),
        agent(k) {}
  long iteration;
  int agent;
};

// Mini-batch adversarial gradient at the iteration-start snapshot:
// (1/B) sum_b grad_w Q(w; x_b + delta_b, y_b), with delta_b generated per
// the spec at the same w. `attack_rng` feeds PGD random init only.
Eigen::VectorXd adversarial_batch_gradient(const LossModel& model,
                                           const Eigen::VectorXd& w,
                                           const std::vector<Sample>& batch,
                                           const PerturbationSpec& spec,
                                           Rng* attack_rng);

// Adapt-then-combine: phi_k = w_k - mu*g_k(w_k), then w'_k = sum_l a_{lk} phi_l.
// Unified recursion with A1 = I, A2 = A.
NetworkState diffusion_step(const NetworkState& state, const CombinationMatrix& comb,
                            const std::vector<std::vector<Sample>>& batches,
                            const LossModel& model, const TrainConfig& cfg);

// Combine-then-adapt with the gradient still evaluated at the old local
// iterate: w'_k = sum_l a_{lk} w_l - mu*g_k(w_k). Unified A1 = A, A2 = I.
NetworkState consensus_step(const NetworkState& state, const CombinationMatrix& comb,
                            const std::vector<std::vector<Sample>>& batches,
                            const LossModel& model, const TrainConfig& cfg);

// Single shared iterate; every agent contributes its own adversarial batch
// gradient at the shared w, averaged with equal weights.
NetworkState centralized_step(const NetworkState& state,
                              const std::vector<std::vector<Sample>>& batches,
                              const LossModel& model, const TrainConfig& cfg);

NetworkState initial_state(const LossModel& model, int agent_count,
                           const TrainConfig& cfg);

// Per-agent keyed streams, shared by the runner and by tests that need to
// reproduce a step's draws.
Rng minibatch_stream(std::uint64_t seed, int agent, long iteration);
Rng attack_stream(std::uint64_t seed, int agent, long iteration);

}  // namespace robnet
