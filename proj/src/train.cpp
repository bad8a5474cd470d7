#include "robnet/train.hpp"

#include <cmath>
#include <thread>

namespace robnet {

Strategy strategy_from_string(const std::string& name) {
  if (name == "diffusion") return Strategy::diffusion;
  if (name == "consensus") return Strategy::consensus;
  if (name == "noncooperative") return Strategy::noncooperative;
  if (name == "centralized") return Strategy::centralized;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::diffusion: return "diffusion";
    case Strategy::consensus: return "consensus";
    case Strategy::noncooperative: return "noncooperative";
    case Strategy::centralized: return "centralized";
  }
  return "?";
}

double TrainConfig::mu_at(long n) const {
  double m = mu;
  for (double f : decay_points)
    if (iterations > 0 && static_cast<double>(n) >= f * static_cast<double>(iterations))
      m /= decay_factor;
  return m;
}

const PerturbationSpec& TrainConfig::spec_for(int agent) const {
  if (specs.empty()) throw std::invalid_argument("TrainConfig: no perturbation specs");
  if (specs.size() == 1) return specs.front();
  return specs[static_cast<std::size_t>(agent)];
}

void TrainConfig::validate(int agent_count) const {
  if (!(mu > 0.0)) throw std::invalid_argument("TrainConfig: mu must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
  if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
  if (specs.size() != 1 && static_cast<int>(specs.size()) != agent_count)
    throw std::invalid_argument("TrainConfig: specs list must have length K or 1");
  if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
  if (record_every < 0)
    throw std::invalid_argument("TrainConfig: record_every must be >= 0");
  for (double f : decay_points)
    if (f <= 0.0 || f >= 1.0)
      throw std::invalid_argument("TrainConfig: decay points must lie in (0,1)");
}

Rng minibatch_stream(std::uint64_t seed, int agent, long iteration) {
  return Rng::keyed(seed, static_cast<std::uint64_t>(agent),
                    static_cast<std::uint64_t>(iteration), StreamPurpose::kMinibatch);
}

Rng attack_stream(std::uint64_t seed, int agent, long iteration) {
  return Rng::keyed(seed, static_cast<std::uint64_t>(agent),
                    static_cast<std::uint64_t>(iteration), StreamPurpose::kAttack);
}

Eigen::VectorXd adversarial_batch_gradient(const LossModel& model,
                                           const Eigen::VectorXd& w,
                                           const std::vector<Sample>& batch,
                                           const PerturbationSpec& spec,
                                           Rng* attack_rng) {
  if (batch.empty()) throw std::invalid_argument("adversarial_batch_gradient: empty batch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(w.size());
  for (const Sample& s : batch) {
    const Eigen::VectorXd delta = generate_perturbation(model, w, s.x, s.y, spec, attack_rng);
    grad += model.grad_w(w, s.x + delta, s.y);
  }
  return grad / static_cast<double>(batch.size());
}

namespace {

// Contiguous chunking over agents; each task owns its output slot, so the
// result is independent of the worker count.
void parallel_over_agents(int agents, int threads,
                          const std::function<void(int)>& body) {
  if (threads <= 1 || agents <= 1) {
    for (int k = 0; k < agents; ++k) body(k);
    return;
  }
  const int workers = std::min(threads, agents);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t]() {
      for (int k = t; k < agents; k += workers) body(k);
    });
  }
  for (auto& th : pool) th.join();
}

void throw_if_not_finite(const std::vector<Eigen::VectorXd>& ws, long n) {
  for (std::size_t k = 0; k < ws.size(); ++k)
    if (!ws[k].allFinite()) throw DivergenceError(n, static_cast<int>(k));
}

std::vector<Eigen::VectorXd> per_agent_gradients(
    const NetworkState& state, const std::vector<std::vector<Sample>>& batches,
    const LossModel& model, const TrainConfig& cfg, long next_iter) {
  const int agents = state.agents();
  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(agents));
  parallel_over_agents(agents, cfg.threads, [&](int k) {
    Rng rng = attack_stream(cfg.seed, k, next_iter);
    grads[static_cast<std::size_t>(k)] = adversarial_batch_gradient(
        model, state.w[static_cast<std::size_t>(k)],
        batches[static_cast<std::size_t>(k)], cfg.spec_for(k), &rng);
  });
  return grads;
}

}  // namespace

NetworkState diffusion_step(const NetworkState& state, const CombinationMatrix& comb,
                            const std::vector<std::vector<Sample>>& batches,
                            const LossModel& model, const TrainConfig& cfg) {
  const int agents = state.agents();
  if (comb.size() != agents)
    throw std::invalid_argument("diffusion_step: combination matrix size mismatch");
  const long n = state.iteration + 1;
  const double mu = cfg.mu_at(state.iteration);

  const auto grads = per_agent_gradients(state, batches, model, cfg, n);
  std::vector<Eigen::VectorXd> phi(static_cast<std::size_t>(agents));
  for (int k = 0; k < agents; ++k)
    phi[static_cast<std::size_t>(k)] =
        state.w[static_cast<std::size_t>(k)] - mu * grads[static_cast<std::size_t>(k)];

  NetworkState next;
  next.iteration = n;
  next.w.resize(static_cast<std::size_t>(agents));
  for (int k = 0; k < agents; ++k) {
    Eigen::VectorXd combined = Eigen::VectorXd::Zero(model.param_dim());
    for (int l = 0; l < agents; ++l) {
      const double a = comb.weights(l, k);
      if (a != 0.0) combined += a * phi[static_cast<std::size_t>(l)];
    }
    next.w[static_cast<std::size_t>(k)] = std::move(combined);
  }
  throw_if_not_finite(next.w, n);
  return next;
}

NetworkState consensus_step(const NetworkState& state, const CombinationMatrix& comb,
                            const std::vector<std::vector<Sample>>& batches,
                            const LossModel& model, const TrainConfig& cfg) {
  const int agents = state.agents();
  if (comb.size() != agents)
    throw std::invalid_argument("consensus_step: combination matrix size mismatch");
  const long n = state.iteration + 1;
  const double mu = cfg.mu_at(state.iteration);

  // Gradient at the old local iterate, not at the combined psi.
  const auto grads = per_agent_gradients(state, batches, model, cfg, n);

  NetworkState next;
  next.iteration = n;
  next.w.resize(static_cast<std::size_t>(agents));
  for (int k = 0; k < agents; ++k) {
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(model.param_dim());
    for (int l = 0; l < agents; ++l) {
      const double a = comb.weights(l, k);
      if (a != 0.0) psi += a * state.w[static_cast<std::size_t>(l)];
    }
    next.w[static_cast<std::size_t>(k)] = psi - mu * grads[static_cast<std::size_t>(k)];
  }
  throw_if_not_finite(next.w, n);
  return next;
}

NetworkState centralized_step(const NetworkState& state,
                              const std::vector<std::vector<Sample>>& batches,
                              const LossModel& model, const TrainConfig& cfg) {
  if (state.agents() != 1)
    throw std::invalid_argument("centralized_step: state must hold one shared w");
  const int data_agents = static_cast<int>(batches.size());
  const long n = state.iteration + 1;
  const double mu = cfg.mu_at(state.iteration);
  const Eigen::VectorXd& w = state.w.front();

  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(data_agents));
  parallel_over_agents(data_agents, cfg.threads, [&](int k) {
    Rng rng = attack_stream(cfg.seed, k, n);
    grads[static_cast<std::size_t>(k)] = adversarial_batch_gradient(
        model, w, batches[static_cast<std::size_t>(k)], cfg.spec_for(k), &rng);
  });
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(model.param_dim());
  for (const auto& g : grads) mean += g;
  mean /= static_cast<double>(data_agents);

  NetworkState next;
  next.iteration = n;
  next.w.push_back(w - mu * mean);
  throw_if_not_finite(next.w, n);
  return next;
}

NetworkState initial_state(const LossModel& model, int agent_count,
                           const TrainConfig& cfg) {
  NetworkState state;
  state.iteration = 0;
  Eigen::VectorXd w0 = Eigen::VectorXd::Zero(model.param_dim());
  if (cfg.init == TrainConfig::Init::gaussian) {
    Rng rng = Rng::keyed(cfg.seed, 0, 0, StreamPurpose::kInit);
    for (int i = 0; i < w0.size(); ++i) w0(i) = cfg.init_scale * rng.normal();
  }
  const int slots = cfg.strategy == Strategy::centralized ? 1 : agent_count;
  state.w.assign(static_cast<std::size_t>(slots), w0);
  return state;
}

}  // namespace robnet
