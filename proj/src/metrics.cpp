#include "robnet/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace robnet {

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::string opt_csv(const std::optional<double>& v) {
  if (!v.has_value()) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsRecord& rec) {
  nlohmann::json j;
  j["n"] = rec.n;
  j["disagreement"] = rec.disagreement;
  j["msd"] = opt_json(rec.msd);
  j["excess_risk"] = opt_json(rec.excess_risk);
  j["adv_error"] = opt_json(rec.adv_error);
  j["moreau_grad_sq"] = opt_json(rec.moreau_grad_sq);
  j["noise_var"] = opt_json(rec.noise_var);
  return j;
}

std::string metrics_csv_header() {
  return "n,disagreement,msd,excess_risk,adv_error,moreau_grad_sq,noise_var";
}

std::string metrics_csv_row(const MetricsRecord& rec) {
  std::ostringstream os;
  os.precision(17);
  os << rec.n << ',' << rec.disagreement << ',' << opt_csv(rec.msd) << ','
     << opt_csv(rec.excess_risk) << ',' << opt_csv(rec.adv_error) << ','
     << opt_csv(rec.moreau_grad_sq) << ',' << opt_csv(rec.noise_var);
  return os.str();
}

Eigen::VectorXd centroid(const std::vector<Eigen::VectorXd>& w,
                         const Eigen::VectorXd& pi) {
  if (w.empty()) throw std::invalid_argument("centroid: empty state");
  if (static_cast<int>(w.size()) != pi.size())
    throw std::invalid_argument("centroid: pi dimension mismatch");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(w.front().size());
  for (std::size_t k = 0; k < w.size(); ++k) c += pi(static_cast<int>(k)) * w[k];
  return c;
}

double network_disagreement(const std::vector<Eigen::VectorXd>& w,
                            const Eigen::VectorXd& pi) {
  const Eigen::VectorXd c = centroid(w, pi);
  double total = 0.0;
  for (const auto& wk : w) total += (wk - c).squaredNorm();
  return total;
}

double mean_square_deviation(const std::vector<Eigen::VectorXd>& w,
                             const Eigen::VectorXd& reference) {
  double total = 0.0;
  for (const auto& wk : w) total += (reference - wk).squaredNorm();
  return total;
}

double empirical_adversarial_risk(const LossModel& model, const Eigen::VectorXd& w,
                                  const std::vector<Sample>& data,
                                  const PerturbationSpec& spec, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("empirical_adversarial_risk: no data");
  Rng rng = Rng::keyed(seed, 0, 0, StreamPurpose::kEval);
  double total = 0.0;
  for (const Sample& s : data) {
    const Eigen::VectorXd delta = generate_perturbation(model, w, s.x, s.y, spec, &rng);
    total += model.value(w, s.x + delta, s.y);
  }
  return total / static_cast<double>(data.size());
}

double weighted_adversarial_risk(const LossModel& model, const Eigen::VectorXd& w,
                                 const std::vector<std::vector<Sample>>& agent_data,
                                 const Eigen::VectorXd& pi,
                                 const std::vector<PerturbationSpec>& specs,
                                 std::uint64_t seed) {
  if (static_cast<int>(agent_data.size()) != pi.size())
    throw std::invalid_argument("weighted_adversarial_risk: pi dimension mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < agent_data.size(); ++k) {
    const PerturbationSpec& spec = specs.size() == 1 ? specs.front() : specs[k];
    total += pi(static_cast<int>(k)) *
             empirical_adversarial_risk(model, w, agent_data[k], spec, seed + k);
  }
  return total;
}

namespace {

Eigen::VectorXd weighted_risk_gradient(const LossModel& model, const Eigen::VectorXd& w,
                                       const std::vector<std::vector<Sample>>& agent_data,
                                       const Eigen::VectorXd& pi,
                                       const std::vector<PerturbationSpec>& specs,
                                       std::uint64_t seed) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(w.size());
  for (std::size_t k = 0; k < agent_data.size(); ++k) {
    const PerturbationSpec& spec = specs.size() == 1 ? specs.front() : specs[k];
    Rng rng = Rng::keyed(seed + k, 0, 0, StreamPurpose::kEval);
    Eigen::VectorXd gk = Eigen::VectorXd::Zero(w.size());
    for (const Sample& s : agent_data[k]) {
      const Eigen::VectorXd delta = generate_perturbation(model, w, s.x, s.y, spec, &rng);
      gk += model.grad_w(w, s.x + delta, s.y);
    }
    grad += (pi(static_cast<int>(k)) / static_cast<double>(agent_data[k].size())) * gk;
  }
  return grad;
}

}  // namespace

Eigen::VectorXd solve_reference_minimizer(
    const LossModel& model, const std::vector<std::vector<Sample>>& agent_data,
    const Eigen::VectorXd& pi, const std::vector<PerturbationSpec>& specs,
    const ReferenceSolveOptions& opts) {
  if (model.convexity() == Convexity::non_convex)
    throw std::invalid_argument("solve_reference_minimizer: needs a convex loss kind");
  for (std::size_t k = 0; k < specs.size(); ++k)
    if (specs[k].generator != AttackKind::closed_form && specs[k].epsilon != 0.0)
      throw std::invalid_argument(
          "solve_reference_minimizer: needs exact (closed-form) maximizers");

  auto risk = [&](const Eigen::VectorXd& w) {
    return weighted_adversarial_risk(model, w, agent_data, pi, specs);
  };
  auto gradient = [&](const Eigen::VectorXd& w) {
    return weighted_risk_gradient(model, w, agent_data, pi, specs, 0);
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(model.param_dim());
  double value = risk(w);
  Eigen::VectorXd grad = gradient(w);
  double step = 1.0;
  for (long it = 0; it < opts.max_iterations; ++it) {
    const double gnorm = grad.norm();
    if (gnorm < opts.gradient_tol) return w;

    double trial_step = step;
    bool accepted = false;
    for (int bt = 0; bt < 60 && !accepted; ++bt) {
      const Eigen::VectorXd cand = w - trial_step * grad;
      const double target = 1e-4 * trial_step * gnorm * gnorm;
      if (target > 1e-14 * std::abs(value)) {
        // Armijo on the value; step grows slowly again after successes.
        const double cand_value = risk(cand);
        if (cand_value <= value - target) {
          w = cand;
          value = cand_value;
          grad = gradient(w);
          step = trial_step * 1.3;
          accepted = true;
        }
      } else {
        // The decrease target is below the FP resolution of the value, so
        // accept on gradient-norm decrease instead (holds for any step up
        // to 2/L on smooth convex objectives); the value check would
        // reject everything and freeze the iterate.
        const Eigen::VectorXd cand_grad = gradient(cand);
        if (cand_grad.norm() <= gnorm) {
          w = cand;
          grad = cand_grad;
          step = trial_step * 1.1;
          accepted = true;
        }
      }
      if (!accepted) trial_step *= 0.5;
    }
    if (!accepted)
      throw std::runtime_error("solve_reference_minimizer: line search failed");
  }
  throw std::runtime_error(
      "solve_reference_minimizer: no convergence within iteration cap");
}

std::vector<RobustnessPoint> robustness_curve(
    const std::vector<Eigen::VectorXd>& models, const LossModel& model,
    const std::vector<Sample>& testset, const PerturbationSpec& attack,
    const std::vector<double>& eps_grid, std::uint64_t seed) {
  if (models.empty()) throw std::invalid_argument("robustness_curve: no models");
  if (testset.empty()) throw std::invalid_argument("robustness_curve: empty test set");

  std::vector<RobustnessPoint> curve;
  curve.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    PerturbationSpec spec = attack;
    spec.epsilon = eps;
    RobustnessPoint point;
    point.epsilon = eps;
    point.per_agent_error.resize(models.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
      Rng rng = Rng::keyed(seed, k, static_cast<std::uint64_t>(eps * 1e6),
                           StreamPurpose::kEval);
      int wrong = 0;
      for (const Sample& s : testset) {
        const Eigen::VectorXd delta =
            generate_perturbation(model, models[k], s.x, s.y, spec, &rng);
        if (!model.classifies_correctly(models[k], s.x + delta, s.y)) ++wrong;
      }
      point.per_agent_error[k] =
          static_cast<double>(wrong) / static_cast<double>(testset.size());
      point.mean_error += point.per_agent_error[k];
    }
    point.mean_error /= static_cast<double>(models.size());
    curve.push_back(std::move(point));
  }
  return curve;
}

ProxObjective adversarial_risk_objective(const LossModel& model,
                                         const std::vector<std::vector<Sample>>& agent_data,
                                         const Eigen::VectorXd& pi,
                                         const std::vector<PerturbationSpec>& specs,
                                         std::uint64_t seed) {
  ProxObjective obj;
  obj.value = [&model, &agent_data, pi, specs, seed](const Eigen::VectorXd& z) {
    return weighted_adversarial_risk(model, z, agent_data, pi, specs, seed);
  };
  obj.gradient = [&model, &agent_data, pi, specs, seed](const Eigen::VectorXd& z) {
    return weighted_risk_gradient(model, z, agent_data, pi, specs, seed);
  };
  return obj;
}

MoreauResult moreau_grad_norm_sq(const Eigen::VectorXd& center, const ProxObjective& objective,
                                 const MoreauOptions& opts) {
  if (!(opts.smoothness > 0.0))
    throw std::invalid_argument("moreau_grad_norm_sq: smoothness L must be > 0");
  const double l = opts.smoothness;
  const double prox_coeff = l + 0.5;  // 1/(2*gamma) with gamma = 1/(2L+1)
  const double step = 1.0 / (2.0 * (l + 1.0));

  Eigen::VectorXd z = center;
  double residual = 0.0;
  bool converged = false;
  for (int it = 0; it < opts.inner_steps; ++it) {
    const Eigen::VectorXd grad_h = objective.gradient(z) + 2.0 * prox_coeff * (z - center);
    residual = grad_h.norm();
    if (residual < opts.inner_tol) {
      converged = true;
      break;
    }
    z -= step * grad_h;
  }

  const double gamma = 1.0 / (2.0 * l + 1.0);
  MoreauResult result;
  result.grad_norm_sq = ((center - z) / gamma).squaredNorm();
  result.inner_residual = residual;
  result.converged = converged;
  return result;
}

double gradient_noise_variance(const LossModel& model, const Eigen::VectorXd& w,
                               const AgentDataSource& source,
                               const PerturbationSpec& spec, int batch_size,
                               int trials, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("gradient_noise_variance: trials must be >= 2");
  std::vector<Eigen::VectorXd> grads;
  grads.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    Rng batch_rng = Rng::keyed(seed, 0, static_cast<std::uint64_t>(t),
                               StreamPurpose::kMinibatch);
    Rng attack_rng = Rng::keyed(seed, 1, static_cast<std::uint64_t>(t),
                                StreamPurpose::kAttack);
    const auto batch = source.minibatch(batch_size, batch_rng);
    grads.push_back(adversarial_batch_gradient(model, w, batch, spec, &attack_rng));
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(w.size());
  for (const auto& g : grads) mean += g;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (const auto& g : grads) var += (g - mean).squaredNorm();
  return var / static_cast<double>(trials);
}

MetricsRecorder::MetricsRecorder(const LossModel& model, Eigen::VectorXd pi,
                                 std::vector<std::vector<Sample>> frozen_eval,
                                 std::vector<PerturbationSpec> risk_specs, Options opts)
    : model_(model),
      pi_(std::move(pi)),
      frozen_(std::move(frozen_eval)),
      risk_specs_(std::move(risk_specs)),
      opts_(std::move(opts)) {
  if (static_cast<int>(frozen_.size()) != pi_.size())
    throw std::invalid_argument("MetricsRecorder: frozen sets must match pi length");
}

void MetricsRecorder::set_reference(Eigen::VectorXd reference) {
  reference_ = std::move(reference);
  reference_risk_ =
      weighted_adversarial_risk(model_, reference_, frozen_, pi_, risk_specs_, opts_.seed);
}

MetricsRecord MetricsRecorder::evaluate(const NetworkState& state, long n) const {
  MetricsRecord rec;
  rec.n = n;

  // Centralized runs carry a single shared iterate.
  const bool single = state.agents() == 1 && pi_.size() > 1;
  const Eigen::VectorXd local_pi =
      single ? Eigen::VectorXd::Ones(1) : pi_;
  rec.disagreement = network_disagreement(state.w, local_pi);
  const Eigen::VectorXd w_c = centroid(state.w, local_pi);

  if (opts_.want_msd && has_reference()) {
    rec.msd = mean_square_deviation(state.w, reference_);
    const double risk =
        weighted_adversarial_risk(model_, w_c, frozen_, pi_, risk_specs_, opts_.seed);
    rec.excess_risk = risk - reference_risk_;
  }

  if (opts_.want_adv_error) {
    double err = 0.0;
    for (std::size_t k = 0; k < state.w.size(); ++k) {
      const auto& eval_set = frozen_[state.w.size() == frozen_.size() ? k : 0];
      Rng rng = Rng::keyed(opts_.seed, k, static_cast<std::uint64_t>(n),
                           StreamPurpose::kEval);
      int wrong = 0;
      for (const Sample& s : eval_set) {
        const Eigen::VectorXd delta = generate_perturbation(
            model_, state.w[k], s.x, s.y, opts_.eval_attack, &rng);
        if (!model_.classifies_correctly(state.w[k], s.x + delta, s.y)) ++wrong;
      }
      err += static_cast<double>(wrong) / static_cast<double>(eval_set.size());
    }
    rec.adv_error = err / static_cast<double>(state.w.size());
  }

  if (opts_.want_moreau) {
    const ProxObjective obj =
        adversarial_risk_objective(model_, frozen_, pi_, risk_specs_, opts_.seed);
    rec.moreau_grad_sq = moreau_grad_norm_sq(w_c, obj, opts_.moreau).grad_norm_sq;
  }

  if (opts_.want_noise_var && sources_ != nullptr && !sources_->empty()) {
    double var = 0.0;
    for (std::size_t k = 0; k < sources_->size(); ++k) {
      const PerturbationSpec& spec =
          risk_specs_.size() == 1 ? risk_specs_.front() : risk_specs_[k];
      const Eigen::VectorXd& wk = state.w[state.w.size() == sources_->size() ? k : 0];
      var += gradient_noise_variance(model_, wk, (*sources_)[k], spec,
                                     opts_.noise_batch, opts_.noise_trials,
                                     opts_.seed + n + k);
    }
    rec.noise_var = var / static_cast<double>(sources_->size());
  }

  return rec;
}

}  // namespace robnet
