#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "robnet/train.hpp"

namespace robnet {

// One iteration's measurements. Absent quantities stay unset and serialize
// as JSON null, never as zero.
struct MetricsRecord {
  long n = 0;
  double disagreement = 0.0;
  std::optional<double> msd;
  std::optional<double> excess_risk;
  std::optional<double> adv_error;
  std::optional<double> moreau_grad_sq;
  std::optional<double> noise_var;
};

nlohmann::json metrics_to_json(const MetricsRecord& rec);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& rec);

// w_c = sum_k pi_k w_k.
Eigen::VectorXd centroid(const std::vector<Eigen::VectorXd>& w,
                         const Eigen::VectorXd& pi);

// sum_k ||w_k - w_c||^2.
double network_disagreement(const std::vector<Eigen::VectorXd>& w,
                            const Eigen::VectorXd& pi);

// sum_k ||reference - w_k||^2 (direct sum, no shortcut).
double mean_square_deviation(const std::vector<Eigen::VectorXd>& w,
                             const Eigen::VectorXd& reference);

// Sample mean of Q(w; x + delta(w,x,y), y) over the evaluation set with the
// spec's generator. `seed` feeds PGD random init when the spec asks for it.
double empirical_adversarial_risk(const LossModel& model, const Eigen::VectorXd& w,
                                  const std::vector<Sample>& data,
                                  const PerturbationSpec& spec,
                                  std::uint64_t seed = 0);

// pi-weighted mean of per-agent empirical adversarial risks.
double weighted_adversarial_risk(const LossModel& model, const Eigen::VectorXd& w,
                                 const std::vector<std::vector<Sample>>& agent_data,
                                 const Eigen::VectorXd& pi,
                                 const std::vector<PerturbationSpec>& specs,
                                 std::uint64_t seed = 0);

struct ReferenceSolveOptions {
  double gradient_tol = 1e-10;
  long max_iterations = 50000;
};

// Deterministic full-gradient descent (Armijo backtracking) on the
// pi-weighted empirical adversarial risk, differentiating through the exact
// maximizer per Danskin. Throws on non-convergence within the cap.
Eigen::VectorXd solve_reference_minimizer(
    const LossModel& model, const std::vector<std::vector<Sample>>& agent_data,
    const Eigen::VectorXd& pi, const std::vector<PerturbationSpec>& specs,
    const ReferenceSolveOptions& opts = {});

struct RobustnessPoint {
  double epsilon = 0.0;
  double mean_error = 0.0;
  std::vector<double> per_agent_error;
};

// For each epsilon and each agent: perturb every test sample against that
// agent's own model, classify, and average the error over agents.
std::vector<RobustnessPoint> robustness_curve(
    const std::vector<Eigen::VectorXd>& models, const LossModel& model,
    const std::vector<Sample>& testset, const PerturbationSpec& attack,
    const std::vector<double>& eps_grid, std::uint64_t seed = 0);

// Objective handed to the Moreau estimator; built from the empirical
// adversarial risk or supplied directly in tests.
struct ProxObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

ProxObjective adversarial_risk_objective(const LossModel& model,
                                         const std::vector<std::vector<Sample>>& agent_data,
                                         const Eigen::VectorXd& pi,
                                         const std::vector<PerturbationSpec>& specs,
                                         std::uint64_t seed = 0);

struct MoreauOptions {
  double smoothness = 1.0;  // L; gamma = 1/(2L+1)
  int inner_steps = 500;
  double inner_tol = 1e-8;
};

struct MoreauResult {
  double grad_norm_sq = 0.0;
  double inner_residual = 0.0;
  bool converged = false;
};

// zhat ~ argmin_z J(z) + (L + 1/2)||z - center||^2 by gradient descent with
// step 1/(2(L+1)) from z0 = center; returns ||(center - zhat)/gamma||^2.
MoreauResult moreau_grad_norm_sq(const Eigen::VectorXd& center, const ProxObjective& objective,
                                 const MoreauOptions& opts);

// Empirical variance (mean squared deviation from the empirical mean) of
// the mini-batch adversarial gradient at fixed w over independent batches.
double gradient_noise_variance(const LossModel& model, const Eigen::VectorXd& w,
                               const AgentDataSource& source,
                               const PerturbationSpec& spec, int batch_size,
                               int trials, std::uint64_t seed);

// Configured evaluator invoked by the runner at record points.
class MetricsRecorder {
 public:
  struct Options {
    bool want_msd = false;     // needs a reference set via set_reference
    bool want_adv_error = false;
    bool want_moreau = false;
    bool want_noise_var = false;
    MoreauOptions moreau;
    PerturbationSpec eval_attack;  // for adv_error
    int noise_trials = 100;
    int noise_batch = 1;
    std::uint64_t seed = 0;
  };

  MetricsRecorder(const LossModel& model, Eigen::VectorXd pi,
                  std::vector<std::vector<Sample>> frozen_eval,
                  std::vector<PerturbationSpec> risk_specs, Options opts);

  // Installs w* and caches its frozen-set risk for excess-risk records.
  void set_reference(Eigen::VectorXd reference);
  void set_sources(const std::vector<AgentDataSource>* sources) { sources_ = sources; }

  const Eigen::VectorXd& pi() const { return pi_; }
  bool has_reference() const { return reference_.size() > 0; }
  const Eigen::VectorXd& reference() const { return reference_; }
  double reference_risk() const { return reference_risk_; }

  MetricsRecord evaluate(const NetworkState& state, long n) const;

 private:
  const LossModel& model_;
  Eigen::VectorXd pi_;
  std::vector<std::vector<Sample>> frozen_;
  std::vector<PerturbationSpec> risk_specs_;
  Options opts_;
  Eigen::VectorXd reference_;
  double reference_risk_ = 0.0;
  const std::vector<AgentDataSource>* sources_ = nullptr;
};

}  // namespace robnet
