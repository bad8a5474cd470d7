#pragma once

#include <Eigen/Dense>
#include <string>

#include "robnet/model.hpp"
#include "robnet/rng.hpp"

namespace robnet {

enum class NormKind { l2, linf };

enum class AttackKind { closed_form, fgm, fgsm, pgd, deepfool_linear, none };

NormKind norm_from_string(const std::string& name);
std::string to_string(NormKind p);
AttackKind attack_from_string(const std::string& name);
std::string to_string(AttackKind a);

// Per-agent attack description. epsilon = 0 always yields the zero
// perturbation regardless of the generator.
struct PerturbationSpec {
  NormKind norm = NormKind::l2;
  double epsilon = 0.0;
  AttackKind generator = AttackKind::closed_form;
  int pgd_steps = 10;
  double pgd_step_size = 0.0;  // <= 0: defaults to 2*epsilon/steps
  bool pgd_random_init = false;

  static PerturbationSpec clean() { return PerturbationSpec{}; }

  // Checks the generator/norm/model-kind compatibility rules.
  void validate(const LossModel& model) const;
};

// Projection onto the epsilon-ball; idempotent.
Eigen::VectorXd project_ball(const Eigen::VectorXd& v, NormKind p, double eps);

// Exact maximizer of Q(w; x+delta, y) over the ball for the convex kinds
// (logistic/exponential: -eps*y*w/||w|| or -eps*y*sign(w); lms/huber:
// eps*sign(w'x - y) times the same directions). Degenerate w = 0 returns 0.
Eigen::VectorXd closed_form_max(const LossModel& model, const Eigen::VectorXd& w,
                                const Eigen::VectorXd& x, double y,
                                const PerturbationSpec& spec);

// Single-step l2 attack: eps * g/||g||, zero when ||g|| < 1e-12.
Eigen::VectorXd fgm(const LossModel& model, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& x, double y, double eps);

// Single-step linf attack: eps * sign(g), with sign(0) = 0.
Eigen::VectorXd fgsm(const LossModel& model, const Eigen::VectorXd& w,
                     const Eigen::VectorXd& x, double y, double eps);

// Multi-step projected ascent; direction normalized (l2) or sign (linf).
// Random init draws uniformly inside the ball from the caller's stream.
Eigen::VectorXd pgd(const LossModel& model, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& x, double y, const PerturbationSpec& spec,
                    Rng& rng);

// Minimal l2 push of a linear binary score across the decision boundary,
// scaled by (1 + overshoot). Throws when w = 0.
Eigen::VectorXd deepfool_linear(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                                double overshoot);

// Dispatch on spec.generator. `rng` is only consulted for PGD random init
// and may be null when the spec never uses it.
Eigen::VectorXd generate_perturbation(const LossModel& model, const Eigen::VectorXd& w,
                                      const Eigen::VectorXd& x, double y,
                                      const PerturbationSpec& spec, Rng* rng);

}  // namespace robnet
