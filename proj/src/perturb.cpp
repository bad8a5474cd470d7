#include "robnet/perturb.hpp"

#include <cmath>
#include <stdexcept>

namespace robnet {

namespace {
constexpr double kTinyGradient = 1e-12;

Eigen::VectorXd componentwise_sign(const Eigen::VectorXd& v) {
  Eigen::VectorXd s(v.size());
  for (int i = 0; i < v.size(); ++i)
    s(i) = v(i) > 0.0 ? 1.0 : (v(i) < 0.0 ? -1.0 : 0.0);
  return s;
}

// Uniform draw inside the ball for PGD random init.
Eigen::VectorXd random_in_ball(int dim, NormKind p, double eps, Rng& rng) {
  Eigen::VectorXd v(dim);
  if (p == NormKind::linf) {
    for (int i = 0; i < dim; ++i) v(i) = rng.uniform(-eps, eps);
    return v;
  }
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  const double n = v.norm();
  if (n < kTinyGradient) return Eigen::VectorXd::Zero(dim);
  const double radius = eps * std::pow(rng.uniform01(), 1.0 / dim);
  return (radius / n) * v;
}

}  // namespace

NormKind norm_from_string(const std::string& name) {
  if (name == "l2" || name == "2") return NormKind::l2;
  if (name == "linf" || name == "inf") return NormKind::linf;
  throw std::invalid_argument("unknown norm: " + name);
}

std::string to_string(NormKind p) { return p == NormKind::l2 ? "l2" : "linf"; }

AttackKind attack_from_string(const std::string& name) {
  if (name == "closed_form") return AttackKind::closed_form;
  if (name == "fgm") return AttackKind::fgm;
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "pgd") return AttackKind::pgd;
  if (name == "deepfool_linear") return AttackKind::deepfool_linear;
  if (name == "none") return AttackKind::none;
  throw std::invalid_argument("unknown attack: " + name);
}

std::string to_string(AttackKind a) {
  switch (a) {
    case AttackKind::closed_form: return "closed_form";
    case AttackKind::fgm: return "fgm";
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::deepfool_linear: return "deepfool_linear";
    case AttackKind::none: return "none";
  }
  return "?";
}

void PerturbationSpec::validate(const LossModel& model) const {
  if (epsilon < 0.0) throw std::invalid_argument("PerturbationSpec: epsilon must be >= 0");
  if (generator == AttackKind::fgsm && norm != NormKind::linf)
    throw std::invalid_argument("PerturbationSpec: fgsm requires the linf norm");
  if (generator == AttackKind::fgm && norm != NormKind::l2)
    throw std::invalid_argument("PerturbationSpec: fgm requires the l2 norm");
  if (generator == AttackKind::closed_form && !model.has_closed_form_maximizer())
    throw std::invalid_argument(
        "PerturbationSpec: closed_form requires a convex loss kind");
  if (generator == AttackKind::pgd && pgd_steps < 1)
    throw std::invalid_argument("PerturbationSpec: pgd_steps must be >= 1");
}

Eigen::VectorXd project_ball(const Eigen::VectorXd& v, NormKind p, double eps) {
  if (eps < 0.0) throw std::invalid_argument("project_ball: eps must be >= 0");
  if (p == NormKind::l2) {
    const double n = v.norm();
    return n <= eps ? v : Eigen::VectorXd((eps / n) * v);
  }
  return v.cwiseMax(-eps).cwiseMin(eps);
}

Eigen::VectorXd closed_form_max(const LossModel& model, const Eigen::VectorXd& w,
                                const Eigen::VectorXd& x, double y,
                                const PerturbationSpec& spec) {
  if (!model.has_closed_form_maximizer())
    throw std::invalid_argument("closed_form_max: loss kind has no closed form");
  const int dim = static_cast<int>(x.size());
  if (spec.epsilon == 0.0) return Eigen::VectorXd::Zero(dim);

  double scale = 0.0;
  switch (model.kind()) {
    case LossKind::logistic:
    case LossKind::exponential:
      scale = -y;
      break;
    case LossKind::lms:
    case LossKind::huber:
      // At w'x = y both signs maximize; +1 picks one deterministically
      // (zero would be a minimizer of the quadratic in w'delta).
      scale = (w.dot(x) - y) >= 0.0 ? 1.0 : -1.0;
      break;
    default:
      throw std::logic_error("unreachable");
  }

  if (spec.norm == NormKind::l2) {
    const double n = w.norm();
    if (n < kTinyGradient) return Eigen::VectorXd::Zero(dim);
    return (spec.epsilon * scale / n) * w;
  }
  return (spec.epsilon * scale) * componentwise_sign(w);
}

Eigen::VectorXd fgm(const LossModel& model, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& x, double y, double eps) {
  const int dim = static_cast<int>(x.size());
  if (eps == 0.0) return Eigen::VectorXd::Zero(dim);
  const Eigen::VectorXd g = model.grad_x(w, x, y);
  const double n = g.norm();
  if (n < kTinyGradient) return Eigen::VectorXd::Zero(dim);
  return (eps / n) * g;
}

Eigen::VectorXd fgsm(const LossModel& model, const Eigen::VectorXd& w,
                     const Eigen::VectorXd& x, double y, double eps) {
  const int dim = static_cast<int>(x.size());
  if (eps == 0.0) return Eigen::VectorXd::Zero(dim);
  return eps * componentwise_sign(model.grad_x(w, x, y));
}

Eigen::VectorXd pgd(const LossModel& model, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& x, double y, const PerturbationSpec& spec,
                    Rng& rng) {
  const int dim = static_cast<int>(x.size());
  if (spec.epsilon == 0.0) return Eigen::VectorXd::Zero(dim);
  if (spec.pgd_steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");

  const double alpha = spec.pgd_step_size > 0.0
                           ? spec.pgd_step_size
                           : 2.0 * spec.epsilon / spec.pgd_steps;
  Eigen::VectorXd delta = spec.pgd_random_init
                              ? random_in_ball(dim, spec.norm, spec.epsilon, rng)
                              : Eigen::VectorXd::Zero(dim);
  for (int step = 0; step < spec.pgd_steps; ++step) {
    const Eigen::VectorXd g = model.grad_x(w, x + delta, y);
    Eigen::VectorXd dir;
    if (spec.norm == NormKind::l2) {
      const double n = g.norm();
      dir = n < kTinyGradient ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd(g / n);
    } else {
      dir = componentwise_sign(g);
    }
    delta = project_ball(delta + alpha * dir, spec.norm, spec.epsilon);
  }
  return delta;
}

Eigen::VectorXd deepfool_linear(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                                double overshoot) {
  const double wn2 = w.squaredNorm();
  if (wn2 < kTinyGradient * kTinyGradient)
    throw std::invalid_argument("deepfool_linear: w = 0 has no decision boundary");
  const double score = w.dot(x);
  return (-(1.0 + overshoot) * score / wn2) * w;
}

Eigen::VectorXd generate_perturbation(const LossModel& model, const Eigen::VectorXd& w,
                                      const Eigen::VectorXd& x, double y,
                                      const PerturbationSpec& spec, Rng* rng) {
  if (spec.epsilon == 0.0) return Eigen::VectorXd::Zero(x.size());
  switch (spec.generator) {
    case AttackKind::none:
      return Eigen::VectorXd::Zero(x.size());
    case AttackKind::closed_form:
      return closed_form_max(model, w, x, y, spec);
    case AttackKind::fgm:
      return fgm(model, w, x, y, spec.epsilon);
    case AttackKind::fgsm:
      return fgsm(model, w, x, y, spec.epsilon);
    case AttackKind::pgd: {
      if (spec.pgd_random_init && rng == nullptr)
        throw std::invalid_argument("pgd random init needs an rng stream");
      Rng local(0);
      return pgd(model, w, x, y, spec, rng ? *rng : local);
    }
    case AttackKind::deepfool_linear: {
      // Test-phase attack on linear binary models; epsilon caps the push.
      Eigen::VectorXd d = deepfool_linear(w, x, 0.02);
      return project_ball(d, spec.norm, spec.epsilon);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace robnet
