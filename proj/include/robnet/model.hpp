#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "robnet/rng.hpp"

namespace robnet {

enum class LossKind { logistic, exponential, lms, huber, mlp };

enum class Convexity { strongly_convex, convex, non_convex };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};

// Feedforward net: input -> hidden widths (tanh) -> classes (softmax CE).
struct MlpShape {
  int input_dim = 0;
  std::vector<int> hidden;
  int classes = 2;
};

// A loss family Q(w; x, y) with exact gradients in both the parameter and
// the input. Binary kinds use labels in {-1, +1}; mlp uses class indices
// (labels -1/+1 map to classes 0/1).
class LossModel {
 public:
  static LossModel logistic(int dim, double rho = 0.0);
  static LossModel exponential(int dim, double rho = 0.0);
  static LossModel lms(int dim, double rho = 0.0);
  static LossModel huber(int dim, double tau, double rho = 0.0);
  static LossModel mlp(MlpShape shape);

  LossKind kind() const { return kind_; }
  int feature_dim() const { return feature_dim_; }
  // Dimension of the iterate; equals feature_dim for linear kinds.
  int param_dim() const { return param_dim_; }
  double rho() const { return rho_; }
  double tau() const { return tau_; }
  int class_count() const;
  const MlpShape& shape() const { return shape_; }

  Convexity convexity() const;
  // Strong-convexity modulus nu (2*rho for regularized convex kinds, else 0).
  double strong_convexity() const;
  bool has_closed_form_maximizer() const { return kind_ != LossKind::mlp; }

  double value(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y) const;
  Eigen::VectorXd grad_w(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y) const;
  Eigen::VectorXd grad_x(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y) const;

  // Predicted label: +/-1 for binary kinds (sign of the score, 0 -> +1),
  // class index for mlp.
  double predict(const Eigen::VectorXd& w, const Eigen::VectorXd& x) const;
  bool classifies_correctly(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                            double y) const;

  static int label_index(double y) {
    return y < 0.0 ? 0 : static_cast<int>(std::lround(y));
  }

 private:
  LossModel() = default;
  void check_dims(const Eigen::VectorXd& w, const Eigen::VectorXd& x) const;

  LossKind kind_ = LossKind::logistic;
  int feature_dim_ = 0;
  int param_dim_ = 0;
  double rho_ = 0.0;
  double tau_ = 1.0;
  MlpShape shape_;
};

// Empirical Lipschitz estimate for the gradients of Q over random pairs
// drawn within `radius` of `center`: feeds the Moreau metric's gamma.
double probe_smoothness(const LossModel& model, const std::vector<Sample>& samples,
                        const Eigen::VectorXd& center, double radius, int trials,
                        Rng& rng);

}  // namespace robnet
