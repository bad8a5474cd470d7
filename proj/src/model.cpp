#include "robnet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace robnet {

namespace {

// log(1 + e^{-m}) without overflow for large |m|.
double softplus_neg(double m) {
  if (m > 0.0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

// sigma(-m) = 1/(1 + e^{m}).
double sigmoid_neg(double m) {
  if (m > 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

struct MlpPass {
  double loss = 0.0;
  Eigen::VectorXd grad_params;
  Eigen::VectorXd grad_input;
};

std::vector<int> layer_dims(const MlpShape& shape) {
  std::vector<int> dims;
  dims.push_back(shape.input_dim);
  for (int h : shape.hidden) dims.push_back(h);
  dims.push_back(shape.classes);
  return dims;
}

int mlp_param_count(const MlpShape& shape) {
  const auto dims = layer_dims(shape);
  int n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    n += dims[i + 1] * dims[i] + dims[i + 1];
  return n;
}

// Forward + optional backward through the flat parameter vector. Layout per
// layer: weight matrix (out x in, column-major), then bias.
MlpPass mlp_pass(const MlpShape& shape, const Eigen::VectorXd& params,
                 const Eigen::VectorXd& x, int label, bool want_grads) {
  const auto dims = layer_dims(shape);
  const std::size_t layers = dims.size() - 1;

  std::vector<Eigen::VectorXd> acts;  // activations, acts[0] = x
  acts.reserve(layers + 1);
  acts.push_back(x);
  std::size_t offset = 0;
  std::vector<std::size_t> w_offsets(layers), b_offsets(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    const int in = dims[i], out = dims[i + 1];
    w_offsets[i] = offset;
    b_offsets[i] = offset + static_cast<std::size_t>(out) * in;
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + w_offsets[i], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + b_offsets[i], out);
    Eigen::VectorXd z = w * acts.back() + b;
    if (i + 1 < layers) z = z.array().tanh();
    acts.push_back(std::move(z));
    offset = b_offsets[i] + static_cast<std::size_t>(out);
  }

  const Eigen::VectorXd& logits = acts.back();
  const double zmax = logits.maxCoeff();
  const double lse = zmax + std::log((logits.array() - zmax).exp().sum());

  MlpPass pass;
  pass.loss = lse - logits(label);
  if (!want_grads) return pass;

  pass.grad_params = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd delta = (logits.array() - lse).exp();  // softmax
  delta(label) -= 1.0;

  for (std::size_t i = layers; i-- > 0;) {
    const int in = dims[i], out = dims[i + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + w_offsets[i], out, in);
    Eigen::Map<Eigen::MatrixXd> gw(pass.grad_params.data() + w_offsets[i], out, in);
    Eigen::Map<Eigen::VectorXd> gb(pass.grad_params.data() + b_offsets[i], out);
    gw = delta * acts[i].transpose();
    gb = delta;
    Eigen::VectorXd back = w.transpose() * delta;
    if (i > 0) back.array() *= 1.0 - acts[i].array().square();  // tanh'
    delta = std::move(back);
  }
  pass.grad_input = std::move(delta);
  return pass;
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "logistic") return LossKind::logistic;
  if (name == "exponential") return LossKind::exponential;
  if (name == "lms") return LossKind::lms;
  if (name == "huber") return LossKind::huber;
  if (name == "mlp") return LossKind::mlp;
  throw std::invalid_argument("unknown loss kind: " + name);
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::logistic: return "logistic";
    case LossKind::exponential: return "exponential";
    case LossKind::lms: return "lms";
    case LossKind::huber: return "huber";
    case LossKind::mlp: return "mlp";
  }
  return "?";
}

LossModel LossModel::logistic(int dim, double rho) {
  LossModel m;
  m.kind_ = LossKind::logistic;
  m.feature_dim_ = m.param_dim_ = dim;
  m.rho_ = rho;
  return m;
}

LossModel LossModel::exponential(int dim, double rho) {
  LossModel m;
  m.kind_ = LossKind::exponential;
  m.feature_dim_ = m.param_dim_ = dim;
  m.rho_ = rho;
  return m;
}

LossModel LossModel::lms(int dim, double rho) {
  LossModel m;
  m.kind_ = LossKind::lms;
  m.feature_dim_ = m.param_dim_ = dim;
  m.rho_ = rho;
  return m;
}

LossModel LossModel::huber(int dim, double tau, double rho) {
  if (!(tau > 0.0)) throw std::invalid_argument("huber: tau must be > 0");
  LossModel m;
  m.kind_ = LossKind::huber;
  m.feature_dim_ = m.param_dim_ = dim;
  m.rho_ = rho;
  m.tau_ = tau;
  return m;
}

LossModel LossModel::mlp(MlpShape shape) {
  if (shape.input_dim < 1 || shape.classes < 2)
    throw std::invalid_argument("mlp: need input_dim >= 1 and classes >= 2");
  for (int h : shape.hidden)
    if (h < 1) throw std::invalid_argument("mlp: hidden widths must be >= 1");
  LossModel m;
  m.kind_ = LossKind::mlp;
  m.feature_dim_ = shape.input_dim;
  m.param_dim_ = mlp_param_count(shape);
  m.shape_ = std::move(shape);
  return m;
}

int LossModel::class_count() const {
  return kind_ == LossKind::mlp ? shape_.classes : 2;
}

Convexity LossModel::convexity() const {
  if (kind_ == LossKind::mlp) return Convexity::non_convex;
  return rho_ > 0.0 ? Convexity::strongly_convex : Convexity::convex;
}

double LossModel::strong_convexity() const {
  return convexity() == Convexity::strongly_convex ? 2.0 * rho_ : 0.0;
}

void LossModel::check_dims(const Eigen::VectorXd& w, const Eigen::VectorXd& x) const {
  if (w.size() != param_dim_)
    throw std::invalid_argument("LossModel: parameter dimension mismatch");
  if (x.size() != feature_dim_)
    throw std::invalid_argument("LossModel: feature dimension mismatch");
}

double LossModel::value(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y) const {
  check_dims(w, x);
  switch (kind_) {
    case LossKind::logistic:
      return softplus_neg(y * w.dot(x)) + rho_ * w.squaredNorm();
    case LossKind::exponential:
      return std::exp(-y * w.dot(x)) + rho_ * w.squaredNorm();
    case LossKind::lms: {
      const double r = w.dot(x) - y;
      return r * r + rho_ * w.squaredNorm();
    }
    case LossKind::huber: {
      const double r = w.dot(x) - y;
      const double core = std::abs(r) <= tau_ ? 0.5 * r * r
                                              : tau_ * std::abs(r) - 0.5 * tau_ * tau_;
      return core + rho_ * w.squaredNorm();
    }
    case LossKind::mlp:
      return mlp_pass(shape_, w, x, label_index(y), false).loss;
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd LossModel::grad_w(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                                  double y) const {
  check_dims(w, x);
  switch (kind_) {
    case LossKind::logistic:
      return (-y * sigmoid_neg(y * w.dot(x))) * x + (2.0 * rho_) * w;
    case LossKind::exponential:
      return (-y * std::exp(-y * w.dot(x))) * x + (2.0 * rho_) * w;
    case LossKind::lms:
      return (2.0 * (w.dot(x) - y)) * x + (2.0 * rho_) * w;
    case LossKind::huber: {
      const double r = w.dot(x) - y;
      // Boundary |r| = tau uses the quadratic branch; both branches agree
      // there in value and first derivative.
      const double slope = std::abs(r) <= tau_ ? r : tau_ * (r > 0.0 ? 1.0 : -1.0);
      return slope * x + (2.0 * rho_) * w;
    }
    case LossKind::mlp:
      return mlp_pass(shape_, w, x, label_index(y), true).grad_params;
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd LossModel::grad_x(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                                  double y) const {
  check_dims(w, x);
  switch (kind_) {
    case LossKind::logistic:
      return (-y * sigmoid_neg(y * w.dot(x))) * w;
    case LossKind::exponential:
      return (-y * std::exp(-y * w.dot(x))) * w;
    case LossKind::lms:
      return (2.0 * (w.dot(x) - y)) * w;
    case LossKind::huber: {
      const double r = w.dot(x) - y;
      const double slope = std::abs(r) <= tau_ ? r : tau_ * (r > 0.0 ? 1.0 : -1.0);
      return slope * w;
    }
    case LossKind::mlp:
      return mlp_pass(shape_, w, x, label_index(y), true).grad_input;
  }
  throw std::logic_error("unreachable");
}

double LossModel::predict(const Eigen::VectorXd& w, const Eigen::VectorXd& x) const {
  check_dims(w, x);
  if (kind_ != LossKind::mlp) return w.dot(x) >= 0.0 ? 1.0 : -1.0;
  const auto dims = layer_dims(shape_);
  // Forward only; reuse the pass with label 0 and take the argmax by
  // recomputing logits from the final activation trick below.
  const std::size_t layers = dims.size() - 1;
  Eigen::VectorXd act = x;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layers; ++i) {
    const int in = dims[i], out = dims[i + 1];
    Eigen::Map<const Eigen::MatrixXd> wm(w.data() + offset, out, in);
    offset += static_cast<std::size_t>(out) * in;
    Eigen::Map<const Eigen::VectorXd> b(w.data() + offset, out);
    offset += static_cast<std::size_t>(out);
    Eigen::VectorXd z = wm * act + b;
    if (i + 1 < layers) z = z.array().tanh();
    act = std::move(z);
  }
  int best = 0;
  act.maxCoeff(&best);
  return static_cast<double>(best);
}

bool LossModel::classifies_correctly(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                                     double y) const {
  const double p = predict(w, x);
  if (kind_ != LossKind::mlp) return (p > 0.0) == (y > 0.0);
  return static_cast<int>(p) == label_index(y);
}

double probe_smoothness(const LossModel& model, const std::vector<Sample>& samples,
                        const Eigen::VectorXd& center, double radius, int trials,
                        Rng& rng) {
  if (samples.empty()) throw std::invalid_argument("probe_smoothness: no samples");
  double best = 0.0;
  const int pdim = model.param_dim();
  const int fdim = model.feature_dim();
  for (int t = 0; t < trials; ++t) {
    const Sample& s = samples[static_cast<std::size_t>(rng.uniform_int(
        static_cast<int>(samples.size())))];
    Eigen::VectorXd w1(pdim), w2(pdim);
    for (int i = 0; i < pdim; ++i) {
      w1(i) = center(i) + radius * rng.normal();
      w2(i) = center(i) + radius * rng.normal();
    }
    const double dw = (w2 - w1).norm();
    if (dw > 1e-12) {
      best = std::max(best, (model.grad_w(w2, s.x, s.y) - model.grad_w(w1, s.x, s.y)).norm() / dw);
      best = std::max(best, (model.grad_x(w2, s.x, s.y) - model.grad_x(w1, s.x, s.y)).norm() / dw);
    }
    Eigen::VectorXd x2(fdim);
    for (int i = 0; i < fdim; ++i) x2(i) = s.x(i) + 0.5 * radius * rng.normal();
    const double dx = (x2 - s.x).norm();
    if (dx > 1e-12) {
      best = std::max(best, (model.grad_w(w1, x2, s.y) - model.grad_w(w1, s.x, s.y)).norm() / dx);
      best = std::max(best, (model.grad_x(w1, x2, s.y) - model.grad_x(w1, s.x, s.y)).norm() / dx);
    }
  }
  return best;
}

}  // namespace robnet
