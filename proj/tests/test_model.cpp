#include <doctest.h>

#include <cmath>

#include "robnet/model.hpp"
#include "robnet/rng.hpp"

using namespace robnet;

namespace {

// Central finite differences of the loss; the independent oracle for both
// analytic gradients.
Eigen::VectorXd fd_grad_w(const LossModel& m, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& x, double y, double h) {
  Eigen::VectorXd g(w.size());
  for (int i = 0; i < w.size(); ++i) {
    Eigen::VectorXd wp = w, wm = w;
    wp(i) += h;
    wm(i) -= h;
    g(i) = (m.value(wp, x, y) - m.value(wm, x, y)) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd fd_grad_x(const LossModel& m, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& x, double y, double h) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (m.value(w, xp, y) - m.value(w, xm, y)) / (2.0 * h);
  }
  return g;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(1e-8, std::max(a.norm(), b.norm()));
  return (a - b).norm() / scale;
}

Eigen::VectorXd random_vec(int n, Rng& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("logistic hand values") {
  const LossModel m = LossModel::logistic(2);
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd x(2);
  x << 1.5, -0.5;
  CHECK(m.value(w, x, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(m.value(w, x, -1.0) == doctest::Approx(0.693147).epsilon(1e-6));

  // grad_w at w=0 is -y*x/2.
  const Eigen::VectorXd gw = m.grad_w(w, x, 1.0);
  CHECK(gw(0) == doctest::Approx(-0.75));
  CHECK(gw(1) == doctest::Approx(0.25));

  // grad_x where w'x = 0 is -y*w/2.
  Eigen::VectorXd w2(2), x0(2);
  w2 << 2.0, 1.0;
  x0 << 0.5, -1.0;  // w2'x0 = 0
  const Eigen::VectorXd gx = m.grad_x(w2, x0, 1.0);
  CHECK(gx(0) == doctest::Approx(-1.0));
  CHECK(gx(1) == doctest::Approx(-0.5));
}

TEST_CASE("lms hand values") {
  const LossModel m = LossModel::lms(2);
  Eigen::VectorXd w(2), x(2);
  w << 1.0, 0.0;
  x << 2.0, 0.0;
  CHECK(m.value(w, x, 1.0) == doctest::Approx(1.0));
  const Eigen::VectorXd gw = m.grad_w(w, x, 1.0);
  CHECK(gw(0) == doctest::Approx(4.0));
  CHECK(gw(1) == doctest::Approx(0.0));
  const Eigen::VectorXd gx = m.grad_x(w, x, 1.0);
  CHECK(gx(0) == doctest::Approx(2.0));
  CHECK(gx(1) == doctest::Approx(0.0));
}

TEST_CASE("huber hand values: quadratic branch at |r| <= tau") {
  const LossModel m = LossModel::huber(2, 1.0);
  Eigen::VectorXd w(2), x(2);
  w << 1.0, 0.0;
  x << 0.5, 0.0;
  CHECK(m.value(w, x, 0.0) == doctest::Approx(0.125));
  // Linear branch.
  Eigen::VectorXd x2(2);
  x2 << 3.0, 0.0;
  CHECK(m.value(w, x2, 0.0) == doctest::Approx(1.0 * 3.0 - 0.5));
}

TEST_CASE("exponential: grad_x vanishes at w = 0") {
  const LossModel m = LossModel::exponential(3);
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(m.grad_x(w, x, 1.0).norm() == 0.0);
}

TEST_CASE("dimension mismatch is rejected") {
  const LossModel m = LossModel::logistic(3);
  CHECK_THROWS_AS(m.value(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(m.grad_w(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4), 1.0),
                  std::invalid_argument);
}

TEST_CASE("finite-difference consistency across all kinds") {
  const double h = 1e-6;
  const double tol = 1e-5;
  Rng rng(2024);

  MlpShape shape;
  shape.input_dim = 3;
  shape.hidden = {5};
  shape.classes = 2;
  const std::vector<LossModel> models = {
      LossModel::logistic(3, 0.05), LossModel::exponential(3, 0.05),
      LossModel::lms(3, 0.05),      LossModel::huber(3, 1.0, 0.05),
      LossModel::mlp(shape),
  };

  for (const LossModel& m : models) {
    for (int probe = 0; probe < 100; ++probe) {
      Eigen::VectorXd w = random_vec(m.param_dim(), rng, 0.8);
      Eigen::VectorXd x = random_vec(m.feature_dim(), rng, 1.0);
      double y = m.kind() == LossKind::mlp ? static_cast<double>(rng.uniform_int(2))
                                           : (rng.uniform01() < 0.5 ? -1.0 : 1.0);
      if (m.kind() == LossKind::huber) {
        // Keep probes away from the branch boundary |w'x - y| = tau.
        while (std::abs(std::abs(w.dot(x) - y) - m.tau()) < 1e-3) {
          w = random_vec(m.param_dim(), rng, 0.8);
          x = random_vec(m.feature_dim(), rng, 1.0);
        }
      }
      CHECK(rel_err(m.grad_w(w, x, y), fd_grad_w(m, w, x, y, h)) < tol);
      CHECK(rel_err(m.grad_x(w, x, y), fd_grad_x(m, w, x, y, h)) < tol);
    }
  }
}

TEST_CASE("convexity midpoint inequality for the convex kinds") {
  Rng rng(77);
  const std::vector<LossModel> models = {
      LossModel::logistic(3), LossModel::exponential(3), LossModel::lms(3),
      LossModel::huber(3, 1.0)};
  for (const LossModel& m : models) {
    for (int t = 0; t < 50; ++t) {
      const Eigen::VectorXd a = random_vec(3, rng);
      const Eigen::VectorXd b = random_vec(3, rng);
      const Eigen::VectorXd x = random_vec(3, rng);
      const double y = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      const Eigen::VectorXd mid = 0.5 * (a + b);
      CHECK(m.value(mid, x, y) <=
            0.5 * m.value(a, x, y) + 0.5 * m.value(b, x, y) + 1e-12);
    }
  }
}

TEST_CASE("strong convexity lower bound with rho > 0") {
  Rng rng(78);
  const double rho = 0.3;
  const std::vector<LossModel> models = {
      LossModel::logistic(3, rho), LossModel::exponential(3, rho),
      LossModel::lms(3, rho), LossModel::huber(3, 1.0, rho)};
  for (const LossModel& m : models) {
    CHECK(m.convexity() == Convexity::strongly_convex);
    CHECK(m.strong_convexity() == doctest::Approx(2.0 * rho));
    for (int t = 0; t < 50; ++t) {
      const Eigen::VectorXd a = random_vec(3, rng);
      const Eigen::VectorXd b = random_vec(3, rng);
      const Eigen::VectorXd x = random_vec(3, rng);
      const double y = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      const double lhs = m.value(b, x, y);
      const double rhs = m.value(a, x, y) + m.grad_w(a, x, y).dot(b - a) +
                         rho * (b - a).squaredNorm();
      CHECK(lhs >= rhs - 1e-10);
    }
  }
}

TEST_CASE("convexity classes are reported truthfully") {
  CHECK(LossModel::logistic(2).convexity() == Convexity::convex);
  CHECK(LossModel::lms(2, 0.1).convexity() == Convexity::strongly_convex);
  MlpShape shape;
  shape.input_dim = 2;
  shape.hidden = {4};
  const LossModel net = LossModel::mlp(shape);
  CHECK(net.convexity() == Convexity::non_convex);
  CHECK(net.param_dim() == 4 * 2 + 4 + 2 * 4 + 2);
}

TEST_CASE("mlp prediction and label mapping") {
  MlpShape shape;
  shape.input_dim = 2;
  shape.hidden = {4};
  const LossModel net = LossModel::mlp(shape);
  CHECK(LossModel::label_index(-1.0) == 0);
  CHECK(LossModel::label_index(1.0) == 1);
  CHECK(LossModel::label_index(3.0) == 3);

  Rng rng(5);
  Eigen::VectorXd params(net.param_dim());
  for (int i = 0; i < params.size(); ++i) params(i) = 0.5 * rng.normal();
  Eigen::VectorXd x(2);
  x << 0.3, -0.7;
  const double cls = net.predict(params, x);
  CHECK((cls == 0.0 || cls == 1.0));
  // The predicted class has the smaller loss.
  const double loss_pred = net.value(params, x, cls);
  const double loss_other = net.value(params, x, cls == 0.0 ? 1.0 : 0.0);
  CHECK(loss_pred <= loss_other);
}

TEST_CASE("probe_smoothness brackets the lms curvature") {
  // In w alone the lms gradient has Lipschitz constant exactly 2||x||^2;
  // probes over x and the cross terms can only raise the estimate, and
  // with draws within radius 1 of the origin it stays bounded.
  const LossModel m = LossModel::lms(2);
  std::vector<Sample> samples(1);
  samples[0].x = Eigen::VectorXd::Zero(2);
  samples[0].x << 1.0, 1.0;
  samples[0].y = 1.0;
  Rng rng(9);
  const double probed =
      probe_smoothness(m, samples, Eigen::VectorXd::Zero(2), 1.0, 300, rng);
  CHECK(probed > 1.0);
  CHECK(probed < 200.0);
  CHECK(std::isfinite(probed));
}
