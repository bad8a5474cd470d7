#include <doctest.h>

#include "oracles.hpp"
#include "robnet/metrics.hpp"

using namespace robnet;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

PerturbationSpec closed_l2(double eps) {
  PerturbationSpec s;
  s.norm = NormKind::l2;
  s.epsilon = eps;
  s.generator = AttackKind::closed_form;
  return s;
}

std::vector<Sample> gaussian_pool(int n, const Eigen::VectorXd& mean, Rng& rng) {
  std::vector<Sample> pool;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.y = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    s.x = Eigen::VectorXd::NullaryExpr(mean.size(),
                                       [&](Eigen::Index j) { return s.y * mean(j) + rng.normal(); });
    pool.push_back(std::move(s));
  }
  return pool;
}

}  // namespace

TEST_CASE("centroid hand cases") {
  const std::vector<Eigen::VectorXd> w = {vec2(1, 0), vec2(3, 2)};
  Eigen::VectorXd uniform(2);
  uniform << 0.5, 0.5;
  const Eigen::VectorXd c = centroid(w, uniform);
  CHECK(c(0) == doctest::Approx(2.0));
  CHECK(c(1) == doctest::Approx(1.0));

  Eigen::VectorXd skew(2);
  skew << 1.0 / 3, 2.0 / 3;
  const std::vector<Eigen::VectorXd> w2 = {vec2(0, 0), vec2(3, 3)};
  const Eigen::VectorXd c2 = centroid(w2, skew);
  CHECK(c2(0) == doctest::Approx(2.0));
  CHECK(c2(1) == doctest::Approx(2.0));

  const std::vector<Eigen::VectorXd> single = {vec2(4, -1)};
  CHECK((centroid(single, Eigen::VectorXd::Ones(1)) - vec2(4, -1)).norm() == 0.0);
}

TEST_CASE("network disagreement hand cases") {
  Eigen::VectorXd uniform(2);
  uniform << 0.5, 0.5;
  CHECK(network_disagreement({vec2(1, 0), vec2(3, 2)}, uniform) == doctest::Approx(4.0));
  CHECK(network_disagreement({vec2(2, 2), vec2(2, 2)}, uniform) == doctest::Approx(0.0));
  CHECK(network_disagreement({vec2(5, 5)}, Eigen::VectorXd::Ones(1)) == doctest::Approx(0.0));
}

TEST_CASE("mean square deviation is the direct sum") {
  const Eigen::VectorXd ref = vec2(1, 1);
  CHECK(mean_square_deviation({vec2(0, 0), vec2(2, 2)}, ref) == doctest::Approx(4.0));
}

TEST_CASE("reference minimizer: eps=0 lms matches ridge normal equations") {
  const int dim = 3;
  Rng rng(41);
  Eigen::VectorXd mean(dim);
  mean << 1.0, -0.5, 0.5;
  const std::vector<std::vector<Sample>> agent_data = {gaussian_pool(60, mean, rng),
                                                       gaussian_pool(60, mean, rng)};
  Eigen::VectorXd pi(2);
  pi << 0.5, 0.5;
  const double rho = 0.1;
  const LossModel model = LossModel::lms(dim, rho);
  const Eigen::VectorXd wstar = solve_reference_minimizer(
      model, agent_data, pi, {closed_l2(0.0)}, {1e-10, 200000});

  Eigen::MatrixXd lhs = rho * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = 0; k < agent_data.size(); ++k)
    for (const auto& s : agent_data[k]) {
      lhs += (pi(static_cast<int>(k)) / 60.0) * s.x * s.x.transpose();
      rhs += (pi(static_cast<int>(k)) / 60.0) * s.y * s.x;
    }
  const Eigen::VectorXd oracle = lhs.ldlt().solve(rhs);
  CHECK((wstar - oracle).norm() < 1e-8);
}

TEST_CASE("reference minimizer: logistic gradient norm hits the tolerance") {
  Rng rng(42);
  Eigen::VectorXd mean(2);
  mean << 0.8, 0.8;
  const std::vector<std::vector<Sample>> agent_data = {gaussian_pool(80, mean, rng)};
  const LossModel model = LossModel::logistic(2, 0.05);
  const Eigen::VectorXd wstar = solve_reference_minimizer(
      model, agent_data, Eigen::VectorXd::Ones(1), {closed_l2(0.0)});
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(2);
  for (const auto& s : agent_data[0]) grad += model.grad_w(wstar, s.x, s.y);
  grad /= 80.0;
  CHECK(grad.norm() < 1e-10);
}

TEST_CASE("reference minimizer: adversarial logistic is locally optimal") {
  Rng rng(43);
  Eigen::VectorXd mean(2);
  mean << 1.2, 0.3;
  const std::vector<std::vector<Sample>> agent_data = {gaussian_pool(100, mean, rng)};
  const Eigen::VectorXd pi = Eigen::VectorXd::Ones(1);
  const LossModel model = LossModel::logistic(2, 0.05);
  const auto specs = std::vector<PerturbationSpec>{closed_l2(0.3)};
  const Eigen::VectorXd wstar = solve_reference_minimizer(model, agent_data, pi, specs);
  const double risk_star = weighted_adversarial_risk(model, wstar, agent_data, pi, specs);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd xi = vec2(rng.normal(), rng.normal());
    xi *= 1e-2 / xi.norm();
    CHECK(risk_star <= weighted_adversarial_risk(model, wstar + xi, agent_data, pi, specs) +
                           1e-12);
  }
}

TEST_CASE("empirical adversarial risk: eps=0 is the plain risk; w=0 pins ln 2") {
  Rng rng(44);
  Eigen::VectorXd mean(2);
  mean << 1.0, 0.0;
  const auto pool = gaussian_pool(50, mean, rng);
  const LossModel model = LossModel::logistic(2);
  const Eigen::VectorXd w = vec2(0.7, -0.2);

  double plain = 0.0;
  for (const auto& s : pool) plain += model.value(w, s.x, s.y);
  plain /= 50.0;
  CHECK(empirical_adversarial_risk(model, w, pool, closed_l2(0.0)) ==
        doctest::Approx(plain).epsilon(1e-15));

  // Gradient-free point: the loss is ln 2 for any perturbation.
  for (double eps : {0.0, 0.5, 2.0})
    CHECK(empirical_adversarial_risk(model, Eigen::VectorXd::Zero(2), pool,
                                     closed_l2(eps)) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("empirical adversarial risk grows with the ball") {
  Rng rng(45);
  Eigen::VectorXd mean(2);
  mean << 1.0, 0.5;
  const auto pool = gaussian_pool(60, mean, rng);
  const LossModel model = LossModel::logistic(2);
  const Eigen::VectorXd w = vec2(1.0, 0.4);
  const double r0 = empirical_adversarial_risk(model, w, pool, closed_l2(0.0));
  const double r1 = empirical_adversarial_risk(model, w, pool, closed_l2(0.1));
  const double r2 = empirical_adversarial_risk(model, w, pool, closed_l2(0.2));
  CHECK(r1 >= r0);
  CHECK(r2 >= r1);
}

TEST_CASE("robustness curve: eps=0 equals an independent clean-error computation") {
  Rng rng(46);
  Eigen::VectorXd mean(2);
  mean << 1.0, 1.0;
  const auto pool = gaussian_pool(200, mean, rng);
  const LossModel model = LossModel::logistic(2);
  const std::vector<Eigen::VectorXd> models = {vec2(0.9, 1.1), vec2(2.0, -0.1)};

  const auto curve = robustness_curve(models, model, pool, closed_l2(0.0), {0.0});
  for (std::size_t k = 0; k < models.size(); ++k) {
    int wrong = 0;
    for (const auto& s : pool)
      if ((models[k].dot(s.x) >= 0.0 ? 1.0 : -1.0) != s.y) ++wrong;
    CHECK(curve[0].per_agent_error[k] == static_cast<double>(wrong) / 200.0);
  }
}

TEST_CASE("robustness curve: nondecreasing in eps and saturating at huge eps") {
  Rng rng(47);
  Eigen::VectorXd mean(2);
  mean << 2.5, 2.5;  // comfortably separable
  const auto pool = gaussian_pool(150, mean, rng);
  const LossModel model = LossModel::logistic(2);

  // Clean-trained reference direction.
  const std::vector<std::vector<Sample>> agent_data = {pool};
  const Eigen::VectorXd w = solve_reference_minimizer(
      model, agent_data, Eigen::VectorXd::Ones(1), {closed_l2(0.0)}, {1e-8, 400000});
  const std::vector<Eigen::VectorXd> models = {w};
  const auto curve =
      robustness_curve(models, model, pool, closed_l2(0.0), {0.0, 0.5, 1.0, 2.0, 50.0});
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].mean_error >= curve[i - 1].mean_error - 1e-12);
  CHECK(curve.back().mean_error == doctest::Approx(1.0));
}

TEST_CASE("moreau estimator matches the closed form on a quadratic") {
  // J(w) = 0.5||w||^2 with L = 1: gamma = 1/3, zhat = 0.75 w_c, and the
  // returned value is 0.5625 ||w_c||^2.
  ProxObjective quad;
  quad.value = [](const Eigen::VectorXd& z) { return 0.5 * z.squaredNorm(); };
  quad.gradient = [](const Eigen::VectorXd& z) { return z; };

  const Eigen::VectorXd center = vec2(2.0, -1.0);
  MoreauOptions opts;
  opts.smoothness = 1.0;
  opts.inner_steps = 500;
  opts.inner_tol = 1e-12;
  const MoreauResult res = moreau_grad_norm_sq(center, quad, opts);
  CHECK(res.converged);
  CHECK(res.grad_norm_sq == doctest::Approx(0.5625 * center.squaredNorm()).epsilon(1e-6));
}

TEST_CASE("moreau estimator: zero at the minimizer of a convex objective") {
  ProxObjective quad;
  quad.value = [](const Eigen::VectorXd& z) { return 0.5 * (z - vec2(1, 1)).squaredNorm(); };
  quad.gradient = [](const Eigen::VectorXd& z) { return Eigen::VectorXd(z - vec2(1, 1)); };
  MoreauOptions opts;
  opts.smoothness = 1.0;
  opts.inner_tol = 1e-10;
  const MoreauResult res = moreau_grad_norm_sq(vec2(1, 1), quad, opts);
  CHECK(res.grad_norm_sq < 1e-12);
}

TEST_CASE("moreau estimator: doubling inner steps barely moves a converged probe") {
  Rng rng(48);
  Eigen::VectorXd mean(2);
  mean << 1.0, 0.2;
  const std::vector<std::vector<Sample>> agent_data = {gaussian_pool(80, mean, rng)};
  const LossModel model = LossModel::logistic(2);
  const auto obj = adversarial_risk_objective(model, agent_data, Eigen::VectorXd::Ones(1),
                                              {closed_l2(0.1)});
  MoreauOptions opts;
  opts.smoothness = 2.0;
  opts.inner_steps = 400;
  opts.inner_tol = 1e-10;
  const double once = moreau_grad_norm_sq(vec2(0.4, 0.1), obj, opts).grad_norm_sq;
  opts.inner_steps = 800;
  const double twice = moreau_grad_norm_sq(vec2(0.4, 0.1), obj, opts).grad_norm_sq;
  CHECK(std::abs(once - twice) <= 0.01 * std::max(once, 1e-12));
}

TEST_CASE("gradient noise variance: degenerate cases") {
  auto data = std::make_shared<Dataset>();
  data->dim = 2;
  Sample s;
  s.x = vec2(1.0, -1.0);
  s.y = 1.0;
  data->rows.push_back(s);
  const auto sources = partition_over_agents(data, 1, PartitionPolicy::contiguous, 0);
  const LossModel model = LossModel::logistic(2);
  // One-sample pool: every batch is identical, variance 0.
  CHECK(gradient_noise_variance(model, vec2(0.3, 0.3), sources[0], closed_l2(0.1), 2, 50,
                                7) == doctest::Approx(0.0));
  CHECK_THROWS_AS(gradient_noise_variance(model, vec2(0.3, 0.3), sources[0],
                                          closed_l2(0.1), 2, 1, 7),
                  std::invalid_argument);
}

TEST_CASE("gradient noise variance follows the 1/B law") {
  Rng rng(49);
  Eigen::VectorXd mean(3);
  mean << 1.0, -0.4, 0.6;
  auto data = std::make_shared<Dataset>();
  data->dim = 3;
  for (const auto& s : gaussian_pool(50, mean, rng)) data->rows.push_back(s);
  const auto sources = partition_over_agents(data, 1, PartitionPolicy::contiguous, 0);
  const LossModel model = LossModel::logistic(3);
  Eigen::VectorXd w(3);
  w << 0.5, 0.1, -0.2;

  const double v1 = gradient_noise_variance(model, w, sources[0], closed_l2(0.1), 1, 2000, 3);
  const double v10 = gradient_noise_variance(model, w, sources[0], closed_l2(0.1), 10, 2000, 3);
  const double ratio = v1 / v10;
  CHECK(ratio > 7.0);
  CHECK(ratio < 13.0);
}

TEST_CASE("metrics serialize null for absent fields") {
  MetricsRecord rec;
  rec.n = 10;
  rec.disagreement = 0.5;
  rec.msd = 1.25;
  const nlohmann::json j = metrics_to_json(rec);
  CHECK(j["n"] == 10);
  CHECK(j["disagreement"] == 0.5);
  CHECK(j["msd"] == 1.25);
  CHECK(j["excess_risk"].is_null());
  CHECK(j["moreau_grad_sq"].is_null());
  const std::string csv = metrics_csv_row(rec);
  CHECK(csv == "10,0.5,1.25,,,,");
}
