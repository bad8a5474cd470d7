#include "robnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "robnet/rng.hpp"

namespace robnet {

namespace {
constexpr int kRetryBudget = 1000;
constexpr double kPerronResidual = 1e-12;
constexpr int kPerronIterCap = 200000;
}  // namespace

Adjacency::Adjacency(int size) : size_(size) {
  if (size < 1) throw std::invalid_argument("Adjacency: size must be >= 1");
  edges_.assign(static_cast<std::size_t>(size) * size, 0);
  for (int k = 0; k < size; ++k) edges_[flat(k, k)] = 1;
}

void Adjacency::add_edge(int a, int b) {
  if (a < 0 || b < 0 || a >= size_ || b >= size_)
    throw std::out_of_range("Adjacency::add_edge: node index out of range");
  edges_[flat(a, b)] = 1;
  edges_[flat(b, a)] = 1;
}

std::vector<int> Adjacency::neighbors(int k) const {
  std::vector<int> out;
  for (int l = 0; l < size_; ++l)
    if (has_edge(l, k)) out.push_back(l);
  return out;
}

int Adjacency::degree(int k) const {
  int n = 0;
  for (int l = 0; l < size_; ++l) n += has_edge(l, k) ? 1 : 0;
  return n;
}

int Adjacency::edge_count() const {
  int n = 0;
  for (int a = 0; a < size_; ++a)
    for (int b = a + 1; b < size_; ++b) n += has_edge(a, b) ? 1 : 0;
  return n;
}

bool verify_strong_connectivity(const Adjacency& adj) {
  const int k = adj.size();
  std::vector<char> seen(static_cast<std::size_t>(k), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    for (int l = 0; l < k; ++l) {
      if (adj.has_edge(l, node) && !seen[l]) {
        seen[l] = 1;
        ++reached;
        queue.push_back(l);
      }
    }
  }
  bool self_loop = false;
  for (int i = 0; i < k; ++i) self_loop = self_loop || adj.has_edge(i, i);
  return reached == k && self_loop;
}

Adjacency generate_geometric_adjacency(int agent_count, double threshold,
                                       std::uint64_t seed) {
  if (agent_count < 1)
    throw std::invalid_argument("generate_geometric_adjacency: K must be >= 1");
  if (!(threshold > 0.0))
    throw std::invalid_argument("generate_geometric_adjacency: threshold must be > 0");

  Rng rng(mix64(seed ^ 0x67656f6dULL));
  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    std::vector<double> xs(agent_count), ys(agent_count);
    for (int i = 0; i < agent_count; ++i) {
      xs[i] = rng.uniform01();
      ys[i] = rng.uniform01();
    }
    Adjacency adj(agent_count);
    for (int a = 0; a < agent_count; ++a) {
      for (int b = a + 1; b < agent_count; ++b) {
        const double dx = xs[a] - xs[b];
        const double dy = ys[a] - ys[b];
        // Mean over the two coordinates of the squared distance.
        if (0.5 * (dx * dx + dy * dy) < threshold) adj.add_edge(a, b);
      }
    }
    if (verify_strong_connectivity(adj)) return adj;
  }
  throw std::runtime_error(
      "generate_geometric_adjacency: retry budget of 1000 draws exhausted "
      "(threshold too small for K)");
}

namespace {

// Strong connectivity of the digraph induced by positive entries, plus a
// positive diagonal entry: the primitivity precondition for perron_vector.
bool primitive_structure(const Eigen::MatrixXd& a) {
  const int k = static_cast<int>(a.rows());
  bool self_loop = false;
  for (int i = 0; i < k; ++i) self_loop = self_loop || a(i, i) > 0.0;
  if (!self_loop) return false;

  auto reach_all = [&](bool forward) {
    std::vector<char> seen(static_cast<std::size_t>(k), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      for (int l = 0; l < k; ++l) {
        const double w = forward ? a(l, node) : a(node, l);
        if (w > 0.0 && !seen[l]) {
          seen[l] = 1;
          ++reached;
          queue.push_back(l);
        }
      }
    }
    return reached == k;
  };
  return reach_all(true) && reach_all(false);
}

void check_left_stochastic(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("combination matrix must be square");
  if ((a.array() < 0.0).any())
    throw std::invalid_argument("combination matrix has negative entries");
  for (int c = 0; c < a.cols(); ++c) {
    if (std::abs(a.col(c).sum() - 1.0) > 1e-10)
      throw std::invalid_argument("combination matrix column does not sum to 1");
  }
}

}  // namespace

Eigen::VectorXd perron_vector(const Eigen::MatrixXd& a) {
  check_left_stochastic(a);
  const int k = static_cast<int>(a.rows());
  if (k == 1) return Eigen::VectorXd::Ones(1);
  if (!primitive_structure(a))
    throw std::runtime_error("perron_vector: matrix not primitive");

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(k, 1.0 / k);
  for (int it = 0; it < kPerronIterCap; ++it) {
    Eigen::VectorXd next = a * pi;
    next /= next.sum();  // guards against drift; sum is 1 up to round-off
    const double residual = (a * next - next).lpNorm<Eigen::Infinity>();
    pi = next;
    if (residual < kPerronResidual) {
      if ((pi.array() <= 0.0).any())
        throw std::runtime_error("perron_vector: fixed point not positive");
      return pi;
    }
  }
  throw std::runtime_error("perron_vector: matrix not primitive (no convergence)");
}

double mixing_rate(const Eigen::MatrixXd& a) {
  const int k = static_cast<int>(a.rows());
  if (k == 1) return 0.0;  // no second eigenvalue
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  std::vector<double> mods(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) mods[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()(i));
  std::sort(mods.begin(), mods.end(), std::greater<double>());
  return mods[1];
}

CombinationMatrix make_combination(const Eigen::MatrixXd& weights) {
  check_left_stochastic(weights);
  CombinationMatrix comb;
  comb.weights = weights;
  comb.perron = perron_vector(weights);
  comb.lambda2 = mixing_rate(weights);
  return comb;
}

CombinationMatrix identity_combination(int size) {
  CombinationMatrix comb;
  comb.weights = Eigen::MatrixXd::Identity(size, size);
  comb.perron = Eigen::VectorXd::Constant(size, 1.0 / size);
  comb.lambda2 = size > 1 ? 1.0 : 0.0;
  return comb;
}

CombinationMatrix metropolis_weights(const Adjacency& adj) {
  if (!verify_strong_connectivity(adj))
    throw std::invalid_argument("metropolis_weights: adjacency not connected");
  const int k = adj.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  for (int col = 0; col < k; ++col) {
    double off = 0.0;
    for (int row = 0; row < k; ++row) {
      if (row == col || !adj.has_edge(row, col)) continue;
      a(row, col) = 1.0 / std::max(adj.degree(row), adj.degree(col));
      off += a(row, col);
    }
    a(col, col) = 1.0 - off;
  }
  CombinationMatrix comb;
  comb.weights = a;
  // Doubly stochastic by construction: the Perron vector is uniform.
  comb.perron = Eigen::VectorXd::Constant(k, 1.0 / k);
  comb.lambda2 = mixing_rate(a);
  return comb;
}

nlohmann::json graph_to_json(const Adjacency& adj, const CombinationMatrix& comb) {
  nlohmann::json j;
  j["K"] = adj.size();
  nlohmann::json edges = nlohmann::json::array();
  for (int a = 0; a < adj.size(); ++a)
    for (int b = a; b < adj.size(); ++b)
      if (adj.has_edge(a, b)) edges.push_back({a, b});
  j["edges"] = edges;
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < comb.size(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < comb.size(); ++c) row.push_back(comb.weights(r, c));
    rows.push_back(row);
  }
  j["weights"] = rows;
  j["pi"] = std::vector<double>(comb.perron.data(), comb.perron.data() + comb.size());
  j["lambda2"] = comb.lambda2;
  return j;
}

CombinationMatrix combination_from_json(const nlohmann::json& j) {
  const int k = j.at("K").get<int>();
  const auto& rows = j.at("weights");
  if (static_cast<int>(rows.size()) != k)
    throw std::invalid_argument("graph json: weights row count != K");
  Eigen::MatrixXd a(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) a(r, c) = rows.at(r).at(c).get<double>();
  return make_combination(a);
}

}  // namespace robnet
