#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace robnet {

// Undirected edge set over K agents. Self-loops are mandatory and set at
// construction; edges stay symmetric by construction.
class Adjacency {
 public:
  explicit Adjacency(int size);

  int size() const { return size_; }
  void add_edge(int a, int b);
  bool has_edge(int a, int b) const { return edges_[flat(a, b)] != 0; }
  // Neighborhood of k including k itself.
  std::vector<int> neighbors(int k) const;
  // |N_k| including the self-loop.
  int degree(int k) const;
  // Number of undirected off-diagonal edges.
  int edge_count() const;

 private:
  std::size_t flat(int a, int b) const {
    return static_cast<std::size_t>(a) * static_cast<std::size_t>(size_) +
           static_cast<std::size_t>(b);
  }
  int size_;
  std::vector<std::uint8_t> edges_;
};

// Left-stochastic combination weights with cached Perron vector and mixing
// rate. weights(l, k) is the weight agent k assigns to neighbor l.
struct CombinationMatrix {
  Eigen::MatrixXd weights;
  Eigen::VectorXd perron;
  double lambda2 = 0.0;

  int size() const { return static_cast<int>(weights.rows()); }
};

// Random geometric graph on the unit square: nodes at uniform coordinates,
// edge when the mean squared coordinate distance is below `threshold`.
// Redraws until connected; throws after the retry budget (1000 draws).
Adjacency generate_geometric_adjacency(int agent_count, double threshold,
                                       std::uint64_t seed);

// BFS from node 0 reaches every node and at least one self-loop exists.
// Self-loops are structural in Adjacency, so this reduces to connectivity.
bool verify_strong_connectivity(const Adjacency& adj);

// Metropolis-Hastings weights: a_{lk} = 1/max(n_l, n_k) for neighbors l != k
// (n counts the self-loop), diagonal absorbs the remainder. Symmetric and
// doubly stochastic, so the Perron vector is uniform.
CombinationMatrix metropolis_weights(const Adjacency& adj);

// Perron vector of a left-stochastic primitive matrix by power iteration to
// residual ||A pi - pi||_inf < 1e-12. Throws if the matrix is not primitive
// (positive-entry digraph not strongly connected, or no self-loop) or the
// iteration cap is hit.
Eigen::VectorXd perron_vector(const Eigen::MatrixXd& a);

// Modulus of the second-largest eigenvalue (0 for K=1).
double mixing_rate(const Eigen::MatrixXd& a);

// Validates left-stochasticity and fills perron/lambda2.
CombinationMatrix make_combination(const Eigen::MatrixXd& weights);

CombinationMatrix identity_combination(int size);

nlohmann::json graph_to_json(const Adjacency& adj, const CombinationMatrix& comb);
// Rebuilds the combination matrix (and checks invariants) from graph JSON.
CombinationMatrix combination_from_json(const nlohmann::json& j);

}  // namespace robnet
