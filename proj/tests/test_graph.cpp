#include <doctest.h>

#include <fstream>

#include "robnet/graph.hpp"
#include "robnet/rng.hpp"

using namespace robnet;

namespace {

// BFS connectivity oracle, independent of verify_strong_connectivity's code
// path (hand-rolled stack walk over the raw edge predicate).
bool bfs_connected(const Adjacency& adj) {
  std::vector<int> stack{0};
  std::vector<bool> seen(static_cast<std::size_t>(adj.size()), false);
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    for (int l = 0; l < adj.size(); ++l) {
      if (l != node && adj.has_edge(node, l) && !seen[static_cast<std::size_t>(l)]) {
        seen[static_cast<std::size_t>(l)] = true;
        ++count;
        stack.push_back(l);
      }
    }
  }
  return count == adj.size();
}

Adjacency path3() {
  Adjacency adj(3);
  adj.add_edge(0, 1);
  adj.add_edge(1, 2);
  return adj;
}

}  // namespace

TEST_CASE("geometric generation: K=1 is a single node with a self-loop") {
  const Adjacency adj = generate_geometric_adjacency(1, 0.5, 42);
  CHECK(adj.size() == 1);
  CHECK(adj.has_edge(0, 0));
  CHECK(verify_strong_connectivity(adj));
}

TEST_CASE("geometric generation: threshold 2.0 always joins two nodes") {
  const Adjacency adj = generate_geometric_adjacency(2, 2.0, 7);
  CHECK(adj.has_edge(0, 1));
}

TEST_CASE("geometric generation: K=20 golden graph stays connected") {
  const Adjacency adj = generate_geometric_adjacency(20, 0.3, 0);
  CHECK(bfs_connected(adj));
  CHECK(verify_strong_connectivity(adj));

  // Frozen from the first run of this generator (seed 0, threshold 0.3).
  std::ifstream golden(std::string(ROBNET_TEST_DIR) + "/golden/graph_k20.json");
  REQUIRE(golden.good());
  nlohmann::json expected;
  golden >> expected;
  const CombinationMatrix comb = metropolis_weights(adj);
  const nlohmann::json actual = graph_to_json(adj, comb);
  CHECK(actual["K"] == expected["K"]);
  CHECK(actual["edges"] == expected["edges"]);
  CHECK(actual["lambda2"].get<double>() ==
        doctest::Approx(expected["lambda2"].get<double>()).epsilon(1e-12));
}

TEST_CASE("geometric generation rejects a hopeless threshold") {
  CHECK_THROWS_WITH_AS(generate_geometric_adjacency(40, 1e-6, 3),
                       doctest::Contains("retry budget of 1000"), std::runtime_error);
}

TEST_CASE("strong connectivity") {
  CHECK(verify_strong_connectivity(path3()));
  Adjacency two_pairs(4);
  two_pairs.add_edge(0, 1);
  two_pairs.add_edge(2, 3);
  CHECK_FALSE(verify_strong_connectivity(two_pairs));
}

TEST_CASE("metropolis weights: single node") {
  const CombinationMatrix comb = metropolis_weights(Adjacency(1));
  CHECK(comb.weights(0, 0) == 1.0);
  CHECK(comb.perron(0) == 1.0);
  CHECK(comb.lambda2 == 0.0);
}

TEST_CASE("metropolis weights: path 1-2-3 hand values") {
  const CombinationMatrix comb = metropolis_weights(path3());
  // n = (2, 3, 2) including self-loops.
  CHECK(comb.weights(0, 1) == doctest::Approx(1.0 / 3));
  CHECK(comb.weights(1, 0) == doctest::Approx(1.0 / 3));
  CHECK(comb.weights(1, 2) == doctest::Approx(1.0 / 3));
  CHECK(comb.weights(2, 1) == doctest::Approx(1.0 / 3));
  CHECK(comb.weights(0, 0) == doctest::Approx(2.0 / 3));
  CHECK(comb.weights(1, 1) == doctest::Approx(1.0 / 3));
  CHECK(comb.weights(2, 2) == doctest::Approx(2.0 / 3));
  CHECK(comb.weights(0, 2) == 0.0);
}

TEST_CASE("metropolis weights: complete K=3 is all 1/3") {
  Adjacency adj(3);
  adj.add_edge(0, 1);
  adj.add_edge(0, 2);
  adj.add_edge(1, 2);
  const CombinationMatrix comb = metropolis_weights(adj);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(comb.weights(r, c) == doctest::Approx(1.0 / 3));
  CHECK(comb.lambda2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mixing rate of path-3 metropolis") {
  // Characteristic polynomial oracle: det(A - tI) = (2/3 - t) t (t - 1),
  // eigenvalues {1, 2/3, 0}.
  const CombinationMatrix comb = metropolis_weights(path3());
  CHECK(comb.lambda2 == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("perron vector: hand 2x2 case") {
  Eigen::MatrixXd a(2, 2);
  a << 0.5, 0.25, 0.5, 0.75;
  const Eigen::VectorXd pi = perron_vector(a);
  CHECK(pi(0) == doctest::Approx(1.0 / 3).epsilon(1e-10));
  CHECK(pi(1) == doctest::Approx(2.0 / 3).epsilon(1e-10));
}

TEST_CASE("perron vector: doubly stochastic gives uniform") {
  const CombinationMatrix comb = metropolis_weights(path3());
  const Eigen::VectorXd pi = perron_vector(comb.weights);
  for (int i = 0; i < 3; ++i) CHECK(pi(i) == doctest::Approx(1.0 / 3).epsilon(1e-10));
}

TEST_CASE("perron vector: identity is rejected as non-primitive") {
  CHECK_THROWS_WITH_AS(perron_vector(Eigen::MatrixXd::Identity(2, 2)),
                       doctest::Contains("not primitive"), std::runtime_error);
}

TEST_CASE("combination matrix invariants over random geometric graphs") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int k = 3 + static_cast<int>(seed % 8);
    const Adjacency adj = generate_geometric_adjacency(k, 0.4, seed);
    const CombinationMatrix comb = metropolis_weights(adj);

    for (int c = 0; c < k; ++c) {
      CHECK(comb.weights.col(c).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int r = 0; r < k; ++r) CHECK(comb.weights(r, c) >= 0.0);
    }
    // Fixed point and positivity of the Perron weights.
    CHECK((comb.weights * comb.perron - comb.perron).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(comb.perron.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // Metropolis symmetry is exact.
    CHECK((comb.weights - comb.weights.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    for (int i = 0; i < k; ++i)
      CHECK(comb.perron(i) == doctest::Approx(1.0 / k).epsilon(1e-12));
    CHECK(comb.lambda2 < 1.0);
  }
}

TEST_CASE("graph json round trip") {
  const Adjacency adj = generate_geometric_adjacency(6, 0.4, 5);
  const CombinationMatrix comb = metropolis_weights(adj);
  const nlohmann::json j = graph_to_json(adj, comb);
  const CombinationMatrix back = combination_from_json(j);
  CHECK((back.weights - comb.weights).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK(back.lambda2 == doctest::Approx(comb.lambda2).epsilon(1e-12));
}
