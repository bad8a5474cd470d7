#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "robnet/model.hpp"
#include "robnet/rng.hpp"

namespace robnet {

struct Dataset {
  std::vector<Sample> rows;
  int dim = 0;

  int size() const { return static_cast<int>(rows.size()); }
};

enum class PartitionPolicy { contiguous, shuffled };

PartitionPolicy partition_policy_from_string(const std::string& name);

// One agent's data: either a synthetic binary Gaussian stream
// x | y ~ N(y * mean, I), y uniform in {-1,+1}, or a fixed slice of a
// loaded dataset sampled with replacement.
class AgentDataSource {
 public:
  static AgentDataSource synthetic(Eigen::VectorXd class_mean);
  static AgentDataSource partition(std::shared_ptr<const Dataset> data,
                                   std::vector<int> indices);

  Sample draw(Rng& rng) const;
  std::vector<Sample> minibatch(int batch_size, Rng& rng) const;
  // Deterministic evaluation set: `count` fresh draws for synthetic sources,
  // the whole owned slice for partition sources.
  std::vector<Sample> frozen_set(int count, Rng& rng) const;

  int dim() const;
  bool is_synthetic() const { return data_ == nullptr; }
  const Eigen::VectorXd& class_mean() const { return mean_; }
  int pool_size() const { return static_cast<int>(indices_.size()); }

 private:
  AgentDataSource() = default;
  Eigen::VectorXd mean_;                  // synthetic mode
  std::shared_ptr<const Dataset> data_;   // partition mode
  std::vector<int> indices_;
};

// K synthetic binary sources with per-agent mean shifts s_k,
// ||s_k|| <= heterogeneity, deterministic in `seed`. The shared base mean
// has norm `margin` so class separation is controllable.
std::vector<AgentDataSource> gen_synthetic_binary(int agents, int dim,
                                                  double heterogeneity,
                                                  std::uint64_t seed,
                                                  double margin = 2.0);

// CSV loader: optional header, label column by name or numeric index,
// optional per-column min-max scaling of features to [0,1]. Parse failures
// report the 1-based line number.
Dataset load_csv_dataset(const std::string& path, const std::string& label_column,
                         bool normalize);

// Disjoint cover with sizes differing by at most one.
std::vector<AgentDataSource> partition_over_agents(
    std::shared_ptr<const Dataset> data, int agents, PartitionPolicy policy,
    std::uint64_t seed);

}  // namespace robnet
