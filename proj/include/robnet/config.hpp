#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "robnet/model.hpp"
#include "robnet/perturb.hpp"
#include "robnet/train.hpp"

namespace robnet {

// Invalid config or invalid command input: maps to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Sectioned key=value text. '#' and ';' start comments. Unknown sections or
// keys are rejected up front.
class IniFile {
 public:
  static IniFile parse(const std::string& text);
  static IniFile load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long get_long(const std::string& section, const std::string& key,
                long fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

enum class AttackPattern { homogeneous, clean_adv, l2_linf };

// The parsed and range-checked experiment description. `resolve_*` helpers
// materialize the runtime objects (sources, graph, model, specs).
struct ExperimentConfig {
  struct Graph {
    int agents = 10;
    double threshold = 0.3;
    std::uint64_t seed = 0;
    std::string path;  // when set, load instead of generating
  } graph;

  struct Model {
    LossKind kind = LossKind::logistic;
    double rho = 0.0;
    double tau = 1.0;
    std::vector<int> hidden = {16};
    int classes = 2;
  } model;

  struct Train {
    Strategy strategy = Strategy::diffusion;
    double mu = 0.01;
    int batch = 1;
    long iterations = 0;
    std::uint64_t seed = 1;
    long record_every = 100;
    int threads = 1;
    double divergence_threshold = 1e8;
    std::string init = "auto";  // auto | zero | gaussian
    double init_scale = 0.1;
    std::vector<double> decay_points;
    double decay_factor = 10.0;
  } train;

  struct Attack {
    AttackPattern pattern = AttackPattern::homogeneous;
    NormKind norm = NormKind::l2;
    double epsilon = 0.0;
    AttackKind generator = AttackKind::closed_form;
    int pgd_steps = 10;
    double pgd_step_size = 0.0;
    bool pgd_random_init = false;
    double epsilon_l2 = 0.0;
    double epsilon_linf = 0.0;
  } attack;

  struct Data {
    std::string mode = "synthetic";  // synthetic | csv
    int dim = 2;
    double heterogeneity = 0.0;
    double margin = 2.0;
    std::uint64_t seed = 7;
    std::string path;
    std::string label = "label";
    bool normalize = false;
    PartitionPolicy partition = PartitionPolicy::contiguous;
  } data;

  struct Eval {
    std::vector<AttackKind> attacks = {AttackKind::closed_form};
    NormKind norm = NormKind::l2;
    std::vector<double> eps_grid = {0.0};
    int test_size = 2000;
    std::uint64_t seed = 99;
    int pgd_steps = 20;
    bool track_adv_error = false;
    bool track_moreau = false;
    bool track_noise_var = false;
    int noise_trials = 100;
    int noise_batch = 1;
    double smoothness = 0.0;  // <= 0: probe
    int inner_steps = 500;
    double inner_tol = 1e-8;
    std::string reference = "auto";  // auto | none
  } eval;

  struct Output {
    std::string dir = "out";
    bool svg = true;
  } output;

  static ExperimentConfig from_ini(const IniFile& ini);
  static ExperimentConfig load(const std::string& path);

  // Canonical round-trippable INI text of the resolved config.
  std::string to_ini() const;

  // Per-agent specs honoring the heterogeneity pattern; validated against
  // the model.
  std::vector<PerturbationSpec> agent_specs(int agents, const LossModel& m) const;

  TrainConfig train_config(int agents, const LossModel& m) const;
};

}  // namespace robnet
