#include "robnet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "robnet/svg.hpp"

namespace robnet {

namespace fs = std::filesystem;

namespace {

void map_binary_labels(Dataset& data) {
  for (auto& s : data.rows) s.y = s.y > 0.0 ? 1.0 : -1.0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << text;
}

LossModel build_model(const ExperimentConfig& cfg, int dim) {
  switch (cfg.model.kind) {
    case LossKind::logistic: return LossModel::logistic(dim, cfg.model.rho);
    case LossKind::exponential: return LossModel::exponential(dim, cfg.model.rho);
    case LossKind::lms: return LossModel::lms(dim, cfg.model.rho);
    case LossKind::huber: return LossModel::huber(dim, cfg.model.tau, cfg.model.rho);
    case LossKind::mlp: {
      MlpShape shape;
      shape.input_dim = dim;
      shape.hidden = cfg.model.hidden;
      shape.classes = cfg.model.classes;
      return LossModel::mlp(shape);
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<std::vector<Sample>> frozen_eval_sets(const Experiment& exp) {
  const int agents = static_cast<int>(exp.sources.size());
  const int per_agent = std::max(1, exp.cfg.eval.test_size / agents);
  std::vector<std::vector<Sample>> frozen;
  frozen.reserve(static_cast<std::size_t>(agents));
  for (int k = 0; k < agents; ++k) {
    Rng rng = Rng::keyed(exp.cfg.eval.seed, static_cast<std::uint64_t>(k), 0,
                         StreamPurpose::kEval);
    frozen.push_back(exp.sources[static_cast<std::size_t>(k)].frozen_set(per_agent, rng));
  }
  return frozen;
}

bool reference_eligible(const Experiment& exp) {
  if (exp.cfg.eval.reference != "auto") return false;
  if (exp.model.convexity() == Convexity::non_convex) return false;
  bool any_attack = false;
  for (const auto& spec : exp.tcfg.specs) {
    if (spec.epsilon == 0.0) continue;
    if (spec.generator != AttackKind::closed_form) return false;
    any_attack = true;
  }
  // With attacks on, the exact adversarial risk is only smooth enough for
  // the gradient-norm stopping rule with the logistic/exponential kinds;
  // the lms/huber surrogate (|r| + eps||w||)^2 puts minimizers at residual
  // kinks where the gradient does not vanish.
  if (any_attack && exp.model.kind() != LossKind::logistic &&
      exp.model.kind() != LossKind::exponential)
    return false;
  return true;
}

nlohmann::json models_to_json(const Experiment& exp, const NetworkState& state) {
  nlohmann::json j;
  j["version"] = std::string(kVersion);
  j["strategy"] = to_string(exp.tcfg.strategy);
  j["K"] = state.agents();
  nlohmann::json model;
  model["kind"] = to_string(exp.model.kind());
  model["rho"] = exp.model.rho();
  model["tau"] = exp.model.tau();
  model["dim"] = exp.model.feature_dim();
  model["hidden"] = exp.model.shape().hidden;
  model["classes"] = exp.model.class_count();
  j["model"] = model;
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& w : state.w)
    ws.push_back(std::vector<double>(w.data(), w.data() + w.size()));
  j["w"] = ws;
  return j;
}

std::string sanitize(const std::string& value) {
  std::string out = value;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  return out;
}

}  // namespace

double tail_mean(const std::vector<MetricsRecord>& records,
                 double (*field)(const MetricsRecord&)) {
  if (records.empty()) throw std::invalid_argument("tail_mean: no records");
  const std::size_t tail =
      std::max<std::size_t>(1, records.size() / 10);
  double total = 0.0;
  for (std::size_t i = records.size() - tail; i < records.size(); ++i)
    total += field(records[i]);
  return total / static_cast<double>(tail);
}

Experiment resolve_experiment(const ExperimentConfig& cfg) {
  Experiment exp;
  exp.cfg = cfg;

  // Graph first: it fixes the agent count.
  if (!cfg.graph.path.empty()) {
    std::ifstream file(cfg.graph.path);
    if (!file) throw ConfigError("[graph] path not found: " + cfg.graph.path);
    nlohmann::json j;
    file >> j;
    exp.comb = combination_from_json(j);
    exp.graph_json = j;
    exp.cfg.graph.agents = exp.comb.size();
  } else {
    const Adjacency adj =
        generate_geometric_adjacency(cfg.graph.agents, cfg.graph.threshold, cfg.graph.seed);
    exp.comb = metropolis_weights(adj);
    exp.graph_json = graph_to_json(adj, exp.comb);
  }
  const int agents = exp.comb.size();

  int dim = cfg.data.dim;
  if (cfg.data.mode == "csv") {
    Dataset data = load_csv_dataset(cfg.data.path, cfg.data.label, cfg.data.normalize);
    if (cfg.model.kind != LossKind::mlp) map_binary_labels(data);
    dim = data.dim;
    auto shared = std::make_shared<Dataset>(std::move(data));
    exp.sources = partition_over_agents(shared, agents, cfg.data.partition, cfg.data.seed);
  } else {
    exp.sources = gen_synthetic_binary(agents, dim, cfg.data.heterogeneity, cfg.data.seed,
                                       cfg.data.margin);
  }

  exp.model = build_model(cfg, dim);
  exp.tcfg = exp.cfg.train_config(agents, exp.model);
  return exp;
}

ModelsFile load_models_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("models file not found: " + path);
  nlohmann::json j;
  file >> j;

  ModelsFile models;
  const auto& m = j.at("model");
  const std::string kind = m.at("kind").get<std::string>();
  const int dim = m.at("dim").get<int>();
  if (kind == "mlp") {
    MlpShape shape;
    shape.input_dim = dim;
    shape.hidden = m.at("hidden").get<std::vector<int>>();
    shape.classes = m.at("classes").get<int>();
    models.model = LossModel::mlp(shape);
  } else if (kind == "huber") {
    models.model = LossModel::huber(dim, m.at("tau").get<double>(), m.at("rho").get<double>());
  } else if (kind == "logistic") {
    models.model = LossModel::logistic(dim, m.at("rho").get<double>());
  } else if (kind == "exponential") {
    models.model = LossModel::exponential(dim, m.at("rho").get<double>());
  } else if (kind == "lms") {
    models.model = LossModel::lms(dim, m.at("rho").get<double>());
  } else {
    throw ConfigError("models file: unknown kind " + kind);
  }
  models.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  for (const auto& row : j.at("w")) {
    const auto values = row.get<std::vector<double>>();
    models.w.push_back(
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<long>(values.size())));
    if (models.w.back().size() != models.model.param_dim())
      throw ConfigError("models file: parameter dimension mismatch");
  }
  if (models.w.empty()) throw ConfigError("models file: no model vectors");
  return models;
}

int cmd_graph(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet,
              std::ostream& log) {
  Experiment exp = resolve_experiment(cfg);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "graph.json", exp.graph_json.dump(2) + "\n");
  if (!quiet) {
    const std::size_t edges =
        exp.graph_json.contains("edges") ? exp.graph_json["edges"].size() : 0;
    log << "graph: K=" << exp.comb.size() << " edges=" << edges
        << " lambda2=" << exp.comb.lambda2 << "\n";
  }
  return kExitOk;
}

namespace {

struct TrainOutputs {
  TrainResult result;
  Experiment exp;
};

TrainOutputs run_train_core(const ExperimentConfig& cfg, const fs::path& out,
                            bool quiet, std::ostream& log) {
  TrainOutputs outputs{TrainResult{}, resolve_experiment(cfg)};
  Experiment& exp = outputs.exp;
  fs::create_directories(out);
  fs::create_directories(out / "plots");

  auto frozen = frozen_eval_sets(exp);

  // Probed smoothness is echoed into the manifest so a re-run skips the
  // probe and reproduces the metrics byte-for-byte.
  double smoothness = exp.cfg.eval.smoothness;
  if (exp.cfg.eval.track_moreau && smoothness <= 0.0) {
    std::vector<Sample> pool;
    for (const auto& set : frozen) pool.insert(pool.end(), set.begin(), set.end());
    Rng rng = Rng::keyed(exp.cfg.eval.seed, 1, 1, StreamPurpose::kProbe);
    const NetworkState init = initial_state(exp.model, exp.comb.size(), exp.tcfg);
    smoothness = probe_smoothness(exp.model, pool, init.w.front(), 1.0, 200, rng);
    exp.cfg.eval.smoothness = smoothness;
  }

  MetricsRecorder::Options opts;
  opts.want_adv_error = exp.cfg.eval.track_adv_error;
  opts.want_moreau = exp.cfg.eval.track_moreau;
  opts.want_noise_var = exp.cfg.eval.track_noise_var;
  opts.moreau.smoothness = smoothness > 0.0 ? smoothness : 1.0;
  opts.moreau.inner_steps = exp.cfg.eval.inner_steps;
  opts.moreau.inner_tol = exp.cfg.eval.inner_tol;
  opts.noise_trials = exp.cfg.eval.noise_trials;
  opts.noise_batch = exp.cfg.eval.noise_batch;
  opts.seed = exp.cfg.eval.seed;
  if (exp.cfg.eval.track_adv_error) {
    PerturbationSpec eval_attack;
    eval_attack.norm = exp.cfg.eval.norm;
    eval_attack.epsilon = exp.cfg.eval.eps_grid.empty() ? exp.cfg.attack.epsilon
                                                        : exp.cfg.eval.eps_grid.back();
    eval_attack.generator = exp.cfg.eval.attacks.empty() ? AttackKind::closed_form
                                                         : exp.cfg.eval.attacks.front();
    eval_attack.pgd_steps = exp.cfg.eval.pgd_steps;
    opts.eval_attack = eval_attack;
  }
  // Best effort in auto mode: a run without msd/excess beats no run.
  Eigen::VectorXd reference;
  bool have_reference = false;
  if (reference_eligible(exp)) {
    try {
      reference =
          solve_reference_minimizer(exp.model, frozen, exp.comb.perron, exp.tcfg.specs);
      have_reference = true;
      if (!quiet) log << "reference minimizer: |w*|=" << reference.norm() << "\n";
    } catch (const std::exception& e) {
      if (!quiet) log << "reference minimizer unavailable (" << e.what() << ")\n";
    }
  }
  opts.want_msd = have_reference;

  MetricsRecorder recorder(exp.model, exp.comb.perron, frozen, exp.tcfg.specs, opts);
  recorder.set_sources(&exp.sources);
  if (have_reference) recorder.set_reference(std::move(reference));

  // Manifest first: a run that diverges still leaves its full description.
  write_text(out / "manifest",
             "# robnet " + std::string(kVersion) + "\n" + exp.cfg.to_ini());
  write_text(out / "graph.json", exp.graph_json.dump(2) + "\n");

  outputs.result = run_training(exp.model, exp.comb, exp.sources, exp.tcfg, &recorder);

  std::ostringstream jsonl;
  std::ostringstream csv;
  csv << metrics_csv_header() << "\n";
  for (const auto& rec : outputs.result.records) {
    jsonl << metrics_to_json(rec).dump() << "\n";
    csv << metrics_csv_row(rec) << "\n";
  }
  write_text(out / "metrics.jsonl", jsonl.str());
  write_text(out / "metrics.csv", csv.str());
  write_text(out / "final_models.json",
             models_to_json(exp, outputs.result.state).dump(2) + "\n");

  if (exp.cfg.output.svg && !outputs.result.records.empty()) {
    auto series_of = [&](const char* label, auto getter, bool* any) {
      SvgSeries s;
      s.label = label;
      for (const auto& rec : outputs.result.records) {
        const auto v = getter(rec);
        if (!v.has_value()) continue;
        s.x.push_back(static_cast<double>(rec.n));
        s.y.push_back(*v);
        *any = true;
      }
      return s;
    };
    bool any = false;
    SvgSeries disagreement = series_of(
        "disagreement",
        [](const MetricsRecord& r) { return std::optional<double>(r.disagreement); }, &any);
    write_line_chart((out / "plots" / "disagreement.svg").string(),
                     "Network disagreement", "iteration", "disagreement",
                     {disagreement}, true);
    any = false;
    SvgSeries msd = series_of(
        "msd", [](const MetricsRecord& r) { return r.msd; }, &any);
    if (any)
      write_line_chart((out / "plots" / "msd.svg").string(), "Mean-square deviation",
                       "iteration", "msd", {msd}, true);
    any = false;
    SvgSeries moreau = series_of(
        "moreau_grad_sq", [](const MetricsRecord& r) { return r.moreau_grad_sq; }, &any);
    if (any)
      write_line_chart((out / "plots" / "moreau.svg").string(),
                       "Moreau envelope gradient", "iteration", "|grad J_gamma|^2",
                       {moreau}, true);
  }

  if (!quiet) {
    if (outputs.result.divergence.has_value())
      log << "train: DIVERGED at iteration " << outputs.result.divergence->iteration
          << " (agent " << outputs.result.divergence->agent << "); partial outputs in "
          << out.string() << "\n";
    else
      log << "train: completed " << exp.tcfg.iterations << " iterations, "
          << outputs.result.records.size() << " records -> " << out.string() << "\n";
  }
  return outputs;
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet,
              std::ostream& log) {
  const TrainOutputs outputs = run_train_core(cfg, out_dir, quiet, log);
  return outputs.result.divergence.has_value() ? kExitDivergence : kExitOk;
}

int cmd_eval(const std::string& models_path, const ExperimentConfig& cfg,
             const std::string& out_dir, bool quiet, std::ostream& log) {
  const ModelsFile models = load_models_file(models_path);

  // Attack/model compatibility is a validation error, named explicitly.
  for (AttackKind attack : cfg.eval.attacks) {
    if (models.model.kind() == LossKind::mlp &&
        (attack == AttackKind::deepfool_linear || attack == AttackKind::closed_form))
      throw ConfigError("cmd_eval: attack '" + to_string(attack) +
                        "' is incompatible with model kind 'mlp'");
    PerturbationSpec probe;
    probe.generator = attack;
    probe.norm = attack == AttackKind::fgsm ? NormKind::linf
                 : attack == AttackKind::fgm ? NormKind::l2
                                             : cfg.eval.norm;
    probe.epsilon = 1.0;
    probe.pgd_steps = cfg.eval.pgd_steps;
    try {
      probe.validate(models.model);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cmd_eval: ") + e.what());
    }
  }

  // Test set drawn from the configured data section.
  std::vector<Sample> testset;
  if (cfg.data.mode == "csv") {
    Dataset data = load_csv_dataset(cfg.data.path, cfg.data.label, cfg.data.normalize);
    if (models.model.kind() != LossKind::mlp) map_binary_labels(data);
    const int take = std::min<int>(cfg.eval.test_size, data.size());
    testset.assign(data.rows.begin(), data.rows.begin() + take);
  } else {
    auto sources = gen_synthetic_binary(static_cast<int>(models.w.size()), cfg.data.dim,
                                        cfg.data.heterogeneity, cfg.data.seed,
                                        cfg.data.margin);
    Rng rng = Rng::keyed(cfg.eval.seed, 0, 1, StreamPurpose::kEval);
    for (int i = 0; i < cfg.eval.test_size; ++i)
      testset.push_back(sources[static_cast<std::size_t>(i) % sources.size()].draw(rng));
  }
  if (models.model.feature_dim() != static_cast<int>(testset.front().x.size()))
    throw ConfigError("cmd_eval: test data dimension does not match the models file");

  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "plots");

  std::ostringstream csv;
  csv << "attack,epsilon,mean_error";
  for (std::size_t k = 0; k < models.w.size(); ++k) csv << ",agent_" << k;
  csv << "\n";
  csv.precision(17);

  std::vector<SvgSeries> series;
  for (AttackKind attack : cfg.eval.attacks) {
    PerturbationSpec spec;
    spec.generator = attack;
    spec.norm = attack == AttackKind::fgsm ? NormKind::linf
                : attack == AttackKind::fgm ? NormKind::l2
                                            : cfg.eval.norm;
    spec.pgd_steps = cfg.eval.pgd_steps;
    const auto curve = robustness_curve(models.w, models.model, testset, spec,
                                        cfg.eval.eps_grid, cfg.eval.seed);
    SvgSeries s;
    s.label = to_string(attack);
    for (const auto& point : curve) {
      csv << to_string(attack) << ',' << point.epsilon << ',' << point.mean_error;
      for (double e : point.per_agent_error) csv << ',' << e;
      csv << "\n";
      s.x.push_back(point.epsilon);
      s.y.push_back(point.mean_error);
    }
    series.push_back(std::move(s));
    if (!quiet)
      log << "eval: " << to_string(attack) << " error(eps=" << curve.front().epsilon
          << ")=" << curve.front().mean_error << " .. error(eps=" << curve.back().epsilon
          << ")=" << curve.back().mean_error << "\n";
  }
  write_text(fs::path(out_dir) / "robustness.csv", csv.str());
  if (cfg.output.svg)
    write_line_chart((fs::path(out_dir) / "plots" / "robustness.svg").string(),
                     "Robustness", "epsilon", "mean classification error", series, false);
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& parameter,
              const std::vector<std::string>& values, const std::string& out_dir,
              bool quiet, std::ostream& log) {
  if (parameter != "mu" && parameter != "B" && parameter != "epsilon" &&
      parameter != "strategy")
    throw ConfigError("cmd_sweep: parameter must be one of mu|B|epsilon|strategy");
  if (values.empty()) throw ConfigError("cmd_sweep: no values given");

  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv << "parameter,value,status,steady_disagreement,steady_msd,final_excess_risk,"
         "final_moreau_grad_sq\n";
  csv.precision(17);

  for (const std::string& value : values) {
    ExperimentConfig run_cfg = cfg;
    try {
      if (parameter == "mu") run_cfg.train.mu = std::stod(value);
      else if (parameter == "B") run_cfg.train.batch = std::stoi(value);
      else if (parameter == "epsilon") {
        run_cfg.attack.epsilon = std::stod(value);
        run_cfg.attack.epsilon_l2 = run_cfg.attack.epsilon;
        run_cfg.attack.epsilon_linf = run_cfg.attack.epsilon;
      } else {
        run_cfg.train.strategy = strategy_from_string(value);
      }
    } catch (const std::exception& e) {
      throw ConfigError("cmd_sweep: bad value '" + value + "': " + e.what());
    }

    const fs::path sub = fs::path(out_dir) / ("sweep_" + parameter + "_" + sanitize(value));
    csv << parameter << ',' << value << ',';
    try {
      const TrainOutputs outputs = run_train_core(run_cfg, sub, quiet, log);
      const auto& records = outputs.result.records;
      csv << (outputs.result.divergence.has_value() ? "diverged" : "ok");
      if (!records.empty()) {
        csv << ',' << tail_mean(records, field_disagreement) << ',';
        if (records.back().msd.has_value()) csv << tail_mean(records, field_msd);
        csv << ',';
        if (records.back().excess_risk.has_value()) csv << *records.back().excess_risk;
        csv << ',';
        if (records.back().moreau_grad_sq.has_value()) csv << *records.back().moreau_grad_sq;
      } else {
        csv << ",,,,";
      }
      csv << "\n";
    } catch (const std::exception& e) {
      csv << "error: " << e.what() << ",,,,\n";
      if (!quiet) log << "sweep " << parameter << "=" << value << " failed: " << e.what() << "\n";
    }
  }
  write_text(fs::path(out_dir) / "summary.csv", csv.str());
  if (!quiet) log << "sweep: summary -> " << (fs::path(out_dir) / "summary.csv").string() << "\n";
  return kExitOk;
}

}  // namespace robnet
