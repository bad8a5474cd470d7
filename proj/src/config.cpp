#include "robnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace robnet {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"graph", {"agents", "threshold", "seed", "path"}},
      {"model", {"kind", "rho", "tau", "hidden", "classes"}},
      {"train",
       {"strategy", "mu", "batch", "iterations", "seed", "record_every", "threads",
        "divergence_threshold", "init", "init_scale", "decay_points", "decay_factor"}},
      {"attack",
       {"pattern", "norm", "epsilon", "generator", "pgd_steps", "pgd_step_size",
        "pgd_random_init", "epsilon_l2", "epsilon_linf"}},
      {"data",
       {"mode", "dim", "heterogeneity", "margin", "seed", "path", "label", "normalize",
        "partition"}},
      {"eval",
       {"attacks", "norm", "eps_grid", "test_size", "seed", "pgd_steps",
        "track_adv_error", "track_moreau", "track_noise_var", "noise_trials",
        "noise_batch", "smoothness", "inner_steps", "inner_tol", "reference"}},
      {"output", {"dir", "svg"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(what + ": not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (double v : parse_double_list(s, what)) out.push_back(static_cast<int>(v));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

IniFile IniFile::parse(const std::string& text) {
  IniFile ini;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (schema().find(section) == schema().end())
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section [" +
                          section + "]");
      ini.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (schema().at(section).find(key) == schema().at(section).end())
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                        "' in section [" + section + "]");
    ini.sections_[section][key] = value;
  }
  return ini;
}

IniFile IniFile::load(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("config file not found: " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse(buffer.str());
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.find(key) != s->second.end();
}

std::string IniFile::get(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": not a number: '" + v + "'");
  }
}

long IniFile::get_long(const std::string& section, const std::string& key,
                       long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    return std::stol(v);
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": not an integer: '" + v + "'");
  }
}

bool IniFile::get_bool(const std::string& section, const std::string& key,
                       bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("[" + section + "] " + key + ": not a boolean: '" + v + "'");
}

namespace {

AttackPattern pattern_from_string(const std::string& name) {
  if (name == "homogeneous") return AttackPattern::homogeneous;
  if (name == "clean_adv") return AttackPattern::clean_adv;
  if (name == "l2_linf") return AttackPattern::l2_linf;
  throw ConfigError("unknown attack pattern: " + name);
}

std::string to_string(AttackPattern p) {
  switch (p) {
    case AttackPattern::homogeneous: return "homogeneous";
    case AttackPattern::clean_adv: return "clean_adv";
    case AttackPattern::l2_linf: return "l2_linf";
  }
  return "?";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_ini(const IniFile& ini) {
  ExperimentConfig cfg;
  try {
    cfg.graph.agents = static_cast<int>(ini.get_long("graph", "agents", cfg.graph.agents));
    cfg.graph.threshold = ini.get_double("graph", "threshold", cfg.graph.threshold);
    cfg.graph.seed = static_cast<std::uint64_t>(ini.get_long("graph", "seed", 0));
    cfg.graph.path = ini.get("graph", "path", "");

    cfg.model.kind = loss_kind_from_string(ini.get("model", "kind", "logistic"));
    cfg.model.rho = ini.get_double("model", "rho", 0.0);
    cfg.model.tau = ini.get_double("model", "tau", 1.0);
    if (ini.has("model", "hidden"))
      cfg.model.hidden = parse_int_list(ini.get("model", "hidden", ""), "[model] hidden");
    cfg.model.classes = static_cast<int>(ini.get_long("model", "classes", 2));

    cfg.train.strategy = strategy_from_string(ini.get("train", "strategy", "diffusion"));
    cfg.train.mu = ini.get_double("train", "mu", cfg.train.mu);
    cfg.train.batch = static_cast<int>(ini.get_long("train", "batch", 1));
    cfg.train.iterations = ini.get_long("train", "iterations", 0);
    cfg.train.seed = static_cast<std::uint64_t>(ini.get_long("train", "seed", 1));
    cfg.train.record_every = ini.get_long("train", "record_every", 100);
    cfg.train.threads = static_cast<int>(ini.get_long("train", "threads", 1));
    cfg.train.divergence_threshold =
        ini.get_double("train", "divergence_threshold", 1e8);
    cfg.train.init = ini.get("train", "init", "auto");
    cfg.train.init_scale = ini.get_double("train", "init_scale", 0.1);
    if (ini.has("train", "decay_points"))
      cfg.train.decay_points =
          parse_double_list(ini.get("train", "decay_points", ""), "[train] decay_points");
    cfg.train.decay_factor = ini.get_double("train", "decay_factor", 10.0);

    cfg.attack.pattern = pattern_from_string(ini.get("attack", "pattern", "homogeneous"));
    cfg.attack.norm = norm_from_string(ini.get("attack", "norm", "l2"));
    cfg.attack.epsilon = ini.get_double("attack", "epsilon", 0.0);
    cfg.attack.generator = attack_from_string(ini.get("attack", "generator", "closed_form"));
    cfg.attack.pgd_steps = static_cast<int>(ini.get_long("attack", "pgd_steps", 10));
    cfg.attack.pgd_step_size = ini.get_double("attack", "pgd_step_size", 0.0);
    cfg.attack.pgd_random_init = ini.get_bool("attack", "pgd_random_init", false);
    cfg.attack.epsilon_l2 = ini.get_double("attack", "epsilon_l2", cfg.attack.epsilon);
    cfg.attack.epsilon_linf = ini.get_double("attack", "epsilon_linf", cfg.attack.epsilon);

    cfg.data.mode = ini.get("data", "mode", "synthetic");
    cfg.data.dim = static_cast<int>(ini.get_long("data", "dim", 2));
    cfg.data.heterogeneity = ini.get_double("data", "heterogeneity", 0.0);
    cfg.data.margin = ini.get_double("data", "margin", 2.0);
    cfg.data.seed = static_cast<std::uint64_t>(ini.get_long("data", "seed", 7));
    cfg.data.path = ini.get("data", "path", "");
    cfg.data.label = ini.get("data", "label", "label");
    cfg.data.normalize = ini.get_bool("data", "normalize", false);
    cfg.data.partition =
        partition_policy_from_string(ini.get("data", "partition", "contiguous"));

    if (ini.has("eval", "attacks")) {
      cfg.eval.attacks.clear();
      for (const auto& name : split_list(ini.get("eval", "attacks", "")))
        cfg.eval.attacks.push_back(attack_from_string(name));
    }
    cfg.eval.norm = norm_from_string(ini.get("eval", "norm", "l2"));
    if (ini.has("eval", "eps_grid"))
      cfg.eval.eps_grid = parse_double_list(ini.get("eval", "eps_grid", ""), "[eval] eps_grid");
    cfg.eval.test_size = static_cast<int>(ini.get_long("eval", "test_size", 2000));
    cfg.eval.seed = static_cast<std::uint64_t>(ini.get_long("eval", "seed", 99));
    cfg.eval.pgd_steps = static_cast<int>(ini.get_long("eval", "pgd_steps", 20));
    cfg.eval.track_adv_error = ini.get_bool("eval", "track_adv_error", false);
    cfg.eval.track_moreau = ini.get_bool("eval", "track_moreau", false);
    cfg.eval.track_noise_var = ini.get_bool("eval", "track_noise_var", false);
    cfg.eval.noise_trials = static_cast<int>(ini.get_long("eval", "noise_trials", 100));
    cfg.eval.noise_batch = static_cast<int>(ini.get_long("eval", "noise_batch", 1));
    cfg.eval.smoothness = ini.get_double("eval", "smoothness", 0.0);
    cfg.eval.inner_steps = static_cast<int>(ini.get_long("eval", "inner_steps", 500));
    cfg.eval.inner_tol = ini.get_double("eval", "inner_tol", 1e-8);
    cfg.eval.reference = ini.get("eval", "reference", "auto");

    cfg.output.dir = ini.get("output", "dir", "out");
    cfg.output.svg = ini.get_bool("output", "svg", true);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  // Range checks before any computation.
  if (cfg.graph.agents < 1) throw ConfigError("[graph] agents must be >= 1");
  if (!(cfg.graph.threshold > 0.0)) throw ConfigError("[graph] threshold must be > 0");
  if (cfg.model.rho < 0.0) throw ConfigError("[model] rho must be >= 0");
  if (!(cfg.model.tau > 0.0)) throw ConfigError("[model] tau must be > 0");
  if (!(cfg.train.mu > 0.0)) throw ConfigError("[train] mu must be > 0");
  if (cfg.train.batch < 1) throw ConfigError("[train] batch must be >= 1");
  if (cfg.train.iterations < 0) throw ConfigError("[train] iterations must be >= 0");
  if (cfg.train.threads < 1) throw ConfigError("[train] threads must be >= 1");
  if (cfg.train.init != "auto" && cfg.train.init != "zero" && cfg.train.init != "gaussian")
    throw ConfigError("[train] init must be auto|zero|gaussian");
  if (cfg.attack.epsilon < 0.0) throw ConfigError("[attack] epsilon must be >= 0");
  if (cfg.data.mode != "synthetic" && cfg.data.mode != "csv")
    throw ConfigError("[data] mode must be synthetic|csv");
  if (cfg.data.mode == "synthetic" && cfg.data.dim < 1)
    throw ConfigError("[data] dim must be >= 1");
  if (cfg.data.mode == "csv" && cfg.data.path.empty())
    throw ConfigError("[data] csv mode needs a path");
  if (cfg.data.heterogeneity < 0.0) throw ConfigError("[data] heterogeneity must be >= 0");
  if (cfg.eval.test_size < 1) throw ConfigError("[eval] test_size must be >= 1");
  if (cfg.eval.reference != "auto" && cfg.eval.reference != "none")
    throw ConfigError("[eval] reference must be auto|none");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_ini(IniFile::load(path));
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream os;
  os.precision(17);
  os << "[graph]\n";
  os << "agents = " << graph.agents << "\n";
  os << "threshold = " << graph.threshold << "\n";
  os << "seed = " << graph.seed << "\n";
  if (!graph.path.empty()) os << "path = " << graph.path << "\n";

  os << "\n[model]\n";
  os << "kind = " << to_string(model.kind) << "\n";
  os << "rho = " << model.rho << "\n";
  os << "tau = " << model.tau << "\n";
  os << "hidden = " << join_ints(model.hidden) << "\n";
  os << "classes = " << model.classes << "\n";

  os << "\n[train]\n";
  os << "strategy = " << to_string(train.strategy) << "\n";
  os << "mu = " << train.mu << "\n";
  os << "batch = " << train.batch << "\n";
  os << "iterations = " << train.iterations << "\n";
  os << "seed = " << train.seed << "\n";
  os << "record_every = " << train.record_every << "\n";
  os << "threads = " << train.threads << "\n";
  os << "divergence_threshold = " << train.divergence_threshold << "\n";
  os << "init = " << train.init << "\n";
  os << "init_scale = " << train.init_scale << "\n";
  if (!train.decay_points.empty())
    os << "decay_points = " << join_doubles(train.decay_points) << "\n";
  os << "decay_factor = " << train.decay_factor << "\n";

  os << "\n[attack]\n";
  os << "pattern = " << to_string(attack.pattern) << "\n";
  os << "norm = " << to_string(attack.norm) << "\n";
  os << "epsilon = " << attack.epsilon << "\n";
  os << "generator = " << to_string(attack.generator) << "\n";
  os << "pgd_steps = " << attack.pgd_steps << "\n";
  os << "pgd_step_size = " << attack.pgd_step_size << "\n";
  os << "pgd_random_init = " << (attack.pgd_random_init ? "true" : "false") << "\n";
  os << "epsilon_l2 = " << attack.epsilon_l2 << "\n";
  os << "epsilon_linf = " << attack.epsilon_linf << "\n";

  os << "\n[data]\n";
  os << "mode = " << data.mode << "\n";
  os << "dim = " << data.dim << "\n";
  os << "heterogeneity = " << data.heterogeneity << "\n";
  os << "margin = " << data.margin << "\n";
  os << "seed = " << data.seed << "\n";
  if (!data.path.empty()) os << "path = " << data.path << "\n";
  os << "label = " << data.label << "\n";
  os << "normalize = " << (data.normalize ? "true" : "false") << "\n";
  os << "partition = "
     << (data.partition == PartitionPolicy::contiguous ? "contiguous" : "shuffled") << "\n";

  os << "\n[eval]\n";
  os << "attacks = ";
  for (std::size_t i = 0; i < eval.attacks.size(); ++i)
    os << (i ? "," : "") << to_string(eval.attacks[i]);
  os << "\n";
  os << "norm = " << to_string(eval.norm) << "\n";
  os << "eps_grid = " << join_doubles(eval.eps_grid) << "\n";
  os << "test_size = " << eval.test_size << "\n";
  os << "seed = " << eval.seed << "\n";
  os << "pgd_steps = " << eval.pgd_steps << "\n";
  os << "track_adv_error = " << (eval.track_adv_error ? "true" : "false") << "\n";
  os << "track_moreau = " << (eval.track_moreau ? "true" : "false") << "\n";
  os << "track_noise_var = " << (eval.track_noise_var ? "true" : "false") << "\n";
  os << "noise_trials = " << eval.noise_trials << "\n";
  os << "noise_batch = " << eval.noise_batch << "\n";
  os << "smoothness = " << eval.smoothness << "\n";
  os << "inner_steps = " << eval.inner_steps << "\n";
  os << "inner_tol = " << eval.inner_tol << "\n";
  os << "reference = " << eval.reference << "\n";

  os << "\n[output]\n";
  os << "dir = " << output.dir << "\n";
  os << "svg = " << (output.svg ? "true" : "false") << "\n";
  return os.str();
}

std::vector<PerturbationSpec> ExperimentConfig::agent_specs(int agents,
                                                            const LossModel& m) const {
  PerturbationSpec base;
  base.norm = attack.norm;
  base.epsilon = attack.epsilon;
  base.generator = attack.generator;
  base.pgd_steps = attack.pgd_steps;
  base.pgd_step_size = attack.pgd_step_size;
  base.pgd_random_init = attack.pgd_random_init;

  std::vector<PerturbationSpec> specs;
  switch (attack.pattern) {
    case AttackPattern::homogeneous:
      specs.assign(static_cast<std::size_t>(agents), base);
      break;
    case AttackPattern::clean_adv: {
      // First half clean, second half the configured attack.
      PerturbationSpec clean = PerturbationSpec::clean();
      for (int k = 0; k < agents; ++k)
        specs.push_back(k < agents / 2 ? clean : base);
      break;
    }
    case AttackPattern::l2_linf: {
      for (int k = 0; k < agents; ++k) {
        PerturbationSpec s = base;
        if (k < agents / 2) {
          s.norm = NormKind::l2;
          s.epsilon = attack.epsilon_l2;
          if (s.generator == AttackKind::fgsm || s.generator == AttackKind::fgm)
            s.generator = AttackKind::fgm;
        } else {
          s.norm = NormKind::linf;
          s.epsilon = attack.epsilon_linf;
          if (s.generator == AttackKind::fgsm || s.generator == AttackKind::fgm)
            s.generator = AttackKind::fgsm;
        }
        specs.push_back(s);
      }
      break;
    }
  }
  for (const auto& s : specs) {
    try {
      s.validate(m);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("[attack] ") + e.what());
    }
  }
  return specs;
}

TrainConfig ExperimentConfig::train_config(int agents, const LossModel& m) const {
  TrainConfig tc;
  tc.strategy = train.strategy;
  tc.mu = train.mu;
  tc.batch_size = train.batch;
  tc.iterations = train.iterations;
  tc.specs = agent_specs(agents, m);
  tc.seed = train.seed;
  tc.divergence_threshold = train.divergence_threshold;
  tc.record_every = train.record_every;
  tc.threads = train.threads;
  tc.decay_points = train.decay_points;
  tc.decay_factor = train.decay_factor;
  // Zero init is a stationary saddle for tanh networks, so mlp defaults to
  // the shared Gaussian init.
  const bool gaussian = train.init == "gaussian" ||
                        (train.init == "auto" && m.kind() == LossKind::mlp);
  tc.init = gaussian ? TrainConfig::Init::gaussian : TrainConfig::Init::zero;
  tc.init_scale = train.init_scale;
  return tc;
}

}  // namespace robnet
