#include "pe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "pe/gittins.hpp"

namespace pe {

namespace {

using boost::property_tree::ptree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw PreconditionError(where + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw PreconditionError(where + ": expected an integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw PreconditionError(where + ": expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, where));
  if (out.empty()) throw PreconditionError(where + ": empty list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x =
        n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    v[i] = std::round(x * 1e12) / 1e12;
  }
  return v;
}

std::vector<double> default_means(EnvironmentKind kind, std::size_t arms) {
  if (kind == EnvironmentKind::Gaussian) return linspace(0.0, 1.0, arms);
  if (arms == 10) return linspace(0.1, 0.73, 10);
  return linspace(0.3, 0.7, arms);
}

// Reads keys from one INI section, remembering which were defaulted and
// rejecting keys nobody asked for.
class SectionReader {
 public:
  SectionReader(const ptree* node, std::string name, std::vector<std::string>& defaulted)
      : node_(node), name_(std::move(name)), defaulted_(defaulted) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!node_) return std::nullopt;
    const auto it = node_->find(key);
    if (it == node_->not_found()) return std::nullopt;
    return trim(it->second.data());
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  double number(const std::string& key, double def) {
    if (auto v = raw(key)) return parse_double(*v, where(key));
    note(key);
    return def;
  }
  std::int64_t integer(const std::string& key, std::int64_t def) {
    if (auto v = raw(key)) return parse_int(*v, where(key));
    note(key);
    return def;
  }
  std::string text(const std::string& key, const std::string& def) {
    if (auto v = raw(key)) return *v;
    note(key);
    return def;
  }
  std::vector<double> list(const std::string& key, const std::vector<double>& def) {
    if (auto v = raw(key)) return parse_list(*v, where(key));
    note(key);
    return def;
  }

  void reject_unknown() const {
    if (!node_) return;
    for (const auto& [key, child] : *node_) {
      if (!used_.count(key)) {
        throw PreconditionError("unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

 private:
  void note(const std::string& key) { defaulted_.push_back(name_ + "." + key); }

  const ptree* node_;
  std::string name_;
  std::vector<std::string>& defaulted_;
  std::set<std::string> used_;
};

const ptree* find_section(const ptree& pt, const std::string& name) {
  const auto it = pt.find(name);
  return it == pt.not_found() ? nullptr : &it->second;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

PolicyVariant parse_variant(const std::string& name, const ptree& node,
                            EnvironmentKind env, std::vector<std::string>& defaulted) {
  SectionReader r(&node, "variant." + name, defaulted);
  PolicyVariant v;
  v.name = name;
  const auto policy = r.raw("policy");
  if (!policy) throw PreconditionError("[variant." + name + "] needs a policy");
  v.kind = parse_policy_kind(*policy);
  const std::string parameter = r.text("parameter", "tuned");
  if (parameter == "tuned") {
    v.source = ParameterSource::tuned();
  } else if (parameter == "fixed") {
    const auto value = r.raw("value");
    if (!value) throw PreconditionError("[variant." + name + "] fixed parameter needs a value");
    v.source = ParameterSource::fixed(parse_double(*value, r.where("value")));
  } else if (parameter == "formula") {
    const auto f = r.raw("formula");
    if (!f) throw PreconditionError("[variant." + name + "] needs a formula");
    v.source = ParameterSource::from_formula(parse_formula(*f));
  } else {
    throw PreconditionError(r.where("parameter") + ": expected tuned, fixed or formula");
  }
  v.tuning = parse_tuning_variant(r.text("tuning", "confidence-averaged"));
  if (env == EnvironmentKind::Glucose) {
    v.estimator = parse_glucose_estimator(r.text("estimator", "ar2-linear"));
  } else if (r.raw("estimator")) {
    throw PreconditionError(r.where("estimator") + ": estimators apply to glucose only");
  }
  r.reject_unknown();
  return v;
}

}  // namespace

std::string_view to_string(EnvironmentKind k) {
  switch (k) {
    case EnvironmentKind::Bernoulli: return "bernoulli";
    case EnvironmentKind::Gaussian: return "gaussian";
    case EnvironmentKind::Contextual: return "contextual";
    case EnvironmentKind::Glucose: return "glucose";
  }
  return "?";
}

EnvironmentKind parse_environment_kind(std::string_view name) {
  if (name == "bernoulli") return EnvironmentKind::Bernoulli;
  if (name == "gaussian") return EnvironmentKind::Gaussian;
  if (name == "contextual") return EnvironmentKind::Contextual;
  if (name == "glucose") return EnvironmentKind::Glucose;
  throw PreconditionError("unknown environment kind '" + std::string(name) + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw PreconditionError(std::string("config syntax error: ") + e.what());
  }
  for (const auto& [key, child] : pt) {
    const bool known = key == "experiment" || key == "environment" || key == "tuning" ||
                       key == "forest" || key.rfind("variant.", 0) == 0;
    if (!known) throw PreconditionError("unknown config section [" + key + "]");
    if (child.data().size() && child.empty()) {
      throw PreconditionError("top-level key '" + key + "' outside a section");
    }
  }

  ExperimentConfig cfg;
  auto& d = cfg.defaulted;

  SectionReader ex(find_section(pt, "experiment"), "experiment", d);
  cfg.name = ex.text("name", cfg.name);
  cfg.horizon = static_cast<int>(ex.integer("horizon", cfg.horizon));
  cfg.replicates = static_cast<int>(ex.integer("replicates", cfg.replicates));
  if (auto s = ex.raw("seed")) {
    cfg.seed = parse_uint(*s, ex.where("seed"));
  } else {
    d.push_back("experiment.seed");
  }
  cfg.workers = static_cast<int>(ex.integer("workers", cfg.workers));
  cfg.out_dir = ex.text("out_dir", "results/" + cfg.name);
  ex.reject_unknown();

  SectionReader en(find_section(pt, "environment"), "environment", d);
  EnvironmentSpec& env = cfg.environment;
  env.kind = parse_environment_kind(en.text("kind", "bernoulli"));
  switch (env.kind) {
    case EnvironmentKind::Bernoulli:
    case EnvironmentKind::Gaussian: {
      const auto arms = en.integer("arms", 2);
      if (arms < 2) throw PreconditionError("[environment] arms must be >= 2");
      env.means = en.list("means", default_means(env.kind, static_cast<std::size_t>(arms)));
      if (env.kind == EnvironmentKind::Gaussian) env.sigma = en.number("sigma", 1.0);
      break;
    }
    case EnvironmentKind::Contextual:
      env.beta[0] = en.list("beta0", env.beta[0]);
      env.beta[1] = en.list("beta1", env.beta[1]);
      env.context_mean = en.list(
          "context_mean", std::vector<double>(env.beta[0].empty() ? 0 : env.beta[0].size() - 1, 0.0));
      {
        const std::size_t q = env.context_mean.size();
        std::vector<double> eye(q * q, 0.0);
        for (std::size_t i = 0; i < q; ++i) eye[i * q + i] = 1.0;
        env.context_cov = en.list("context_cov", eye);
      }
      env.noise_sd = en.number("noise_sd", env.noise_sd);
      break;
    case EnvironmentKind::Glucose: {
      GlucoseMdp& g = env.glucose;
      const auto beta = en.list("beta", std::vector<double>(g.beta.begin(), g.beta.end()));
      if (beta.size() != kAr2Features) {
        throw PreconditionError("[environment] beta needs 9 coefficients");
      }
      std::copy(beta.begin(), beta.end(), g.beta.begin());
      g.glucose_noise_sd = en.number("glucose_noise_sd", g.glucose_noise_sd);
      g.covariate_sd = en.number("covariate_sd", g.covariate_sd);
      g.covariate_prob = en.number("covariate_prob", g.covariate_prob);
      g.n_patients = static_cast<int>(en.integer("n_patients", g.n_patients));
      break;
    }
  }
  en.reject_unknown();

  const bool mdp = env.kind == EnvironmentKind::Glucose;
  const TuningConfig base = mdp ? TuningConfig::mdp_defaults() : TuningConfig::bandit_defaults();
  SectionReader tu(find_section(pt, "tuning"), "tuning", d);
  TuningConfig& t = cfg.tuning;
  t = base;
  t.n_model_draws = static_cast<int>(tu.integer("n_model_draws", base.n_model_draws));
  t.n_rollouts_per_draw =
      static_cast<int>(tu.integer("n_rollouts_per_draw", base.n_rollouts_per_draw));
  t.retune_interval = static_cast<int>(tu.integer("retune_interval", base.retune_interval));
  t.budget = static_cast<int>(tu.integer("budget", base.budget));
  t.initial_design = static_cast<int>(tu.integer("initial_design", base.initial_design));
  t.candidates = static_cast<int>(tu.integer("candidates", base.candidates));
  t.local_candidates = static_cast<int>(tu.integer("local_candidates", base.local_candidates));
  t.rollout_mode = parse_rollout_mode(tu.text("rollout_mode", "full-horizon"));
  t.rollout_forest.n_trees =
      static_cast<int>(tu.integer("rollout_trees", base.rollout_forest.n_trees));
  t.rollout_forest.min_leaf =
      static_cast<int>(tu.integer("rollout_min_leaf", base.rollout_forest.min_leaf));
  t.rollout_forest.max_depth =
      static_cast<int>(tu.integer("rollout_max_depth", base.rollout_forest.max_depth));
  for (const char* key : {"theta_lower", "theta_upper"}) {
    if (auto v = tu.raw(key)) {
      const auto list = parse_list(*v, tu.where(key));
      if (list.size() != 3) throw PreconditionError(tu.where(key) + ": expected 3 values");
      (std::string(key) == "theta_lower" ? t.lower : t.upper) =
          std::array<double, 3>{list[0], list[1], list[2]};
    }
  }
  tu.reject_unknown();

  SectionReader fo(find_section(pt, "forest"), "forest", d);
  ForestOptions& q = cfg.glucose.q_forest;
  q.n_trees = static_cast<int>(fo.integer("n_trees", q.n_trees));
  q.min_leaf = static_cast<int>(fo.integer("min_leaf", q.min_leaf));
  q.max_depth = static_cast<int>(fo.integer("max_depth", q.max_depth));
  q.max_features = static_cast<int>(fo.integer("max_features", q.max_features));
  cfg.glucose.np.forest = q;
  cfg.glucose.np.cv_folds = static_cast<int>(fo.integer("np_cv_folds", 5));
  cfg.glucose.np.grid_points = static_cast<int>(fo.integer("np_grid_points", 8));
  fo.reject_unknown();

  for (const auto& [key, child] : pt) {
    if (key.rfind("variant.", 0) != 0) continue;
    cfg.variants.push_back(parse_variant(key.substr(8), child, env.kind, d));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

void ExperimentConfig::validate() const {
  if (horizon < 1) throw PreconditionError("horizon must be >= 1");
  if (replicates < 1) throw PreconditionError("replicates must be >= 1");
  if (workers < 1) throw PreconditionError("workers must be >= 1");
  if (variants.empty()) throw PreconditionError("at least one [variant.NAME] is required");

  const EnvironmentSpec& env = environment;
  switch (env.kind) {
    case EnvironmentKind::Bernoulli:
    case EnvironmentKind::Gaussian:
      if (env.means.size() < 2) throw PreconditionError("a bandit needs at least 2 arms");
      for (double m : env.means) {
        if (!(m >= 0.0 && m <= 1.0)) throw PreconditionError("arm means must lie in [0, 1]");
      }
      if (env.kind == EnvironmentKind::Gaussian && !(env.sigma > 0.0)) {
        throw PreconditionError("sigma must be positive");
      }
      break;
    case EnvironmentKind::Contextual: {
      const std::size_t dim = env.beta[0].size();
      if (dim < 2 || env.beta[1].size() != dim) {
        throw PreconditionError("beta0 and beta1 need equal length >= 2");
      }
      if (env.context_mean.size() != dim - 1 ||
          env.context_cov.size() != (dim - 1) * (dim - 1)) {
        throw PreconditionError("context_mean/context_cov must match the beta length minus 1");
      }
      if (!(env.noise_sd > 0.0)) throw PreconditionError("noise_sd must be positive");
      break;
    }
    case EnvironmentKind::Glucose:
      env.glucose.validate();
      break;
  }

  std::set<std::string> names;
  bool any_tuned = false;
  for (const auto& v : variants) {
    if (!valid_name(v.name)) {
      throw PreconditionError("variant name '" + v.name + "' must use [A-Za-z0-9._-]");
    }
    if (!names.insert(v.name).second) {
      throw PreconditionError("duplicate variant name '" + v.name + "'");
    }
    const bool bandit = env.kind == EnvironmentKind::Bernoulli ||
                        env.kind == EnvironmentKind::Gaussian;
    if (v.kind == PolicyKind::Gittins) {
      if (env.kind != EnvironmentKind::Bernoulli) {
        throw PreconditionError("variant '" + v.name + "': gittins needs a Bernoulli bandit");
      }
      if (horizon > kGittinsMaxHorizon) {
        throw PreconditionError("variant '" + v.name + "': gittins supports T <= 64");
      }
      continue;
    }
    if (!bandit && v.kind != PolicyKind::EpsilonGreedy) {
      throw PreconditionError("variant '" + v.name + "': only epsilon-greedy is available for " +
                              std::string(to_string(env.kind)));
    }
    if (v.source.kind == ParameterSource::Kind::Tuned) {
      any_tuned = true;
      continue;
    }
    for (int t = 1; t <= horizon; ++t) {
      const double p = v.source.untuned_value(t);
      const bool ok = v.kind == PolicyKind::Ucb ? (p > 0.0 && p <= 0.5) : (p >= 0.0 && p <= 1.0);
      if (!ok) {
        throw PreconditionError("variant '" + v.name + "': parameter " + format_double(p) +
                                " at t = " + std::to_string(t) + " is outside its range");
      }
    }
  }
  if (any_tuned) {
    tuning.validate();
    tuning_bounds(tuning, horizon);
  }
  if (env.kind == EnvironmentKind::Glucose) {
    if (glucose.q_forest.n_trees < 1 || glucose.q_forest.min_leaf < 1 ||
        glucose.q_forest.max_depth < 0) {
      throw PreconditionError("invalid [forest] options");
    }
  }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

struct PresetVariant {
  const char* name;
  const char* body;
};

std::string render_variants(std::initializer_list<PresetVariant> vs) {
  std::string s;
  for (const auto& v : vs) {
    s += "\n[variant.";
    s += v.name;
    s += "]\n";
    s += v.body;
  }
  return s;
}

std::string mab_variants(bool gittins) {
  std::string s = render_variants({
      {"tuned-eps", "policy = epsilon-greedy\nparameter = tuned\n"},
      {"eps-0.05", "policy = epsilon-greedy\nparameter = fixed\nvalue = 0.05\n"},
      {"eps-0.1", "policy = epsilon-greedy\nparameter = fixed\nvalue = 0.1\n"},
      {"eps-half-inverse-t", "policy = epsilon-greedy\nparameter = formula\nformula = half-inverse-t\n"},
      {"tuned-ts", "policy = thompson\nparameter = tuned\n"},
      {"ts", "policy = thompson\nparameter = fixed\nvalue = 1\n"},
      {"ts-inverse-t", "policy = thompson\nparameter = formula\nformula = inverse-t\n"},
      {"tuned-ucb", "policy = ucb\nparameter = tuned\n"},
      {"ucb-0.05", "policy = ucb\nparameter = fixed\nvalue = 0.05\n"},
      {"ucb-ramp", "policy = ucb\nparameter = formula\nformula = ucb-ramp\n"},
  });
  if (gittins) s += render_variants({{"gittins", "policy = gittins\n"}});
  return s;
}

std::string experiment_header(const std::string& name, int horizon, int replicates) {
  return "[experiment]\nname = " + name + "\nhorizon = " + std::to_string(horizon) +
         "\nreplicates = " + std::to_string(replicates) +
         "\nseed = 20190101\nworkers = 1\nout_dir = results/" + name + "\n";
}

const std::vector<std::string>& preset_list() {
  static const std::vector<std::string> names = {
      "table1-bern2",          "table1-bern5",          "table1-bern10",
      "table2-gauss2-sigma1",  "table2-gauss2-sigma0.1", "table2-gauss5-sigma1",
      "table2-gauss5-sigma0.1", "table2-gauss10-sigma1", "table2-gauss10-sigma0.1",
      "table3-contextual",     "table4-glucose-T25",    "table4-glucose-T50",
  };
  return names;
}

}  // namespace

std::vector<std::string> preset_names() { return preset_list(); }

std::string preset_text(const std::string& name) {
  const auto& names = preset_list();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw PreconditionError("unknown preset '" + name + "'");
  }
  if (name.rfind("table1-bern", 0) == 0) {
    const int arms = std::stoi(name.substr(11));
    return experiment_header(name, 50, 192) +
           "\n[environment]\nkind = bernoulli\nmeans = " +
           join(default_means(EnvironmentKind::Bernoulli, static_cast<std::size_t>(arms))) +
           "\n" + mab_variants(true);
  }
  if (name.rfind("table2-gauss", 0) == 0) {
    const auto dash = name.find("-sigma");
    const int arms = std::stoi(name.substr(12, dash - 12));
    const std::string sigma = name.substr(dash + 6);
    const int replicates = sigma == "1" ? 384 : 192;
    return experiment_header(name, 50, replicates) +
           "\n[environment]\nkind = gaussian\nmeans = " +
           join(default_means(EnvironmentKind::Gaussian, static_cast<std::size_t>(arms))) +
           "\nsigma = " + sigma + "\n" + mab_variants(false);
  }
  if (name == "table3-contextual") {
    return experiment_header(name, 50, 96) +
           "\n[environment]\nkind = contextual\nbeta0 = 0.4, 0.2, -0.2\n"
           "beta1 = 0.2, 0.5, 0.2\ncontext_mean = 0, 0\ncontext_cov = 1, 0, 0, 1\n"
           "noise_sd = 0.5\n" +
           render_variants({
               {"tuned-eps", "policy = epsilon-greedy\nparameter = tuned\n"},
               {"eps-0.05", "policy = epsilon-greedy\nparameter = fixed\nvalue = 0.05\n"},
               {"eps-inverse-t", "policy = epsilon-greedy\nparameter = formula\nformula = inverse-t\n"},
               {"eps-half-inverse-t", "policy = epsilon-greedy\nparameter = formula\nformula = half-inverse-t\n"},
               {"eps-power-0.8", "policy = epsilon-greedy\nparameter = formula\nformula = power-0.8\n"},
           });
  }
  const int horizon = name == "table4-glucose-T25" ? 25 : 50;
  return experiment_header(name, horizon, horizon == 25 ? 96 : 192) +
         "\n[environment]\nkind = glucose\n"
         "beta = 10, 0.9, 0.1, -0.01, 0, 0.1, -0.01, -10, -4\n"
         "glucose_noise_sd = 5\ncovariate_sd = 10\ncovariate_prob = 0.6\nn_patients = 15\n"
         "\n[tuning]\nbudget = 15\nn_model_draws = 5\nn_rollouts_per_draw = 1\n"
         "rollout_trees = 10\nrollout_max_depth = 8\n"
         "\n[forest]\nn_trees = 50\nmin_leaf = 5\n" +
         render_variants({
             {"tuned-ar2-linear", "policy = epsilon-greedy\nparameter = tuned\nestimator = ar2-linear\n"},
             {"tuned-ar1-linear", "policy = epsilon-greedy\nparameter = tuned\nestimator = ar1-linear\n"},
             {"tuned-ar2-np", "policy = epsilon-greedy\nparameter = tuned\nestimator = ar2-np\n"},
             {"eps-0.05", "policy = epsilon-greedy\nparameter = fixed\nvalue = 0.05\n"},
             {"eps-inverse-t", "policy = epsilon-greedy\nparameter = formula\nformula = inverse-t\n"},
             {"eps-half-inverse-t", "policy = epsilon-greedy\nparameter = formula\nformula = half-inverse-t\n"},
             {"eps-power-0.8", "policy = epsilon-greedy\nparameter = formula\nformula = power-0.8\n"},
         });
}

ExperimentConfig preset(const std::string& name) { return parse_config_text(preset_text(name)); }

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("cannot summarize an empty sample");
  Summary s;
  s.n = values.size();
  const double n = static_cast<double>(s.n);
  s.mean = pairwise_sum(values) / n;
  if (s.n == 1) {
    s.se = 0.0;
    s.se_undefined = true;
    return s;
  }
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    sq[i] = (values[i] - s.mean) * (values[i] - s.mean);
  }
  s.se = std::sqrt(pairwise_sum(sq) / (n - 1.0)) / std::sqrt(n);
  return s;
}

std::uint64_t episode_seed(std::uint64_t base, int replicate) {
  return derive_seed(base, {static_cast<std::uint64_t>(replicate)});
}

namespace {

using AnyEnvironment =
    std::variant<BernoulliMab, GaussianMab, LinearContextualBandit, GlucoseMdp>;

AnyEnvironment make_environment(const EnvironmentSpec& spec) {
  switch (spec.kind) {
    case EnvironmentKind::Bernoulli: return BernoulliMab(spec.means);
    case EnvironmentKind::Gaussian: return GaussianMab(spec.means, spec.sigma);
    case EnvironmentKind::Contextual: {
      const auto d = static_cast<Eigen::Index>(spec.beta[0].size());
      const Eigen::Index q = d - 1;
      Eigen::VectorXd mean(q);
      Eigen::MatrixXd cov(q, q);
      for (Eigen::Index i = 0; i < q; ++i) {
        mean(i) = spec.context_mean[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < q; ++j) {
          cov(i, j) = spec.context_cov[static_cast<std::size_t>(i * q + j)];
        }
      }
      std::array<Eigen::VectorXd, 2> beta;
      for (std::size_t a = 0; a < 2; ++a) {
        beta[a] = Eigen::Map<const Eigen::VectorXd>(spec.beta[a].data(), d);
      }
      return LinearContextualBandit(std::move(beta), std::move(mean), std::move(cov),
                                    spec.noise_sd);
    }
    case EnvironmentKind::Glucose: return spec.glucose;
  }
  throw PreconditionError("unknown environment kind");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const AnyEnvironment env = make_environment(cfg.environment);
  const std::size_t n_variants = cfg.variants.size();
  const std::size_t n_rep = static_cast<std::size_t>(cfg.replicates);
  const std::size_t total = n_variants * n_rep;

  std::vector<std::optional<EpisodeRecord>> records(total);
  std::vector<std::optional<std::string>> errors(total);
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;

  const auto worker = [&]() {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) return;
      const PolicyVariant& v = cfg.variants[task / n_rep];
      const int rep = static_cast<int>(task % n_rep);
      const std::uint64_t seed = episode_seed(cfg.seed, rep);
      try {
        EpisodeRecord rec = std::visit(
            [&](const auto& e) -> EpisodeRecord {
              using E = std::decay_t<decltype(e)>;
              if constexpr (std::is_same_v<E, GlucoseMdp>) {
                return run_pe_episode(e, v, cfg.tuning, cfg.glucose, cfg.horizon, seed);
              } else {
                return run_pe_episode(e, v, cfg.tuning, cfg.horizon, seed);
              }
            },
            env);
        rec.replicate = rep;
        records[task] = std::move(rec);
      } catch (const std::exception& e) {
        errors[task] = e.what();
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(v.name, rep, ++done, total);
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), std::max<std::size_t>(total, 1));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  ExperimentResult result;
  for (std::size_t vi = 0; vi < n_variants; ++vi) {
    VariantResult row;
    row.name = cfg.variants[vi].name;
    for (std::size_t r = 0; r < n_rep; ++r) {
      const std::size_t task = vi * n_rep + r;
      if (records[task]) {
        row.values.push_back(records[task]->cumulative);
        row.replicates.push_back(static_cast<int>(r));
        result.episodes.push_back(std::move(*records[task]));
      } else {
        result.failures.push_back({row.name, static_cast<int>(r),
                                   errors[task].value_or("unknown error")});
      }
    }
    if (!row.values.empty()) row.summary = summarize(row.values);
    result.rows.push_back(std::move(row));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

std::string summary_csv(const ExperimentResult& result) {
  std::string s = "variant,n_replicates,mean,se\n";
  for (const auto& row : result.rows) {
    s += row.name + "," + std::to_string(row.values.size()) + ",";
    if (row.summary) s += format_double(row.summary->mean) + "," + format_double(row.summary->se);
    else s += ",";
    s += "\n";
  }
  return s;
}

std::string episodes_csv(const ExperimentResult& result) {
  std::string s =
      "variant,replicate,step,action,reward,eta,theta0,theta1,theta2,"
      "cumulative_regret_or_reward,unit\n";
  for (const auto& ep : result.episodes) {
    for (const auto& st : ep.steps) {
      s += ep.variant;
      s += ',';
      s += std::to_string(ep.replicate);
      s += ',';
      s += std::to_string(st.step);
      s += ',';
      s += std::to_string(st.action);
      s += ',';
      s += format_double(st.reward);
      s += ',';
      s += format_double(st.eta);
      for (std::size_t j = 0; j < 3; ++j) {
        s += ',';
        if (st.theta) s += format_double((*st.theta)[j]);
      }
      s += ',';
      s += format_double(st.cumulative);
      s += ',';
      s += std::to_string(st.unit);
      s += '\n';
    }
  }
  return s;
}

std::string metadata_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
  using nlohmann::ordered_json;
  ordered_json j;
  const auto& env = cfg.environment;
  ordered_json e;
  e["kind"] = std::string(to_string(env.kind));
  switch (env.kind) {
    case EnvironmentKind::Bernoulli:
      e["means"] = env.means;
      break;
    case EnvironmentKind::Gaussian:
      e["means"] = env.means;
      e["sigma"] = env.sigma;
      break;
    case EnvironmentKind::Contextual:
      e["beta0"] = env.beta[0];
      e["beta1"] = env.beta[1];
      e["context_mean"] = env.context_mean;
      e["context_cov"] = env.context_cov;
      e["noise_sd"] = env.noise_sd;
      break;
    case EnvironmentKind::Glucose:
      e["beta"] = std::vector<double>(env.glucose.beta.begin(), env.glucose.beta.end());
      e["glucose_noise_sd"] = env.glucose.glucose_noise_sd;
      e["covariate_sd"] = env.glucose.covariate_sd;
      e["covariate_prob"] = env.glucose.covariate_prob;
      e["n_patients"] = env.glucose.n_patients;
      break;
  }
  ordered_json t;
  const auto& tc = cfg.tuning;
  t["n_model_draws"] = tc.n_model_draws;
  t["n_rollouts_per_draw"] = tc.n_rollouts_per_draw;
  t["retune_interval"] = tc.retune_interval;
  t["budget"] = tc.budget;
  t["initial_design"] = tc.initial_design;
  t["candidates"] = tc.candidates;
  t["local_candidates"] = tc.local_candidates;
  t["rollout_mode"] = std::string(to_string(tc.rollout_mode));
  const auto [lo, hi] = tuning_bounds(tc, cfg.horizon);
  t["theta_lower"] = lo;
  t["theta_upper"] = hi;
  if (env.kind == EnvironmentKind::Glucose) {
    t["rollout_trees"] = tc.rollout_forest.n_trees;
    t["rollout_min_leaf"] = tc.rollout_forest.min_leaf;
    t["rollout_max_depth"] = tc.rollout_forest.max_depth;
  }
  ordered_json variants = ordered_json::array();
  for (const auto& v : cfg.variants) {
    ordered_json vj;
    vj["name"] = v.name;
    vj["policy"] = std::string(to_string(v.kind));
    if (v.kind != PolicyKind::Gittins) {
      switch (v.source.kind) {
        case ParameterSource::Kind::Tuned:
          vj["parameter"] = "tuned";
          vj["tuning"] = std::string(to_string(v.tuning));
          break;
        case ParameterSource::Kind::Fixed:
          vj["parameter"] = "fixed";
          vj["value"] = v.source.value;
          break;
        case ParameterSource::Kind::FromFormula:
          vj["parameter"] = "formula";
          vj["formula"] = std::string(to_string(v.source.formula));
          break;
      }
    }
    if (env.kind == EnvironmentKind::Glucose) {
      vj["estimator"] = std::string(to_string(v.estimator));
    }
    variants.push_back(vj);
  }
  ordered_json c;
  c["name"] = cfg.name;
  c["horizon"] = cfg.horizon;
  c["replicates"] = cfg.replicates;
  c["seed"] = cfg.seed;
  c["environment"] = e;
  c["tuning"] = t;
  if (env.kind == EnvironmentKind::Glucose) {
    c["forest"] = {{"n_trees", cfg.glucose.q_forest.n_trees},
                   {"min_leaf", cfg.glucose.q_forest.min_leaf},
                   {"max_depth", cfg.glucose.q_forest.max_depth},
                   {"max_features", cfg.glucose.q_forest.max_features},
                   {"np_cv_folds", cfg.glucose.np.cv_folds},
                   {"np_grid_points", cfg.glucose.np.grid_points}};
  }
  c["variants"] = variants;
  j["config"] = c;
  j["defaulted"] = cfg.defaulted;
  j["seeding"] = "episode seed = derive(base seed, replicate); shared by all variants";

  ordered_json failures = ordered_json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"variant", f.variant}, {"replicate", f.replicate}, {"message", f.message}});
  }
  j["failure_count"] = result.failures.size();
  j["failures"] = failures;

  ordered_json se_undefined = ordered_json::array();
  for (const auto& row : result.rows) {
    if (row.summary && row.summary->se_undefined) se_undefined.push_back(row.name);
  }
  j["se_undefined"] = se_undefined;

  ordered_json fallbacks = ordered_json::array();
  ordered_json pseudo = ordered_json::object();
  for (const auto& ep : result.episodes) {
    if (!ep.estimator_fallback_steps.empty()) {
      fallbacks.push_back({{"variant", ep.variant},
                           {"replicate", ep.replicate},
                           {"steps", ep.estimator_fallback_steps}});
    }
    if (!std::isnan(ep.pseudo_regret)) pseudo[ep.variant].push_back(ep.pseudo_regret);
  }
  j["estimator_fallbacks"] = fallbacks;
  if (!pseudo.empty()) j["pseudo_regret"] = pseudo;
  return j.dump(2) + "\n";
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("summary.csv", summary_csv(result));
  write("episodes.csv", episodes_csv(result));
  write("metadata.json", metadata_json(cfg, result));
}

std::vector<SummaryRow> summarize_episode_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw PreconditionError("empty episode log");
  std::vector<std::string> header;
  {
    std::stringstream ss(trim(line));
    std::string col;
    while (std::getline(ss, col, ',')) header.push_back(col);
  }
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw PreconditionError("episode log lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_var = column("variant");
  const std::size_t c_rep = column("replicate");
  const std::size_t c_step = column("step");
  const std::size_t c_cum = column("cumulative_regret_or_reward");

  struct Last {
    std::int64_t step;
    double value;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::int64_t>> rep_order;
  std::map<std::pair<std::string, std::int64_t>, Last> last;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(trim(line));
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && trim(line).back() == ',') cells.emplace_back();
    if (cells.size() != header.size()) {
      throw PreconditionError("episode log line " + std::to_string(line_no) +
                              " has the wrong number of fields");
    }
    const std::string where = "episode log line " + std::to_string(line_no);
    const std::string& v = cells[c_var];
    const std::int64_t rep = parse_int(cells[c_rep], where);
    const std::int64_t step = parse_int(cells[c_step], where);
    const double value = parse_double(cells[c_cum], where);
    if (!rep_order.count(v)) order.push_back(v);
    auto& reps = rep_order[v];
    const auto key = std::make_pair(v, rep);
    const auto it = last.find(key);
    if (it == last.end()) {
      reps.push_back(rep);
      last.emplace(key, Last{step, value});
    } else if (step >= it->second.step) {
      it->second = {step, value};
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& v : order) {
    std::vector<double> values;
    for (std::int64_t rep : rep_order[v]) values.push_back(last.at({v, rep}).value);
    rows.push_back({v, summarize(values)});
  }
  return rows;
}

std::string summary_rows_csv(const std::vector<SummaryRow>& rows) {
  std::string s = "variant,n_replicates,mean,se\n";
  for (const auto& r : rows) {
    s += r.variant + "," + std::to_string(r.summary.n) + "," + format_double(r.summary.mean) +
         "," + format_double(r.summary.se) + "\n";
  }
  return s;
}

}  // namespace pe
