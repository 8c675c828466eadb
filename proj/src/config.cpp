#include "ofdmsense/config.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario",
       {"l_d", "l_c", "nodes", "sigma_w2", "sigma_s2", "snr_db", "design_sigma_w2",
        "design_sigma_s2"}},
      {"impairments",
       {"timing_offset", "freq_offset", "iq_epsilon", "iq_phase_deg", "noise_uncertainty",
        "noise_draw"}},
      {"change", {"rho", "horizon", "min_pre_change", "post_change_cap"}},
      {"detector",
       {"algorithm", "glr_window", "m_star", "theta1_form", "mglr_score", "mglr_reverse"}},
      {"fusion", {"b", "i_design", "gamma", "beta", "sigma_m2"}},
      {"run", {"trials", "calib_trials", "seed", "target_pfa", "threads"}},
  };
  return keys;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& path, T fallback) {
  const auto node = tree.get_child_optional(path);
  if (!node) return fallback;
  try {
    return node->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw ParameterError("config: bad value for " + path + ": '" + node->data() + "'");
  }
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const auto v = lower(text);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ParameterError("config: " + key + " expects a boolean, got '" + text + "'");
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::string s = text;
  for (auto& c : s) {
    if (c == ',' || c == ';') c = ' ';
  }
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ParameterError("not a number: '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError("empty number list");
  return out;
}

NoiseDraw parse_noise_draw(const std::string& id) {
  const auto v = lower(id);
  if (v == "log-uniform") return NoiseDraw::kLogUniform;
  if (v == "nominal") return NoiseDraw::kNominal;
  if (v == "worst-case") return NoiseDraw::kWorstCase;
  throw ParameterError("unknown noise_draw '" + id + "' (log-uniform, nominal, worst-case)");
}

void ExperimentConfig::validate() const {
  experiment.validate();
  if (trials < 1) throw ParameterError("config: trials must be >= 1");
  for (double p : target_pfa) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("config: target_pfa must lie in (0, 1)");
  }
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ParameterError("config: unknown section [" + section + "]");
    for (const auto& kv : body) {
      if (!it->second.count(kv.first)) {
        throw ParameterError("config: unknown key '" + kv.first + "' in [" + section + "]");
      }
    }
  }

  ExperimentConfig cfg;
  auto& e = cfg.experiment;
  e.params.l_d = get<std::size_t>(tree, "scenario.l_d", e.params.l_d);
  e.params.l_c = get<std::size_t>(tree, "scenario.l_c", e.params.l_c);
  const auto n_nodes = get<std::size_t>(tree, "scenario.nodes", 5);
  NodeScenario node{20.0, 2.0};
  node.sigma_w2 = get<double>(tree, "scenario.sigma_w2", node.sigma_w2);
  if (tree.get_child_optional("scenario.snr_db")) {
    if (tree.get_child_optional("scenario.sigma_s2")) {
      throw ParameterError("config: give either sigma_s2 or snr_db, not both");
    }
    node = NodeScenario::from_snr_db(node.sigma_w2, get<double>(tree, "scenario.snr_db", 0.0));
  } else {
    node.sigma_s2 = get<double>(tree, "scenario.sigma_s2", node.sigma_s2);
  }
  e.nodes.assign(n_nodes, node);
  e.design.sigma_w2 = get<double>(tree, "scenario.design_sigma_w2", node.sigma_w2);
  e.design.sigma_s2 = get<double>(tree, "scenario.design_sigma_s2", node.sigma_s2);

  auto& imp = e.impairments;
  imp.timing_offset = get<std::size_t>(tree, "impairments.timing_offset", 0);
  imp.freq_offset = get<double>(tree, "impairments.freq_offset", 0.0);
  imp.iq_epsilon = get<double>(tree, "impairments.iq_epsilon", 0.0);
  imp.iq_phase = get<double>(tree, "impairments.iq_phase_deg", 0.0) * kPi / 180.0;
  imp.noise_uncertainty = get<double>(tree, "impairments.noise_uncertainty", 1.0);
  imp.noise_draw = parse_noise_draw(get<std::string>(tree, "impairments.noise_draw", "nominal"));

  e.change.rho = get<double>(tree, "change.rho", e.change.rho);
  e.change.horizon = get<std::size_t>(tree, "change.horizon", e.change.horizon);
  e.change.min_pre_change = get<std::size_t>(tree, "change.min_pre_change", 0);
  e.post_change_cap = get<std::size_t>(tree, "change.post_change_cap", 300);

  auto& d = e.detector;
  d.algorithm = parse_algorithm(get<std::string>(tree, "detector.algorithm", "energy.cusum"));
  d.glr_window = get<std::size_t>(tree, "detector.glr_window", d.glr_window);
  d.m_star = get<std::size_t>(tree, "detector.m_star", d.m_star);
  const auto form = lower(get<std::string>(tree, "detector.theta1_form", "printed"));
  if (form == "printed") {
    d.theta1_form = Theta1Form::kPrinted;
  } else if (form == "exact") {
    d.theta1_form = Theta1Form::kExact;
  } else {
    throw ParameterError("config: theta1_form must be printed or exact");
  }
  const auto score = lower(get<std::string>(tree, "detector.mglr_score", "likelihood"));
  if (score == "likelihood") {
    d.mglr_score = MglrScore::kLikelihood;
  } else if (score == "printed") {
    d.mglr_score = MglrScore::kPrinted;
  } else {
    throw ParameterError("config: mglr_score must be likelihood or printed");
  }
  d.mglr_reverse =
      parse_bool(get<std::string>(tree, "detector.mglr_reverse", "false"), "mglr_reverse");

  auto& f = e.fusion;
  f.n_nodes = n_nodes;
  f.b = get<double>(tree, "fusion.b", f.b);
  f.i_design = get<double>(tree, "fusion.i_design", f.i_design);
  f.gamma = get<double>(tree, "fusion.gamma", f.gamma);
  f.beta = get<double>(tree, "fusion.beta", f.beta);
  f.sigma_m2 = get<double>(tree, "fusion.sigma_m2", f.sigma_m2);

  cfg.trials = get<std::size_t>(tree, "run.trials", cfg.trials);
  cfg.calib_trials = get<std::size_t>(tree, "run.calib_trials", cfg.calib_trials);
  cfg.seed = get<std::uint64_t>(tree, "run.seed", cfg.seed);
  cfg.threads = get<std::size_t>(tree, "run.threads", cfg.threads);
  if (tree.get_child_optional("run.target_pfa")) {
    cfg.target_pfa = parse_number_list(tree.get<std::string>("run.target_pfa"));
  }
  if (d.algorithm == SequentialAlgorithm::kEnergyMglr && e.change.min_pre_change < d.m_star) {
    e.change.min_pre_change = d.m_star;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open " + path);
  return parse_experiment_config(in);
}

}  // namespace ofdmsense
