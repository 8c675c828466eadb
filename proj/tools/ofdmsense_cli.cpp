// Command-line front end: table reproduction, snapshot ROC points, sequential runs,
// fusion threshold calibration and per-slot traces. All output is CSV.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ofdmsense/calibration.hpp"
#include "ofdmsense/config.hpp"
#include "ofdmsense/errors.hpp"
#include "ofdmsense/tables.hpp"

using namespace ofdmsense;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

// Exit codes.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kInfeasible = 3;

std::uint64_t env_seed() {
  const char* s = std::getenv("OFDMSENSE_SEED");
  if (!s || !*s) return kDefaultSeed;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ParameterError(std::string("OFDMSENSE_SEED is not an unsigned integer: ") + s);
  }
}

// Writes to --out when given, stdout otherwise.
class Output {
public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ParameterError("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
  std::unique_ptr<std::ofstream> file_;
};

struct TableArgs {
  int id = 1;
  std::size_t trials = 10000;
  std::size_t calib_trials = 100000;
  std::size_t null_trials = 0;
  std::size_t seq_trials = 2000;
  std::size_t seq_calib_trials = 2000;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out;
};

int run_table(const TableArgs& a) {
  TableOptions opts;
  opts.trials = a.trials;
  opts.calib_trials = a.calib_trials;
  opts.null_trials = a.null_trials;
  opts.seq_trials = a.seq_trials;
  opts.seq_calib_trials = a.seq_calib_trials;
  opts.seed = a.seed.value_or(env_seed());
  opts.threads = a.threads;
  const auto cells = reproduce_table(a.id, opts);
  Output out(a.out);
  write_csv_header(out.stream());
  write_csv(out.stream(), cells);
  for (const auto& c : cells) {
    if (c.note.rfind("infeasible", 0) == 0) return kInfeasible;
  }
  return kOk;
}

struct RocArgs {
  std::string detector = "cp.aligned";
  std::string pfa_list = "0.1,0.05,0.025,0.01";
  std::size_t m = 100;
  double sigma_w2 = 20.0;
  double snr_db = -10.0;
  std::size_t timing_offset = 0;
  double freq_offset = 0.0;
  double iq_epsilon = 0.0;
  double iq_phase_deg = 0.0;
  double noise_uncertainty = 1.0;
  bool compensate_iq = false;
  bool estimate_noise = false;
  bool estimate_offsets = false;
  std::string threshold = "auto";
  std::size_t trials = 10000;
  std::size_t calib_trials = 100000;
  std::size_t null_trials = 0;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out;
};

int run_roc(const RocArgs& a) {
  SnapshotColumn col;
  col.label = a.detector;
  col.cfg.detector = parse_snapshot_detector(a.detector);
  col.cfg.m = a.m;
  col.cfg.compensate_iq = a.compensate_iq;
  col.cfg.estimate_noise = a.estimate_noise;
  col.cfg.estimate_offsets = a.estimate_offsets;
  col.scen = NodeScenario::from_snr_db(a.sigma_w2, a.snr_db);
  col.imp.timing_offset = a.timing_offset;
  col.imp.freq_offset = a.freq_offset;
  col.imp.iq_epsilon = a.iq_epsilon;
  col.imp.iq_phase = a.iq_phase_deg * kPi / 180.0;
  col.imp.noise_uncertainty = a.noise_uncertainty;
  col.imp.noise_draw = NoiseDraw::kNominal;
  col.iq_known = col.imp.has_iq() && !a.compensate_iq;
  const OfdmParams params;
  const ImpairmentSpec known = col.iq_known ? col.imp : ImpairmentSpec{};
  const bool has_model =
      analytic_null_model(col.cfg, params, col.scen.sigma_w2 * a.noise_uncertainty, known)
          .has_value();
  if (a.threshold == "analytic") {
    if (!has_model) throw ParameterError("no closed-form null model for this configuration");
    col.rule = ThresholdRule::kAnalytic;
  } else if (a.threshold == "mc") {
    col.rule = ThresholdRule::kMonteCarlo;
  } else if (a.threshold == "auto") {
    col.rule = has_model ? ThresholdRule::kAnalytic : ThresholdRule::kMonteCarlo;
  } else {
    throw ParameterError("--threshold must be analytic, mc or auto");
  }
  const auto rows = parse_number_list(a.pfa_list);
  TableOptions opts;
  opts.trials = a.trials;
  opts.calib_trials = a.calib_trials;
  opts.null_trials = a.null_trials;
  opts.seed = a.seed.value_or(env_seed());
  opts.threads = a.threads;
  const auto res = evaluate_snapshot_column(col, params, rows, opts);
  std::vector<TableCell> cells;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::ostringstream row;
    row << "p_fa=" << rows[r];
    const std::string rule = col.rule == ThresholdRule::kAnalytic ? "analytic" : "monte-carlo";
    cells.push_back({0, row.str(), a.detector, "p_d", nan, res.p_d[r].value, res.p_d[r].lo,
                     res.p_d[r].hi, res.n_h1, opts.seed, rule + " threshold"});
    cells.push_back({0, row.str(), a.detector, "threshold", nan, res.thresholds[r],
                     res.thresholds[r], res.thresholds[r], 0, opts.seed, rule});
    if (!res.p_fa.empty()) {
      cells.push_back({0, row.str(), a.detector, "p_fa", rows[r], res.p_fa[r].value,
                       res.p_fa[r].lo, res.p_fa[r].hi, res.n_h0, opts.seed, ""});
    }
  }
  Output out(a.out);
  write_csv_header(out.stream());
  write_csv(out.stream(), cells);
  return kOk;
}

struct ConfigArgs {
  std::string config;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> calib_trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> target_pfa;
  std::size_t trial = 0;
  std::string out;
};

ExperimentConfig load(const ConfigArgs& a) {
  auto cfg = load_experiment_config(a.config);
  if (a.trials) cfg.trials = *a.trials;
  if (a.calib_trials) cfg.calib_trials = *a.calib_trials;
  if (a.seed) cfg.seed = *a.seed;
  if (a.target_pfa) cfg.target_pfa = {*a.target_pfa};
  cfg.validate();
  return cfg;
}

std::string fusion_note(const FusionParams& f) {
  std::ostringstream os;
  os << "gamma=" << f.gamma << " beta=" << f.beta << " b=" << f.b << " I=" << f.i_design
     << " sigma_m2=" << f.sigma_m2;
  return os.str();
}

int run_sequential(const ConfigArgs& a) {
  const auto cfg = load(a);
  const auto& e = cfg.experiment;
  const auto calib = record_trials(e, cfg.calib_trials, derive_seed(cfg.seed, 2), cfg.threads);
  const auto fits =
      calibrate_fusion_thresholds(calib, e.fusion, cfg.target_pfa, default_gamma_grid(calib));
  const auto val = record_trials(e, cfg.trials, derive_seed(cfg.seed, 1), cfg.threads);
  std::vector<TableCell> cells;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::string column(algorithm_id(e.detector.algorithm));
  int code = kOk;
  for (const auto& fit : fits) {
    std::ostringstream row;
    row << "P_FA=" << fit.target;
    if (!fit.feasible) {
      cells.push_back({0, row.str(), column, "edd", nan, nan, nan, nan, 0, cfg.seed,
                       "infeasible: " + fit.note});
      code = kInfeasible;
      continue;
    }
    const auto m = estimate_metrics(evaluate_all(val, fit.fusion));
    cells.push_back({0, row.str(), column, "edd", nan, m.edd.value, m.edd.lo, m.edd.hi,
                     m.n_trials, cfg.seed, fusion_note(fit.fusion)});
    cells.push_back({0, row.str(), column, "P_FA", fit.target, m.p_fa.value, m.p_fa.lo, m.p_fa.hi,
                     m.n_trials, cfg.seed, "validation runs"});
    cells.push_back({0, row.str(), column, "censored", nan, static_cast<double>(m.n_censored),
                     nan, nan, m.n_trials, cfg.seed, ""});
  }
  Output out(a.out);
  write_csv_header(out.stream());
  write_csv(out.stream(), cells);
  return code;
}

int run_calibrate(const ConfigArgs& a) {
  const auto cfg = load(a);
  const auto& e = cfg.experiment;
  const auto calib = record_trials(e, cfg.calib_trials, derive_seed(cfg.seed, 2), cfg.threads);
  const auto fits =
      calibrate_fusion_thresholds(calib, e.fusion, cfg.target_pfa, default_gamma_grid(calib));
  Output out(a.out);
  auto& os = out.stream();
  os << "target_pfa,feasible,gamma,beta,b,i_design,sigma_m2,p_fa_in_sample,edd_in_sample,"
        "n_trials,seed\n";
  int code = kOk;
  for (const auto& fit : fits) {
    os << fit.target << ',' << (fit.feasible ? 1 : 0) << ',' << fit.fusion.gamma << ','
       << fit.fusion.beta << ',' << fit.fusion.b << ',' << fit.fusion.i_design << ','
       << fit.fusion.sigma_m2 << ',' << fit.in_sample.p_fa.value << ','
       << fit.in_sample.edd.value << ',' << cfg.calib_trials << ',' << cfg.seed << '\n';
    if (!fit.feasible) {
      std::cerr << "calibration infeasible at target " << fit.target << ": " << fit.note << '\n';
      code = kInfeasible;
    }
  }
  return code;
}

int run_trace(const ConfigArgs& a) {
  const auto cfg = load(a);
  const auto& e = cfg.experiment;
  // Trial n of the validation stream used by `sequential`.
  const std::uint64_t trial_seed = derive_seed(derive_seed(cfg.seed, 1), a.trial);
  Output out(a.out);
  auto& os = out.stream();
  const std::string det(algorithm_id(e.detector.algorithm));
  os << "trial,slot,source,quantity,value\n";
  os << a.trial << ",0,fusion,t_true," << draw_trial_change_time(e.change, trial_seed) << '\n';
  const auto outcome = run_trial(e, trial_seed, [&](const SlotTrace& row) {
    for (std::size_t l = 0; l < row.nodes.size(); ++l) {
      const auto& n = row.nodes[l];
      const std::string src = "node" + std::to_string(l) + ":" + det;
      os << a.trial << ',' << row.slot << ',' << src << ",w," << n.w << '\n';
      os << a.trial << ',' << row.slot << ',' << src << ",argmax," << n.argmax << '\n';
      os << a.trial << ',' << row.slot << ',' << src << ",theta1," << n.theta1 << '\n';
      os << a.trial << ',' << row.slot << ',' << src << ",noise_hat," << n.noise_hat << '\n';
    }
    os << a.trial << ',' << row.slot << ",fusion,y," << row.y << '\n';
    os << a.trial << ',' << row.slot << ",fusion,f," << row.f << '\n';
    os << a.trial << ',' << row.slot << ",fusion,stopped," << (row.stopped ? 1 : 0) << '\n';
  });
  if (outcome.tau) os << a.trial << ',' << *outcome.tau << ",fusion,tau," << *outcome.tau << '\n';
  return kOk;
}

void add_config_options(CLI::App* sub, ConfigArgs& a) {
  sub->add_option("--config", a.config, "experiment file")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", a.seed, "master seed (overrides [run] seed)");
  sub->add_option("--out", a.out, "output CSV (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OFDM spectrum sensing: snapshot and cooperative sequential detectors"};
  app.require_subcommand(1);

  TableArgs ta;
  auto* table = app.add_subcommand("table", "reproduce a built-in table (1-8)");
  table->add_option("--id", ta.id, "table id")->required()->check(CLI::Range(1, 8));
  table->add_option("--trials", ta.trials, "H1 trials per snapshot column");
  table->add_option("--calib-trials", ta.calib_trials, "H0 trials for Monte Carlo thresholds");
  table->add_option("--null-trials", ta.null_trials, "fresh H0 trials to validate p_fa");
  table->add_option("--seq-trials", ta.seq_trials, "validation runs per sequential column");
  table->add_option("--seq-calib-trials", ta.seq_calib_trials, "calibration runs per column");
  table->add_option("--seed", ta.seed, "master seed (default $OFDMSENSE_SEED)");
  table->add_option("--threads", ta.threads, "worker threads (0 = all cores)");
  table->add_option("--out", ta.out, "output CSV (default stdout)");

  RocArgs ra;
  auto* roc = app.add_subcommand("roc", "snapshot p_d at a list of p_fa values");
  roc->add_option("--detector", ra.detector, "cp.aligned, cp.full, cp.offset-est, cp.abs, energy")
      ->required();
  roc->add_option("--pfa-list", ra.pfa_list, "comma separated p_fa values");
  roc->add_option("--m", ra.m, "OFDM symbols per decision");
  roc->add_option("--sigma-w2", ra.sigma_w2, "nominal noise power");
  roc->add_option("--snr-db", ra.snr_db, "SNR in dB");
  roc->add_option("--timing-offset", ra.timing_offset);
  roc->add_option("--freq-offset", ra.freq_offset);
  roc->add_option("--iq-epsilon", ra.iq_epsilon);
  roc->add_option("--iq-phase-deg", ra.iq_phase_deg);
  roc->add_option("--noise-uncertainty", ra.noise_uncertainty, "delta >= 1");
  roc->add_flag("--compensate-iq", ra.compensate_iq);
  roc->add_flag("--estimate-noise", ra.estimate_noise);
  roc->add_flag("--estimate-offsets", ra.estimate_offsets);
  roc->add_option("--threshold", ra.threshold, "analytic, mc or auto");
  roc->add_option("--trials", ra.trials);
  roc->add_option("--calib-trials", ra.calib_trials);
  roc->add_option("--null-trials", ra.null_trials);
  roc->add_option("--seed", ra.seed);
  roc->add_option("--threads", ra.threads);
  roc->add_option("--out", ra.out);

  ConfigArgs sa;
  auto* seq = app.add_subcommand("sequential", "calibrate and validate a sequential experiment");
  add_config_options(seq, sa);
  seq->add_option("--trials", sa.trials, "validation runs (overrides [run] trials)");
  seq->add_option("--calib-trials", sa.calib_trials, "calibration runs");

  ConfigArgs ca;
  auto* cal = app.add_subcommand("calibrate", "search fusion thresholds for a target P_FA");
  add_config_options(cal, ca);
  cal->add_option("--target-pfa", ca.target_pfa, "target P_FA (overrides [run] target_pfa)");
  cal->add_option("--calib-trials", ca.calib_trials, "calibration runs");

  ConfigArgs tr;
  auto* trace = app.add_subcommand("trace", "per-slot trace of one trial");
  add_config_options(trace, tr);
  trace->add_option("--trial", tr.trial, "trial index")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*table) return run_table(ta);
    if (*roc) return run_roc(ra);
    if (*seq) return run_sequential(sa);
    if (*cal) return run_calibrate(ca);
    if (*trace) return run_trace(tr);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
