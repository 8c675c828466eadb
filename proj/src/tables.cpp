#include "ofdmsense/tables.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kIqEpsilon = 0.2;
constexpr double kIqPhase = 10.0 * kPi / 180.0;

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

ImpairmentSpec nominal_noise() {
  ImpairmentSpec imp;
  imp.noise_draw = NoiseDraw::kNominal;
  return imp;
}

void add_iq(ImpairmentSpec& imp) {
  imp.iq_epsilon = kIqEpsilon;
  imp.iq_phase = kIqPhase;
}

SnapshotColumn cp_column(std::string label, SnapshotDetector det, std::size_t m, ThresholdRule rule,
                         std::vector<double> paper) {
  SnapshotColumn c;
  c.label = std::move(label);
  c.cfg.detector = det;
  c.cfg.m = m;
  c.scen = NodeScenario{20.0, 2.0};
  c.imp = nominal_noise();
  c.rule = rule;
  c.paper = std::move(paper);
  return c;
}

std::string row_label(const char* name, double p) {
  return std::string(name) + "=" + fmt(p);
}

}  // namespace

void write_csv_header(std::ostream& os) {
  os << "table,row,column,metric,value,ci_lo,ci_hi,n_trials,seed,paper,note\n";
}

void write_csv(std::ostream& os, const std::vector<TableCell>& cells) {
  for (const auto& c : cells) {
    os << c.table << ',' << quoted(c.row) << ',' << quoted(c.column) << ',' << c.metric << ','
       << fmt(c.value) << ',' << fmt(c.ci_lo) << ',' << fmt(c.ci_hi) << ',' << c.n_trials << ','
       << c.seed << ',' << (std::isnan(c.paper) ? std::string() : fmt(c.paper)) << ','
       << quoted(c.note) << '\n';
  }
}

SnapshotTable snapshot_table(int id) {
  using D = SnapshotDetector;
  using R = ThresholdRule;
  SnapshotTable t;
  t.id = id;
  switch (id) {
    case 1: {
      t.title = "CP snapshot, M=100: timing offset 30";
      t.pfa_rows = {0.05, 0.025, 0.01};
      t.columns.push_back(cp_column("no impairments", D::kCpAligned, 100, R::kAnalytic,
                                    {0.9999, 0.9996, 0.9988}));
      auto full = cp_column("full-symbol correlation, offset 30", D::kCpFull, 100, R::kAnalytic,
                            {0.7921, 0.7010, 0.5770});
      full.imp.timing_offset = 30;
      t.columns.push_back(full);
      auto est = cp_column("timing offset estimate, offset 30", D::kCpTimingEst, 100,
                           R::kMonteCarlo, {0.9975, 0.9944, 0.9880});
      est.imp.timing_offset = 30;
      t.columns.push_back(est);
      break;
    }
    case 2: {
      t.title = "CP snapshot, M=100: frequency offset 0.1, IQ imbalance (0.2, 10 deg)";
      t.pfa_rows = {0.05, 0.025, 0.01};
      auto f0 = cp_column("frequency offset, no compensation", D::kCpAligned, 100, R::kAnalytic,
                          {0.9965, 0.9913, 0.9794});
      f0.imp.freq_offset = 0.1;
      auto f1 = cp_column("frequency offset, |R| statistic", D::kCpAbs, 100, R::kAnalytic,
                          {0.9989, 0.9975, 0.9939});
      f1.imp.freq_offset = 0.1;
      auto q0 = cp_column("IQ imbalance, no compensation", D::kCpAligned, 100, R::kAnalytic,
                          {0.9991, 0.9977, 0.9937});
      add_iq(q0.imp);
      q0.iq_known = true;
      auto q1 = cp_column("IQ imbalance, compensated", D::kCpAligned, 100, R::kMonteCarlo,
                          {0.9999, 0.9996, 0.9988});
      add_iq(q1.imp);
      q1.cfg.compensate_iq = true;
      t.columns = {f0, f1, q0, q1};
      break;
    }
    case 3: {
      t.title = "CP snapshot, M=100: noise uncertainty 1.08 and all impairments";
      t.pfa_rows = {0.05, 0.02, 0.01};
      auto n = cp_column("noise power estimation", D::kCpAligned, 100, R::kAnalytic,
                         {0.9999, 0.9995, 0.9976});
      n.cfg.estimate_noise = true;
      n.imp.noise_uncertainty = 1.08;
      auto full = cp_column("all impairments, full-symbol correlation", D::kCpFull, 100,
                            R::kMonteCarlo, {0.5122, 0.3908, 0.2614});
      full.cfg.estimate_noise = true;
      auto comp = cp_column("all impairments, all compensation", D::kCpAbs, 100, R::kMonteCarlo,
                            {0.9712, 0.9556, 0.9300});
      comp.cfg.estimate_noise = true;
      comp.cfg.compensate_iq = true;
      comp.cfg.estimate_offsets = true;
      for (auto* c : {&full, &comp}) {
        c->imp.timing_offset = 30;
        c->imp.freq_offset = 0.1;
        add_iq(c->imp);
        c->imp.noise_uncertainty = 1.08;
      }
      t.columns = {n, full, comp};
      break;
    }
    case 4: {
      t.title = "Energy snapshot, M=40: timing offset 30, frequency offset 0.1";
      t.pfa_rows = {0.05, 0.025, 0.01};
      auto a = cp_column("no impairments", D::kEnergy, 40, R::kAnalytic, {0.9999, 0.9996, 0.9988});
      auto b = cp_column("timing offset", D::kEnergy, 40, R::kAnalytic, {0.9999, 0.9997, 0.9989});
      b.imp.timing_offset = 30;
      auto c = cp_column("frequency offset", D::kEnergy, 40, R::kAnalytic,
                         {0.9999, 0.9996, 0.9988});
      c.imp.freq_offset = 0.1;
      t.columns = {a, b, c};
      break;
    }
    case 5: {
      t.title = "Energy snapshot, M=40: IQ imbalance, noise uncertainty, all impairments";
      t.pfa_rows = {0.05, 0.025, 0.01};
      auto q0 = cp_column("IQ imbalance, no compensation", D::kEnergy, 40, R::kAnalytic,
                          {0.9992, 0.9981, 0.9941});
      add_iq(q0.imp);
      q0.iq_known = true;
      auto q1 = cp_column("IQ imbalance, compensated", D::kEnergy, 40, R::kMonteCarlo,
                          {0.9996, 0.9989, 0.9968});
      add_iq(q1.imp);
      q1.cfg.compensate_iq = true;
      auto nu = cp_column("noise uncertainty", D::kEnergy, 40, R::kAnalytic,
                          {0.2785, 0.1814, 0.1007});
      nu.scen = NodeScenario{10.0, 1.0};
      nu.imp.noise_uncertainty = 1.08;
      auto tf = cp_column("timing, frequency and IQ, IQ compensated", D::kEnergy, 40,
                          R::kMonteCarlo, {0.9995, 0.9985, 0.9965});
      tf.imp.timing_offset = 30;
      tf.imp.freq_offset = 0.1;
      add_iq(tf.imp);
      tf.cfg.compensate_iq = true;
      auto all = tf;
      all.label = "all impairments, IQ compensated";
      all.paper = {0.2563, 0.1675, 0.0921};
      all.scen = NodeScenario{10.0, 1.0};
      all.imp.noise_uncertainty = 1.08;
      t.columns = {q0, q1, nu, tf, all};
      break;
    }
    case 6: {
      t.title = "CP snapshot, M=40";
      t.pfa_rows = {0.05, 0.025, 0.01};
      auto a = cp_column("no impairments", D::kCpAligned, 40, R::kAnalytic,
                         {0.9606, 0.9606, 0.8728});
      auto b = cp_column("timing, frequency and IQ, all compensation", D::kCpAbs, 40,
                         R::kMonteCarlo, {0.7097, 0.6173, 0.4905});
      b.cfg.compensate_iq = true;
      b.cfg.estimate_offsets = true;
      b.imp.timing_offset = 30;
      b.imp.freq_offset = 0.1;
      add_iq(b.imp);
      auto c = b;
      c.label = "all impairments with noise uncertainty, all compensation";
      c.paper = {0.5701, 0.4680, 0.3334};
      c.imp.noise_uncertainty = 1.08;
      t.columns = {a, b, c};
      break;
    }
    default:
      throw ParameterError("snapshot_table: id must be 1..6, got " + std::to_string(id));
  }
  return t;
}

SequentialTable sequential_table(int id) {
  if (id != 7 && id != 8) {
    throw ParameterError("sequential_table: id must be 7 or 8, got " + std::to_string(id));
  }
  const bool cp = id == 7;
  SequentialTable t;
  t.id = id;
  t.title = cp ? "Cooperative CP detectors, 5 nodes, SNR -10 dB"
               : "Cooperative energy detectors, 5 nodes, SNR -10 dB";
  t.pfa_rows = {0.1, 0.075, 0.05};

  SequentialExperiment base;
  base.nodes.assign(5, NodeScenario{20.0, 2.0});
  base.design = NodeScenario{20.0, 2.0};
  base.impairments = nominal_noise();
  base.change = ChangeModel{0.004, 2500, 0};
  base.post_change_cap = cp ? 300 : 200;

  auto column = [&](std::string label, SequentialAlgorithm alg, std::vector<double> paper) {
    SequentialColumn c;
    c.label = std::move(label);
    c.seq = base;
    c.seq.name = c.label;
    c.seq.detector.algorithm = alg;
    c.paper = std::move(paper);
    return c;
  };

  using A = SequentialAlgorithm;
  if (cp) {
    auto a = column("A cp.cusum", A::kCpCusum, {10.15, 11.43, 12.6});
    auto b = column("B cp.bank, offset 10", A::kCpBank, {18.27, 19.82, 22.09});
    b.seq.impairments.timing_offset = 10;
    auto c = column("C cp.glr, offset 10, frequency 0.1", A::kCpGlr, {24.71, 28.07, 31.42});
    c.seq.impairments.timing_offset = 10;
    c.seq.impairments.freq_offset = 0.1;
    auto d = column("D cp.glr-all, all impairments", A::kCpGlrAll, {28.15, 31.01, 34.95});
    d.seq.impairments.timing_offset = 10;
    d.seq.impairments.freq_offset = 0.1;
    add_iq(d.seq.impairments);
    t.columns = {a, b, c, d};
  } else {
    auto a = column("A energy.cusum", A::kEnergyCusum, {5.22, 5.61, 6.41});
    auto b = column("B energy.cusum, offset 10", A::kEnergyCusum, {5.43, 5.91, 6.46});
    b.seq.impairments.timing_offset = 10;
    auto c = column("C energy.glr, offset 10, frequency 0.1", A::kEnergyGlr, {7.73, 8.52, 9.19});
    c.seq.impairments.timing_offset = 10;
    c.seq.impairments.freq_offset = 0.1;
    auto d = column("D energy.mglr, all impairments", A::kEnergyMglr, {10.15, 11.43, 12.6});
    d.seq.impairments.timing_offset = 10;
    d.seq.impairments.freq_offset = 0.1;
    add_iq(d.seq.impairments);
    d.seq.change.min_pre_change = d.seq.detector.m_star;
    t.columns = {a, b, c, d};
  }

  SequentialColumn snap;
  snap.snapshot_baseline = true;
  snap.label = cp ? "snapshot CP M=50, all impairments" : "snapshot energy M=5, all impairments";
  snap.paper = cp ? std::vector<double>{64.16, 67.46, 72.35}
                  : std::vector<double>{349.13, 438.03, 623.58};
  auto& s = snap.snap;
  s.name = snap.label;
  s.nodes = base.nodes;
  s.change = base.change;
  s.impairments = nominal_noise();
  s.impairments.timing_offset = 10;
  s.impairments.freq_offset = 0.1;
  add_iq(s.impairments);
  s.impairments.noise_uncertainty = 1.08;
  s.snapshot.compensate_iq = true;
  if (cp) {
    // m = 49 plus the timing search margin captures 50 symbols per decision.
    s.snapshot.detector = SnapshotDetector::kCpAbs;
    s.snapshot.m = 49;
    s.snapshot.estimate_offsets = true;
    s.snapshot.estimate_noise = true;
    s.post_change_cap = 500;
  } else {
    s.snapshot.detector = SnapshotDetector::kEnergy;
    s.snapshot.m = 5;
    s.post_change_cap = 0;
  }
  t.columns.push_back(snap);
  return t;
}

SnapshotColumnResult evaluate_snapshot_column(const SnapshotColumn& col, const OfdmParams& params,
                                              const std::vector<double>& pfa_rows,
                                              const TableOptions& opts) {
  col.cfg.validate();
  col.imp.validate(params);
  SnapshotColumnResult out;
  if (col.rule == ThresholdRule::kAnalytic) {
    const double assumed = col.scen.sigma_w2 * col.imp.noise_uncertainty;
    ImpairmentSpec known;
    if (col.iq_known) {
      known.iq_epsilon = col.imp.iq_epsilon;
      known.iq_phase = col.imp.iq_phase;
    }
    const auto model = analytic_null_model(col.cfg, params, assumed, known);
    if (!model) throw ParameterError("column '" + col.label + "' has no closed-form null model");
    for (double p : pfa_rows) out.thresholds.push_back(threshold_for_pfa(*model, p));
  } else {
    const auto null_values =
        simulate_snapshot_statistics(col.cfg, params, col.scen, col.imp, Hypothesis::kH0,
                                     opts.calib_trials, derive_seed(opts.seed, 2), true, opts.threads);
    for (double p : pfa_rows) out.thresholds.push_back(threshold_from_null(null_values, p));
  }

  auto exceed = [&](const std::vector<double>& stats) {
    std::vector<Estimate> est;
    for (double lambda : out.thresholds) {
      std::size_t k = 0;
      for (double v : stats) k += v > lambda ? 1 : 0;
      est.push_back(wilson_interval(k, stats.size()));
    }
    return est;
  };
  const auto h1 = simulate_snapshot_statistics(col.cfg, params, col.scen, col.imp, Hypothesis::kH1,
                                               opts.trials, derive_seed(opts.seed, 1), false,
                                               opts.threads);
  out.p_d = exceed(h1);
  out.n_h1 = h1.size();
  if (opts.null_trials > 0) {
    const auto h0 = simulate_snapshot_statistics(col.cfg, params, col.scen, col.imp,
                                                 Hypothesis::kH0, opts.null_trials,
                                                 derive_seed(opts.seed, 3), true, opts.threads);
    out.p_fa = exceed(h0);
    out.n_h0 = h0.size();
  }
  return out;
}

std::vector<SequentialRowResult> evaluate_sequential_column(const SequentialColumn& col,
                                                            const std::vector<double>& pfa_rows,
                                                            const TableOptions& opts) {
  std::vector<SequentialRowResult> rows(pfa_rows.size());
  const std::uint64_t calib_seed = derive_seed(opts.seed, 2);
  const std::uint64_t val_seed = derive_seed(opts.seed, 1);
  if (!col.snapshot_baseline) {
    std::vector<FusionCalibration> fits;
    {
      const auto calib = record_trials(col.seq, opts.seq_calib_trials, calib_seed, opts.threads);
      const auto grid = default_gamma_grid(calib);
      fits = calibrate_fusion_thresholds(calib, col.seq.fusion, pfa_rows, grid);
    }
    const auto val = record_trials(col.seq, opts.seq_trials, val_seed, opts.threads);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      rows[r].target = pfa_rows[r];
      rows[r].feasible = fits[r].feasible;
      rows[r].fusion = fits[r].fusion;
      rows[r].in_sample = fits[r].in_sample;
      rows[r].note = fits[r].note;
      if (!fits[r].feasible) continue;
      const auto outcomes = evaluate_all(val, fits[r].fusion);
      rows[r].validation = estimate_metrics(outcomes);
    }
    return rows;
  }
  // Thresholds come from pre-change blocks at the worst-case noise power.
  CooperativeSnapshotExperiment calib_cfg = col.snap;
  calib_cfg.impairments.noise_draw = NoiseDraw::kWorstCase;
  const auto pre = record_snapshot_trials(calib_cfg, opts.seq_calib_trials, calib_seed, true,
                                          opts.threads);
  const auto val = record_snapshot_trials(col.snap, opts.seq_trials, val_seed, false, opts.threads);
  std::vector<double> null_max;
  for (const auto& rec : record_snapshot_trials(calib_cfg, opts.seq_trials, derive_seed(opts.seed, 3),
                                                true, opts.threads)) {
    null_max.push_back(pre_change_snapshot_max(rec));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].target = pfa_rows[r];
    rows[r].lambda = calibrate_cooperative_snapshot(pre, pfa_rows[r]);
    rows[r].feasible = true;
    std::size_t k = 0;
    for (double v : null_max) k += v > rows[r].lambda ? 1 : 0;
    rows[r].null_pfa = wilson_interval(k, null_max.size());
    rows[r].n_null = null_max.size();
    std::vector<TrialOutcome> outcomes;
    outcomes.reserve(val.size());
    for (const auto& rec : val) {
      outcomes.push_back(
          evaluate_snapshot_recorded(rec, rows[r].lambda, col.snap.run_length(rec.t_true)));
    }
    rows[r].validation = estimate_metrics(outcomes);
  }
  return rows;
}

std::vector<TableCell> reproduce_table(int id, const TableOptions& opts) {
  TableOptions local = opts;
  local.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(id));
  std::vector<TableCell> cells;
  const OfdmParams params;
  if (id >= 1 && id <= 6) {
    const auto table = snapshot_table(id);
    for (const auto& col : table.columns) {
      const auto res = evaluate_snapshot_column(col, params, table.pfa_rows, local);
      for (std::size_t r = 0; r < table.pfa_rows.size(); ++r) {
        const std::string row = row_label("p_fa", table.pfa_rows[r]);
        const std::string rule = col.rule == ThresholdRule::kAnalytic ? "analytic" : "monte-carlo";
        cells.push_back({id, row, col.label, "p_d", col.paper[r], res.p_d[r].value, res.p_d[r].lo,
                         res.p_d[r].hi, res.n_h1, opts.seed, rule + " threshold"});
        cells.push_back({id, row, col.label, "threshold", kNan, res.thresholds[r],
                         res.thresholds[r], res.thresholds[r],
                         col.rule == ThresholdRule::kAnalytic ? 0 : local.calib_trials, opts.seed,
                         rule});
        if (!res.p_fa.empty()) {
          cells.push_back({id, row, col.label, "p_fa", table.pfa_rows[r], res.p_fa[r].value,
                           res.p_fa[r].lo, res.p_fa[r].hi, res.n_h0, opts.seed,
                           "fresh H0 trials at the worst-case noise power"});
        }
      }
    }
    return cells;
  }
  const auto table = sequential_table(id);
  for (const auto& col : table.columns) {
    const auto res = evaluate_sequential_column(col, table.pfa_rows, local);
    for (std::size_t r = 0; r < res.size(); ++r) {
      const auto& rr = res[r];
      const std::string row = row_label("P_FA", table.pfa_rows[r]);
      std::ostringstream note;
      if (col.snapshot_baseline) {
        note << "lambda=" << fmt(rr.lambda) << " block=" << col.snap.block_slots() << " slots";
      } else if (rr.feasible) {
        note << "gamma=" << fmt(rr.fusion.gamma) << " beta=" << fmt(rr.fusion.beta)
             << " b=" << fmt(rr.fusion.b) << " I=" << fmt(rr.fusion.i_design)
             << " sigma_m2=" << fmt(rr.fusion.sigma_m2);
      } else {
        note << "infeasible: " << rr.note;
      }
      const auto& v = rr.validation;
      if (rr.feasible) {
        if (v.n_censored > 0) note << " censored=" << v.n_censored;
        cells.push_back({id, row, col.label, "edd", col.paper[r], v.edd.value, v.edd.lo, v.edd.hi,
                         v.n_trials, opts.seed, note.str()});
        if (col.snapshot_baseline) {
          cells.push_back({id, row, col.label, "P_FA", table.pfa_rows[r], rr.null_pfa.value,
                           rr.null_pfa.lo, rr.null_pfa.hi, rr.n_null, opts.seed,
                           "fresh pre-change runs at the worst-case noise power"});
          cells.push_back({id, row, col.label, "P_FA_nominal", kNan, v.p_fa.value, v.p_fa.lo,
                           v.p_fa.hi, v.n_trials, opts.seed, "validation runs, nominal noise"});
        } else {
          cells.push_back({id, row, col.label, "P_FA", table.pfa_rows[r], v.p_fa.value,
                           v.p_fa.lo, v.p_fa.hi, v.n_trials, opts.seed, "validation runs"});
        }
      } else {
        cells.push_back({id, row, col.label, "edd", col.paper[r], kNan, kNan, kNan, 0, opts.seed,
                         note.str()});
      }
    }
  }
  return cells;
}

}  // namespace ofdmsense
