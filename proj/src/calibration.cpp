#include "ofdmsense/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

double empirical_quantile(std::span<const double> values, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("empirical_quantile: level must lie in (0, 1)");
  const std::size_t n = values.size();
  const double pos = std::ceil(level * static_cast<double>(n) - 1e-9);
  if (n == 0 || pos < 1.0 || pos >= static_cast<double>(n)) {
    throw ParameterError("empirical_quantile: " + std::to_string(n) +
                         " samples cannot resolve level " + std::to_string(level));
  }
  std::vector<double> work(values.begin(), values.end());
  const auto k = static_cast<std::size_t>(pos) - 1;
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k), work.end());
  return work[k];
}

double threshold_from_null(std::span<const double> null_values, double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw ParameterError("threshold_from_null: target_pfa must lie in (0, 1)");
  }
  return empirical_quantile(null_values, 1.0 - target_pfa);
}

std::vector<double> simulate_snapshot_statistics(const SnapshotConfig& cfg, const OfdmParams& params,
                                                 const NodeScenario& scen, const ImpairmentSpec& imp,
                                                 Hypothesis truth, std::size_t n, std::uint64_t seed,
                                                 bool worst_case_noise, std::size_t threads) {
  cfg.validate();
  ImpairmentSpec realized = imp;
  if (worst_case_noise) realized.noise_draw = NoiseDraw::kWorstCase;
  std::vector<double> out(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        Rng rng = make_rng(seed, i);
        const auto x = snapshot_observation(cfg, params, scen, realized, truth, rng);
        out[i] = snapshot_statistic(cfg, params, x);
      },
      threads);
  return out;
}

double calibrate_snapshot_threshold(const SnapshotConfig& cfg, const OfdmParams& params,
                                    const NodeScenario& scen, const ImpairmentSpec& imp,
                                    double target_pfa, std::size_t n_calib, std::uint64_t seed,
                                    std::size_t threads) {
  const auto null_values = simulate_snapshot_statistics(cfg, params, scen, imp, Hypothesis::kH0,
                                                        n_calib, seed, true, threads);
  return threshold_from_null(null_values, target_pfa);
}

std::vector<RecordedTrial> record_trials(const SequentialExperiment& cfg, std::size_t n,
                                         std::uint64_t seed, std::size_t threads) {
  cfg.validate();
  std::vector<RecordedTrial> out(n);
  parallel_for(
      n, [&](std::size_t i) { out[i] = record_trial(cfg, derive_seed(seed, i)); }, threads);
  return out;
}

std::vector<RecordedSnapshotTrial> record_snapshot_trials(const CooperativeSnapshotExperiment& cfg,
                                                          std::size_t n, std::uint64_t seed,
                                                          bool pre_change_only,
                                                          std::size_t threads) {
  cfg.validate();
  std::vector<RecordedSnapshotTrial> out(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        out[i] = record_snapshot_trial(cfg, derive_seed(seed, i), pre_change_only);
      },
      threads);
  return out;
}

std::vector<TrialOutcome> evaluate_all(std::span<const RecordedTrial> recs,
                                       const FusionParams& fusion) {
  std::vector<TrialOutcome> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(evaluate_recorded(r, fusion));
  return out;
}

std::vector<double> default_gamma_grid(std::span<const RecordedTrial> recs, std::size_t n_points) {
  if (n_points < 2) throw ParameterError("default_gamma_grid: need at least two points");
  std::vector<double> pooled;
  std::size_t total = 0;
  for (const auto& r : recs) total += std::min(r.length, r.t_true - 1) * r.n_nodes;
  const std::size_t stride = std::max<std::size_t>(1, total / 2000000);
  std::size_t counter = 0;
  for (const auto& r : recs) {
    const std::size_t pre = std::min(r.length, r.t_true - 1) * r.n_nodes;
    for (std::size_t k = 0; k < pre; ++k) {
      if (counter++ % stride == 0) pooled.push_back(r.w[k]);
    }
  }
  if (pooled.empty()) throw ParameterError("default_gamma_grid: no pre-change slots recorded");
  std::sort(pooled.begin(), pooled.end());
  const double top = pooled.back();
  std::vector<double> grid;
  const double lo_exp = 0.3;
  const double hi_exp = std::log10(static_cast<double>(pooled.size()));
  for (std::size_t i = 0; i < n_points; ++i) {
    const double e = lo_exp + (hi_exp - lo_exp) * static_cast<double>(i) / static_cast<double>(n_points - 1);
    const double level = 1.0 - std::pow(10.0, -e);
    const auto idx = std::min(pooled.size() - 1,
                              static_cast<std::size_t>(level * static_cast<double>(pooled.size())));
    grid.push_back(pooled[idx]);
  }
  for (double f : {1.1, 1.25, 1.5, 2.0}) grid.push_back(top * f);
  grid.erase(std::remove_if(grid.begin(), grid.end(), [](double g) { return !(g > 0.0); }),
             grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) throw ParameterError("default_gamma_grid: pre-change statistic is identically zero");
  return grid;
}

std::vector<FusionCalibration> calibrate_fusion_thresholds(std::span<const RecordedTrial> recs,
                                                           const FusionParams& base,
                                                           std::span<const double> targets,
                                                           std::span<const double> gamma_grid) {
  if (recs.empty()) throw ParameterError("calibrate_fusion_thresholds: no recorded trials");
  if (gamma_grid.empty()) throw ParameterError("calibrate_fusion_thresholds: empty gamma grid");
  std::vector<FusionCalibration> best(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    best[t].target = targets[t];
    best[t].fusion = base;
    best[t].note = "no gamma on the grid met the target";
  }
  std::vector<double> maxima(recs.size());
  for (double gamma : gamma_grid) {
    FusionParams fp = base;
    fp.gamma = gamma;
    for (std::size_t i = 0; i < recs.size(); ++i) maxima[i] = pre_change_fusion_max(recs[i], fp);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      fp.beta = std::max(threshold_from_null(maxima, targets[t]), 1e-9);
      const auto outcomes = evaluate_all(recs, fp);
      const auto report = estimate_metrics(outcomes);
      if (report.p_fa.value > targets[t] || !report.edd_defined) continue;
      if (!best[t].feasible || report.edd.value < best[t].in_sample.edd.value) {
        best[t].fusion = fp;
        best[t].in_sample = report;
        best[t].feasible = true;
        best[t].note.clear();
      }
    }
  }
  return best;
}

FusionCalibration calibrate_fusion_thresholds(std::span<const RecordedTrial> recs,
                                              const FusionParams& base, double target,
                                              std::span<const double> gamma_grid) {
  const double targets[] = {target};
  return calibrate_fusion_thresholds(recs, base, targets, gamma_grid).front();
}

double calibrate_cooperative_snapshot(std::span<const RecordedSnapshotTrial> pre_change,
                                      double target) {
  std::vector<double> maxima;
  maxima.reserve(pre_change.size());
  for (const auto& r : pre_change) maxima.push_back(pre_change_snapshot_max(r));
  return threshold_from_null(maxima, target);
}

}  // namespace ofdmsense
