#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ofdmsense/experiment.hpp"

namespace ofdmsense {

/// Smallest sample x with #(values > x) <= (1 - level) n, i.e. the ceil(level n)-th order
/// statistic. Throws ParameterError when n is too small to resolve the level.
double empirical_quantile(std::span<const double> values, double level);

/// Threshold with empirical exceedance <= target_pfa over the null sample.
double threshold_from_null(std::span<const double> null_values, double target_pfa);

/// Snapshot statistics over n independent observations. Trial i uses seed derive_seed(seed, i).
/// With worst_case_noise the realized noise power is nominal * delta (threshold design point).
std::vector<double> simulate_snapshot_statistics(const SnapshotConfig& cfg, const OfdmParams& params,
                                                 const NodeScenario& scen, const ImpairmentSpec& imp,
                                                 Hypothesis truth, std::size_t n, std::uint64_t seed,
                                                 bool worst_case_noise, std::size_t threads = 0);

/// Empirical (1 - target) quantile of the statistic under H0 with the same impairments,
/// noise at the worst case of the uncertainty interval.
double calibrate_snapshot_threshold(const SnapshotConfig& cfg, const OfdmParams& params,
                                    const NodeScenario& scen, const ImpairmentSpec& imp,
                                    double target_pfa, std::size_t n_calib, std::uint64_t seed,
                                    std::size_t threads = 0);

std::vector<RecordedTrial> record_trials(const SequentialExperiment& cfg, std::size_t n,
                                         std::uint64_t seed, std::size_t threads = 0);

std::vector<RecordedSnapshotTrial> record_snapshot_trials(const CooperativeSnapshotExperiment& cfg,
                                                          std::size_t n, std::uint64_t seed,
                                                          bool pre_change_only,
                                                          std::size_t threads = 0);

std::vector<TrialOutcome> evaluate_all(std::span<const RecordedTrial> recs,
                                       const FusionParams& fusion);

/// Local thresholds to search: quantiles of the pooled pre-change node statistic, plus
/// values above its maximum.
std::vector<double> default_gamma_grid(std::span<const RecordedTrial> recs, std::size_t n_points = 40);

struct FusionCalibration {
  double target = 0.0;
  FusionParams fusion;     ///< base parameters with the chosen gamma and beta
  MetricsReport in_sample;
  bool feasible = false;
  std::string note;
};

/// For each gamma on the grid, beta is the (1 - target) quantile of the pre-change max of
/// the fusion statistic; the pair with the smallest in-sample EDD is returned.
std::vector<FusionCalibration> calibrate_fusion_thresholds(std::span<const RecordedTrial> recs,
                                                           const FusionParams& base,
                                                           std::span<const double> targets,
                                                           std::span<const double> gamma_grid);

FusionCalibration calibrate_fusion_thresholds(std::span<const RecordedTrial> recs,
                                              const FusionParams& base, double target,
                                              std::span<const double> gamma_grid);

/// AND-rule threshold: (1 - target) quantile of the per-trial pre-change max.
double calibrate_cooperative_snapshot(std::span<const RecordedSnapshotTrial> pre_change,
                                      double target);

}  // namespace ofdmsense
