#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ofdmsense/fusion_net.hpp"
#include "ofdmsense/sequential_detect.hpp"
#include "ofdmsense/signal_model.hpp"
#include "ofdmsense/snapshot_detect.hpp"

namespace ofdmsense {

/// Per-trial result of a change-detection run.
struct TrialOutcome {
  std::size_t t_true = 0;
  std::optional<std::size_t> tau;
  bool false_alarm = false;  ///< tau < t_true
  bool censored = false;     ///< no declaration before the end of the run
  double delay = 0.0;        ///< tau - T, or run end - T when censored, 0 on false alarm
};

/// Point estimate with a two-sided confidence interval.
struct Estimate {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for k successes out of n (z = 1.96 by default).
Estimate wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

struct MetricsReport {
  std::size_t n_trials = 0;
  std::size_t n_false_alarm = 0;
  std::size_t n_censored = 0;
  std::size_t n_detected = 0;  ///< declared at or after the change
  Estimate p_fa;
  /// Mean delay over trials without false alarm; censored trials enter with their run-end delay.
  Estimate edd;
  bool edd_defined = false;
  double runtime_s = 0.0;
};

MetricsReport estimate_metrics(std::span<const TrialOutcome> outcomes);

/// Cooperative sequential scenario: identical node detectors, additive fusion channel.
struct SequentialExperiment {
  std::string name;
  OfdmParams params;
  std::vector<NodeScenario> nodes = std::vector<NodeScenario>(5);
  NodeScenario design;  ///< powers the detectors assume known, where they use them
  ImpairmentSpec impairments;
  ChangeModel change;
  SequentialDetectorConfig detector;
  FusionParams fusion;
  /// Slots simulated after the change before a trial is censored; 0 runs to the horizon.
  std::size_t post_change_cap = 0;

  void validate() const;
  /// Last slot simulated for a change at t_true.
  std::size_t run_length(std::size_t t_true) const;
};

/// One slot of a trial, for trace output.
struct SlotTrace {
  std::size_t slot = 0;
  std::vector<DetectorSnapshot> nodes;
  double y = 0.0;
  double f = 0.0;
  bool stopped = false;
};
using TraceSink = std::function<void(const SlotTrace&)>;

/// Change slot for a trial, redrawn until it falls within the horizon.
std::size_t draw_trial_change_time(const ChangeModel& model, std::uint64_t trial_seed);

/// Slot-by-slot cooperative trial with the fusion thresholds in cfg.fusion.
TrialOutcome run_trial(const SequentialExperiment& cfg, std::uint64_t trial_seed,
                       const TraceSink& trace = {});

/// Node statistic paths and fusion noise of one trial, independent of (gamma, beta).
struct RecordedTrial {
  std::size_t t_true = 0;
  std::size_t length = 0;     ///< slots recorded
  std::size_t n_nodes = 0;
  std::vector<double> w;      ///< slot-major: w[(slot - 1) * n_nodes + node]
  std::vector<double> noise;  ///< standard normal fusion noise per slot
};

RecordedTrial record_trial(const SequentialExperiment& cfg, std::uint64_t trial_seed);

/// Replays the fusion stage of a recorded trial; identical to run_trial for the same seed.
TrialOutcome evaluate_recorded(const RecordedTrial& rec, const FusionParams& fusion);

/// Max of the fusion statistic over the pre-change slots 1..T-1 (0 when T == 1).
double pre_change_fusion_max(const RecordedTrial& rec, const FusionParams& fusion);

/// Cooperative snapshot baseline: each node runs a snapshot detector over consecutive
/// blocks, the fusion node applies the AND rule over a noiseless channel.
struct CooperativeSnapshotExperiment {
  std::string name;
  OfdmParams params;
  std::vector<NodeScenario> nodes = std::vector<NodeScenario>(5);
  ImpairmentSpec impairments;
  ChangeModel change;
  SnapshotConfig snapshot;
  std::size_t post_change_cap = 0;

  void validate() const;
  std::size_t block_slots() const;
  std::size_t run_length(std::size_t t_true) const;
};

/// Per-block min over nodes of the snapshot statistic; block b ends at slot b * block_slots.
struct RecordedSnapshotTrial {
  std::size_t t_true = 0;
  std::size_t block_slots = 0;
  std::vector<double> min_stat;
};

/// Records blocks up to the run end, or only the pre-change blocks when pre_change_only.
RecordedSnapshotTrial record_snapshot_trial(const CooperativeSnapshotExperiment& cfg,
                                            std::uint64_t trial_seed, bool pre_change_only);

TrialOutcome evaluate_snapshot_recorded(const RecordedSnapshotTrial& rec, double lambda,
                                        std::size_t run_end);

/// Max over pre-change blocks of the AND-rule statistic (-inf when there is none).
double pre_change_snapshot_max(const RecordedSnapshotTrial& rec);

/// Runs body(i) for i in [0, n) on a pool of worker threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

}  // namespace ofdmsense
