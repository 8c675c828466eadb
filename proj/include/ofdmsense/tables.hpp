#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ofdmsense/calibration.hpp"

namespace ofdmsense {

/// One measured value of a reproduced table.
struct TableCell {
  int table = 0;
  std::string row;      ///< e.g. "p_fa=0.05"
  std::string column;
  std::string metric;   ///< "p_d", "p_fa", "edd", "P_FA", "threshold", ...
  double paper = 0.0;   ///< published value, NaN when there is none
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
  std::string note;
};

void write_csv_header(std::ostream& os);
void write_csv(std::ostream& os, const std::vector<TableCell>& cells);

enum class ThresholdRule {
  kAnalytic,    ///< closed-form null model at the worst-case noise power
  kMonteCarlo,  ///< empirical H0 quantile under the same impairments, worst-case noise
};

struct SnapshotColumn {
  std::string label;
  SnapshotConfig cfg;
  NodeScenario scen;
  ImpairmentSpec imp;
  ThresholdRule rule = ThresholdRule::kAnalytic;
  bool iq_known = false;  ///< analytic threshold accounts for the (uncompensated) IQ imbalance
  std::vector<double> paper;  ///< one per row
};

struct SnapshotTable {
  int id = 0;
  std::string title;
  std::vector<double> pfa_rows;
  std::vector<SnapshotColumn> columns;
};

/// Built-in presets for tables 1..6.
SnapshotTable snapshot_table(int id);

struct SequentialColumn {
  std::string label;
  bool snapshot_baseline = false;
  SequentialExperiment seq;
  CooperativeSnapshotExperiment snap;
  std::vector<double> paper;
};

struct SequentialTable {
  int id = 0;
  std::string title;
  std::vector<double> pfa_rows;
  std::vector<SequentialColumn> columns;
};

/// Built-in presets for tables 7 and 8.
SequentialTable sequential_table(int id);

struct TableOptions {
  std::size_t trials = 10000;         ///< H1 trials per snapshot column
  std::size_t calib_trials = 100000;  ///< H0 trials for Monte Carlo snapshot thresholds
  std::size_t null_trials = 0;        ///< fresh H0 trials to validate snapshot p_fa (0 skips)
  std::size_t seq_trials = 2000;      ///< validation runs per sequential column
  std::size_t seq_calib_trials = 2000;
  std::uint64_t seed = 20240601;
  std::size_t threads = 0;
};

struct SnapshotColumnResult {
  std::vector<double> thresholds;
  std::vector<Estimate> p_d;
  std::vector<Estimate> p_fa;  ///< empty unless null_trials > 0
  std::size_t n_h1 = 0;
  std::size_t n_h0 = 0;
};

/// Thresholds for every row, p_d over opts.trials and optionally the validated p_fa. Every
/// column of a table draws its H1 and H0 trials from the same seeds.
SnapshotColumnResult evaluate_snapshot_column(const SnapshotColumn& col, const OfdmParams& params,
                                              const std::vector<double>& pfa_rows,
                                              const TableOptions& opts);

struct SequentialRowResult {
  double target = 0.0;
  bool feasible = false;
  FusionParams fusion;    ///< sequential columns
  double lambda = 0.0;    ///< snapshot baseline
  MetricsReport in_sample;
  MetricsReport validation;
  Estimate null_pfa;      ///< snapshot baseline: fresh pre-change runs at the worst-case noise
  std::size_t n_null = 0;
  std::string note;
};

std::vector<SequentialRowResult> evaluate_sequential_column(const SequentialColumn& col,
                                                            const std::vector<double>& pfa_rows,
                                                            const TableOptions& opts);

/// Runs a built-in table and returns its cells.
std::vector<TableCell> reproduce_table(int id, const TableOptions& opts);

}  // namespace ofdmsense
