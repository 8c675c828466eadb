#include "ofdmsense/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

namespace {

constexpr std::uint64_t kChangeStream = 0;
constexpr std::uint64_t kNodeStream = 1;
constexpr std::uint64_t kNoiseDrawStream = 1000;
constexpr std::uint64_t kFusionStream = 2000;

std::vector<NodeStream> make_streams(const OfdmParams& params,
                                     const std::vector<NodeScenario>& nodes,
                                     const ImpairmentSpec& imp, std::size_t change_slot,
                                     std::uint64_t trial_seed) {
  std::vector<NodeStream> streams;
  streams.reserve(nodes.size());
  for (std::size_t l = 0; l < nodes.size(); ++l) {
    Rng draw = make_rng(trial_seed, kNoiseDrawStream + l);
    NodeScenario realized = nodes[l];
    realized.sigma_w2 = realize_noise_power(nodes[l].sigma_w2, imp, draw);
    streams.emplace_back(params, realized, imp, change_slot, make_rng(trial_seed, kNodeStream + l));
  }
  return streams;
}

std::vector<std::unique_ptr<NodeDetector>> make_detectors(const SequentialExperiment& cfg) {
  std::vector<std::unique_ptr<NodeDetector>> out;
  for (std::size_t l = 0; l < cfg.nodes.size(); ++l) {
    out.push_back(make_node_detector(cfg.detector, cfg.params, cfg.design));
  }
  return out;
}

TrialOutcome finish(std::size_t t_true, std::optional<std::size_t> tau, std::size_t run_end) {
  TrialOutcome out;
  out.t_true = t_true;
  out.tau = tau;
  if (tau) {
    out.false_alarm = *tau < t_true;
    out.delay = out.false_alarm ? 0.0 : static_cast<double>(*tau - t_true);
  } else {
    out.censored = true;
    out.delay = static_cast<double>(run_end - t_true);
  }
  return out;
}

}  // namespace

Estimate wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) throw ParameterError("wilson_interval: n must be positive");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

MetricsReport estimate_metrics(std::span<const TrialOutcome> outcomes) {
  if (outcomes.empty()) throw ParameterError("estimate_metrics: no outcomes");
  MetricsReport r;
  r.n_trials = outcomes.size();
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n_delay = 0;
  for (const auto& o : outcomes) {
    if (o.false_alarm) {
      ++r.n_false_alarm;
      continue;
    }
    if (o.censored) {
      ++r.n_censored;
    } else {
      ++r.n_detected;
    }
    sum += o.delay;
    sum2 += o.delay * o.delay;
    ++n_delay;
  }
  r.p_fa = wilson_interval(r.n_false_alarm, r.n_trials);
  if (n_delay > 0) {
    const double mean = sum / static_cast<double>(n_delay);
    const double var = n_delay > 1 ? std::max(0.0, (sum2 - sum * mean) / static_cast<double>(n_delay - 1))
                                   : 0.0;
    const double half = 1.959963984540054 * std::sqrt(var / static_cast<double>(n_delay));
    r.edd = {mean, mean - half, mean + half};
    r.edd_defined = true;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.edd = {nan, nan, nan};
  }
  return r;
}

void SequentialExperiment::validate() const {
  params.validate();
  if (nodes.empty()) throw ParameterError("experiment: at least one node required");
  for (const auto& n : nodes) n.validate();
  impairments.validate(params);
  change.validate();
  detector.validate();
  if (fusion.n_nodes != nodes.size()) throw ParameterError("experiment: fusion.n_nodes != node count");
  fusion.validate();
}

std::size_t SequentialExperiment::run_length(std::size_t t_true) const {
  if (post_change_cap == 0) return change.horizon;
  return std::min(change.horizon, t_true + post_change_cap);
}

std::size_t draw_trial_change_time(const ChangeModel& model, std::uint64_t trial_seed) {
  Rng rng = make_rng(trial_seed, kChangeStream);
  for (;;) {
    if (auto t = draw_change_time(model, rng)) return *t;
  }
}

TrialOutcome run_trial(const SequentialExperiment& cfg, std::uint64_t trial_seed,
                       const TraceSink& trace) {
  cfg.validate();
  const std::size_t t_true = draw_trial_change_time(cfg.change, trial_seed);
  const std::size_t run_end = cfg.run_length(t_true);
  auto streams = make_streams(cfg.params, cfg.nodes, cfg.impairments, t_true, trial_seed);
  auto detectors = make_detectors(cfg);
  Rng fusion_rng = make_rng(trial_seed, kFusionStream);
  const std::size_t n = cfg.nodes.size();
  std::vector<double> reports(n);
  SlotTrace row;
  row.nodes.resize(n);
  SampleBlock buf;
  FusionState fusion;
  for (std::size_t slot = 1; slot <= run_end; ++slot) {
    for (std::size_t l = 0; l < n; ++l) {
      streams[l].next_into(detectors[l]->samples_needed(), buf);
      const double w = detectors[l]->step(buf);
      if (trace) row.nodes[l] = detectors[l]->snapshot();
      reports[l] = node_report(w, cfg.fusion.gamma, cfg.fusion.b);
    }
    const double y = phy_fuse(reports, cfg.fusion.sigma_m2, fusion_rng);
    fusion.step(fusion_llr(y, cfg.fusion.b, cfg.fusion.i_design, cfg.fusion.sigma_m2),
                cfg.fusion.beta);
    if (trace) {
      row.slot = slot;
      row.y = y;
      row.f = fusion.f();
      row.stopped = fusion.stopped();
      trace(row);
    }
    if (fusion.stopped()) break;
  }
  return finish(t_true, fusion.tau(), run_end);
}

RecordedTrial record_trial(const SequentialExperiment& cfg, std::uint64_t trial_seed) {
  cfg.validate();
  RecordedTrial rec;
  rec.t_true = draw_trial_change_time(cfg.change, trial_seed);
  rec.length = cfg.run_length(rec.t_true);
  rec.n_nodes = cfg.nodes.size();
  auto streams = make_streams(cfg.params, cfg.nodes, cfg.impairments, rec.t_true, trial_seed);
  auto detectors = make_detectors(cfg);
  rec.w.resize(rec.length * rec.n_nodes);
  SampleBlock buf;
  for (std::size_t l = 0; l < rec.n_nodes; ++l) {
    for (std::size_t slot = 1; slot <= rec.length; ++slot) {
      streams[l].next_into(detectors[l]->samples_needed(), buf);
      rec.w[(slot - 1) * rec.n_nodes + l] = detectors[l]->step(buf);
    }
  }
  Rng fusion_rng = make_rng(trial_seed, kFusionStream);
  rec.noise.resize(rec.length);
  for (auto& z : rec.noise) z = standard_normal(fusion_rng);
  return rec;
}

namespace {

// Fusion CUSUM over slots 1..last. Returns the stop slot; with f_max set it tracks the
// running max of F instead of stopping.
std::optional<std::size_t> replay(const RecordedTrial& rec, const FusionParams& fusion,
                                  std::size_t last, double* f_max) {
  const double amp = std::sqrt(fusion.sigma_m2);
  double f = 0.0;
  for (std::size_t slot = 1; slot <= last; ++slot) {
    const double* w = rec.w.data() + (slot - 1) * rec.n_nodes;
    double y = 0.0;
    for (std::size_t l = 0; l < rec.n_nodes; ++l) y += w[l] > fusion.gamma ? fusion.b : 0.0;
    y += amp * rec.noise[slot - 1];
    f = std::max(0.0, f + fusion_llr(y, fusion.b, fusion.i_design, fusion.sigma_m2));
    if (f_max) {
      *f_max = std::max(*f_max, f);
    } else if (f > fusion.beta) {
      return slot;
    }
  }
  return std::nullopt;
}

}  // namespace

TrialOutcome evaluate_recorded(const RecordedTrial& rec, const FusionParams& fusion) {
  return finish(rec.t_true, replay(rec, fusion, rec.length, nullptr), rec.length);
}

double pre_change_fusion_max(const RecordedTrial& rec, const FusionParams& fusion) {
  double f_max = 0.0;
  if (rec.t_true > 1) replay(rec, fusion, std::min(rec.length, rec.t_true - 1), &f_max);
  return f_max;
}

void CooperativeSnapshotExperiment::validate() const {
  params.validate();
  if (nodes.empty()) throw ParameterError("experiment: at least one node required");
  for (const auto& n : nodes) n.validate();
  impairments.validate(params);
  change.validate();
  snapshot.validate();
}

std::size_t CooperativeSnapshotExperiment::block_slots() const {
  return snapshot.required_samples(params) / params.l_s();
}

std::size_t CooperativeSnapshotExperiment::run_length(std::size_t t_true) const {
  if (post_change_cap == 0) return change.horizon;
  return std::min(change.horizon, t_true + post_change_cap);
}

RecordedSnapshotTrial record_snapshot_trial(const CooperativeSnapshotExperiment& cfg,
                                            std::uint64_t trial_seed, bool pre_change_only) {
  cfg.validate();
  RecordedSnapshotTrial rec;
  rec.t_true = draw_trial_change_time(cfg.change, trial_seed);
  rec.block_slots = cfg.block_slots();
  const std::size_t run_end = pre_change_only ? rec.t_true - 1 : cfg.run_length(rec.t_true);
  const std::size_t n_blocks = run_end / rec.block_slots;
  auto streams = make_streams(cfg.params, cfg.nodes, cfg.impairments, rec.t_true, trial_seed);
  const std::size_t block_samples = rec.block_slots * cfg.params.l_s();
  rec.min_stat.assign(n_blocks, std::numeric_limits<double>::infinity());
  SampleBlock buf;
  for (std::size_t l = 0; l < streams.size(); ++l) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      streams[l].next_into(block_samples, buf);
      rec.min_stat[b] = std::min(rec.min_stat[b], snapshot_statistic(cfg.snapshot, cfg.params, buf));
    }
  }
  return rec;
}

TrialOutcome evaluate_snapshot_recorded(const RecordedSnapshotTrial& rec, double lambda,
                                        std::size_t run_end) {
  std::optional<std::size_t> tau;
  for (std::size_t b = 0; b < rec.min_stat.size(); ++b) {
    if (rec.min_stat[b] > lambda) {
      tau = (b + 1) * rec.block_slots;
      break;
    }
  }
  return finish(rec.t_true, tau, run_end);
}

double pre_change_snapshot_max(const RecordedSnapshotTrial& rec) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < rec.min_stat.size(); ++b) {
    if ((b + 1) * rec.block_slots >= rec.t_true) break;
    best = std::max(best, rec.min_stat[b]);
  }
  return best;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ofdmsense
