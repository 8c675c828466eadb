#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ofdmsense/signal_model.hpp"
#include "ofdmsense/snapshot_detect.hpp"

namespace ofdmsense {

/// Re{1/l_c sum_i x(i) conj(x(i + l_d))} over the CP window at the start of the slot.
/// Needs l_s samples (the window ends inside the slot).
double cp_slot_statistic(std::span<const Complex> slot, const OfdmParams& params);

/// xi = l_c (2 sigma_s2 r_r - sigma_s2^2) / (2 sigma_w2^2)
double cp_llr(double r_r, double sigma_s2, double sigma_w2, std::size_t l_c);

/// Mean of |x|^2 over the slot.
double energy_slot_statistic(std::span<const Complex> slot, const OfdmParams& params);

/// Gaussian LLR of N(s2 + w2, (s2 + w2)^2 / n) against N(w2, w2^2 / n).
double energy_llr(double v, double sigma_s2, double sigma_w2, std::size_t n_samples);

struct CusumState {
  double w = 0.0;
};

/// w <- max(0, w + xi)
CusumState cusum_step(CusumState state, double xi);

/// Root in [0, inf) of the unknown-power GLR quadratic
///   k t^2 + t (2 k w2 + n k w2 + c S) - (n SQ + n w2 S - k w2^2) = 0
/// with c = 1 (printed form) or c = n (exact stationary point of the likelihood).
enum class Theta1Form { kPrinted, kExact };
double solve_theta1_glr(double s, double sq, std::size_t k, double sigma_w2, std::size_t n_samples,
                        Theta1Form form = Theta1Form::kPrinted);

/// Root in [0, inf) of k t^2 + n S t - n SQ = 0.
double solve_theta1_mglr(double s, double sq, std::size_t k, std::size_t n_samples);

/// Larger root of a t^2 + b t + c = 0, clamped to 0 when it is negative or the roots are complex.
double nonnegative_root(double a, double b, double c);

/// b if w > gamma else 0.
double node_report(double w, double gamma, double b);

/// Values exposed for trace logging.
struct DetectorSnapshot {
  double w = 0.0;
  std::size_t argmax = 0;   ///< bank offset m or candidate change slot, detector dependent
  double theta1 = 0.0;      ///< power estimate at the maximizing candidate (GLR/MGLR)
  double noise_hat = 0.0;   ///< running noise estimate (all-impairments CP)
};

/// Per-node sequential detector: consumes one slot of receiver samples per step.
class NodeDetector {
public:
  virtual ~NodeDetector() = default;
  virtual std::string_view id() const = 0;
  /// Samples the next step() call expects.
  virtual std::size_t samples_needed() const = 0;
  /// Feeds the next slot and returns W_j.
  virtual double step(std::span<const Complex> samples) = 0;
  virtual DetectorSnapshot snapshot() const = 0;
  std::size_t slot() const { return slot_; }

protected:
  std::size_t slot_ = 0;
};

/// Scalar CUSUM on a per-slot LLR (known powers, aligned boundary).
class CpCusum : public NodeDetector {
public:
  CpCusum(const OfdmParams& params, const NodeScenario& design);
  std::string_view id() const override { return "cp.cusum"; }
  std::size_t samples_needed() const override { return params_.l_s(); }
  double step(std::span<const Complex> samples) override;
  DetectorSnapshot snapshot() const override { return {state_.w, 0, 0.0, 0.0}; }

private:
  OfdmParams params_;
  NodeScenario design_;
  CusumState state_;
};

class EnergyCusum : public NodeDetector {
public:
  EnergyCusum(const OfdmParams& params, const NodeScenario& design);
  std::string_view id() const override { return "energy.cusum"; }
  std::size_t samples_needed() const override { return params_.l_s(); }
  double step(std::span<const Complex> samples) override;
  DetectorSnapshot snapshot() const override { return {state_.w, 0, 0.0, 0.0}; }

private:
  OfdmParams params_;
  NodeScenario design_;
  CusumState state_;
};

/// Slot window bookkeeping shared by the offset-bank detectors: the first slot takes
/// l_s + l_d samples, later slots take l_s and reuse the previous l_d as carry.
class CarryWindow {
public:
  explicit CarryWindow(const OfdmParams& params) : params_(params) {}
  std::size_t samples_needed(std::size_t slot) const {
    return slot == 0 ? params_.l_s() + params_.l_d : params_.l_s();
  }
  /// Appends the new samples and returns the l_s + l_d sample window of this slot.
  std::span<const Complex> push(std::span<const Complex> samples, std::size_t slot);
  /// R(m) for m = 0..l_d-1 over the current window, normalized by l_c.
  void offset_correlations(std::vector<Complex>& out) const;

private:
  OfdmParams params_;
  SampleBlock window_;
  mutable std::vector<Complex> products_;
};

/// l_d parallel CUSUMs, one per candidate timing offset; W is the max over the bank.
class CusumBank : public NodeDetector {
public:
  CusumBank(const OfdmParams& params, const NodeScenario& design);
  std::string_view id() const override { return "cp.bank"; }
  std::size_t samples_needed() const override { return window_.samples_needed(slot_); }
  double step(std::span<const Complex> samples) override;
  DetectorSnapshot snapshot() const override { return {w_, argmax_, 0.0, 0.0}; }
  const std::vector<double>& bank() const { return bank_; }

  /// Bank update from precomputed slot statistics R_r(j, m).
  double step_statistics(std::span<const double> r_r);

private:
  OfdmParams params_;
  NodeScenario design_;
  CarryWindow window_;
  std::vector<double> bank_;
  std::vector<Complex> r_;
  std::vector<double> r_r_;
  double w_ = 0.0;
  std::size_t argmax_ = 0;
};

/// Running cumulative I/Q second moments; compensates each slot with the estimate so far.
class RunningIqCompensator {
public:
  /// Updates the moments with the raw samples, then compensates them in place.
  void process(std::span<Complex> samples);
  IqEstimates estimate() const { return est_; }

private:
  double srr_ = 0.0;
  double sii_ = 0.0;
  double sri_ = 0.0;
  IqEstimates est_;
};

/// Cumulative mean of |x|^2 over every sample seen.
class RunningNoiseEstimate {
public:
  double update(std::span<const Complex> samples);
  double value() const;
  std::size_t count() const { return count_; }

private:
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

/// Windowed GLR over unknown power and frequency offset, one GLR per candidate timing offset:
///   W_m = max_t |sum_{p=t..j} R(p, m)|^2 / ((j - t + 1) sigma_w2^2 / l_c),  W = max_m W_m.
/// With all_impairments set, slots are IQ-compensated first and sigma_w2 is replaced by
/// the running noise estimate.
class GlrCp : public NodeDetector {
public:
  GlrCp(const OfdmParams& params, double sigma_w2, std::size_t window, bool all_impairments);
  std::string_view id() const override { return all_ ? "cp.glr-all" : "cp.glr"; }
  std::size_t samples_needed() const override { return carry_.samples_needed(slot_); }
  double step(std::span<const Complex> samples) override;
  DetectorSnapshot snapshot() const override { return {w_, argmax_, 0.0, noise_used_}; }

  /// GLR update from precomputed slot statistics R(j, m) and the noise power to use.
  double step_statistics(std::span<const Complex> r, double sigma_w2);

private:
  OfdmParams params_;
  double sigma_w2_;
  std::size_t window_;
  bool all_;
  CarryWindow carry_;
  RunningIqCompensator iq_;
  RunningNoiseEstimate noise_;
  SampleBlock scratch_;
  std::vector<Complex> r_;
  // Per-offset prefix sums of R, stored twice in a ring of 2 (window + 1).
  std::vector<double> pre_re_;
  std::vector<double> pre_im_;
  std::vector<double> inv_k_;
  double w_ = 0.0;
  std::size_t argmax_ = 0;
  double noise_used_ = 0.0;
};

/// Windowed GLR on mean-removed slot energy with unknown post-change power.
class GlrEnergy : public NodeDetector {
public:
  GlrEnergy(const OfdmParams& params, double sigma_w2, std::size_t window,
            Theta1Form form = Theta1Form::kPrinted);
  std::string_view id() const override { return "energy.glr"; }
  std::size_t samples_needed() const override { return params_.l_s(); }
  double step(std::span<const Complex> samples) override;
  DetectorSnapshot snapshot() const override { return {w_, argmax_, theta1_, 0.0}; }

  /// Update from a mean-removed slot energy.
  double step_value(double v);

private:
  OfdmParams params_;
  double sigma_w2_;
  std::size_t window_;
  Theta1Form form_;
  std::vector<double> pre_s_;
  std::vector<double> pre_sq_;
  double w_ = 0.0;
  std::size_t argmax_ = 0;
  double theta1_ = 0.0;
};

/// Score used by the MGLR detector for a split at candidate i.
enum class MglrScore {
  kLikelihood,  ///< log-likelihood ratio of the split model against the no-change model
  kPrinted,     ///< B_1^i + B_{i+1}^j - B_1^j
};

/// Modified GLR on raw slot energy with unknown pre- and post-change power. Candidates
/// i in [max(m_star, j - window), j - 1]; the first m_star slots only train.
class MglrEnergy : public NodeDetector {
public:
  MglrEnergy(const OfdmParams& params, std::size_t m_star, std::size_t window,
             MglrScore score = MglrScore::kLikelihood, bool reverse = false);
  std::string_view id() const override { return "energy.mglr"; }
  std::size_t samples_needed() const override { return params_.l_s(); }
  double step(std::span<const Complex> samples) override;
  DetectorSnapshot snapshot() const override { return {w_, argmax_, theta1_, 0.0}; }

  /// Update from a raw slot energy.
  double step_value(double v);

private:
  struct SegmentFit {
    double theta = 0.0;
    double b = 0.0;     ///< sum (V - theta)^2 / (2 theta^2 / n)
    double nll = 0.0;   ///< b + k log theta
  };
  SegmentFit fit(double s, double sq, std::size_t k) const;

  OfdmParams params_;
  std::size_t m_star_;
  std::size_t window_;
  MglrScore score_;
  bool reverse_;
  std::vector<double> pre_s_;    ///< pre_s_[i] = sum of V over slots 1..i
  std::vector<double> pre_sq_;
  std::vector<SegmentFit> head_;  ///< head_[i] = fit of slots 1..i
  double w_ = 0.0;
  std::size_t argmax_ = 0;
  double theta1_ = 0.0;
};

enum class SequentialAlgorithm {
  kCpCusum,
  kCpBank,
  kCpGlr,
  kCpGlrAll,
  kEnergyCusum,
  kEnergyGlr,
  kEnergyMglr,
};

std::string_view algorithm_id(SequentialAlgorithm algorithm);
SequentialAlgorithm parse_algorithm(std::string_view id);

struct SequentialDetectorConfig {
  SequentialAlgorithm algorithm = SequentialAlgorithm::kEnergyCusum;
  std::size_t glr_window = 200;
  std::size_t m_star = 50;
  Theta1Form theta1_form = Theta1Form::kPrinted;
  MglrScore mglr_score = MglrScore::kLikelihood;
  bool mglr_reverse = false;

  void validate() const;
};

/// Builds a node detector. design holds the powers the node assumes known, where the
/// algorithm uses them.
std::unique_ptr<NodeDetector> make_node_detector(const SequentialDetectorConfig& cfg,
                                                 const OfdmParams& params,
                                                 const NodeScenario& design);

}  // namespace ofdmsense
