#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ofdmsense/signal_model.hpp"

namespace ofdmsense {

/// Fixed-sample-size detector variants. String ids: "cp.aligned", "cp.full",
/// "cp.offset-est", "cp.abs", "energy".
enum class SnapshotDetector {
  kCpAligned,    ///< Re R over CP windows at a known symbol boundary
  kCpFull,       ///< Re of the lag-l_d correlation over every sample
  kCpTimingEst,  ///< Re R at the timing offset maximizing Re R(theta)
  kCpAbs,        ///< |R|^2, rotation invariant (frequency offset)
  kEnergy,       ///< mean |x|^2
};

std::string_view detector_id(SnapshotDetector detector);
SnapshotDetector parse_snapshot_detector(std::string_view id);

enum class Hypothesis { kH0, kH1 };

/// Normalized lag-l_d CP correlation R and the number of products it averages.
struct CpStatistic {
  Complex r;
  std::size_t n_terms = 0;

  double r_r() const { return r.real(); }
  double r_i() const { return r.imag(); }
};

struct OffsetEstimates {
  std::size_t theta_hat = 0;
  double phi_hat = 0.0;  ///< in (-0.5, 0.5]
};

struct IqEstimates {
  double eps_hat = 0.0;
  double dphi_hat = 0.0;  ///< radians, |dphi_hat| <= pi/4
  bool clamped = false;   ///< |2 delta| exceeded 1 and was clamped
};

struct SnapshotVerdict {
  double statistic = 0.0;
  double threshold = 0.0;
  Hypothesis decision = Hypothesis::kH0;
};

/// R = 1/(m l_c) sum_j sum_i x(j l_s + i) conj(x(j l_s + i + l_d)), symbol boundary at 0.
CpStatistic cp_statistic_aligned(std::span<const Complex> x, const OfdmParams& params,
                                 std::size_t m);

/// Re{1/(m l_s) sum_{i < m l_s} x(i) conj(x(i + l_d))}; needs m l_s + l_d samples.
double cp_statistic_full(std::span<const Complex> x, const OfdmParams& params, std::size_t m);

/// R(theta) / (m l_c) for every candidate boundary theta in [0, l_s). Needs (m+1) l_s samples.
std::vector<Complex> cp_offset_profile(std::span<const Complex> x, const OfdmParams& params,
                                       std::size_t m);

/// Timing MLE: argmax over theta of Re R(theta) - omega P(theta). omega = 0 is the
/// simplified estimator that needs no power knowledge. Ties go to the smallest theta.
std::size_t estimate_timing_offset(std::span<const Complex> x, const OfdmParams& params,
                                   std::size_t m, double omega = 0.0);

/// Aligned CP statistic with every window start shifted by theta_hat.
CpStatistic cp_statistic_at_offset(std::span<const Complex> x, const OfdmParams& params,
                                   std::size_t m, std::size_t theta_hat);

/// phi_hat = -arg(R) / 2 pi. Throws DegenerateInputError when R == 0.
double estimate_frequency_offset(const CpStatistic& stat);

/// theta_hat = argmax |R(theta)|, phi_hat from the phase of R(theta_hat).
OffsetEstimates estimate_joint_offsets(std::span<const Complex> x, const OfdmParams& params,
                                       std::size_t m);

/// Amplitude imbalance from the I/Q power ratio; phase imbalance from the I/Q
/// cross-correlation of the amplitude-corrected samples.
IqEstimates estimate_iq_imbalance(std::span<const Complex> x);

/// Same estimator from accumulated sums of x_r^2, x_i^2 and x_r x_i.
IqEstimates iq_estimates_from_moments(double srr, double sii, double sri);

/// Amplitude correction followed by the 2x2 phase-correction mapping.
SampleBlock compensate_iq(std::span<const Complex> x, const IqEstimates& est);
void compensate_iq_in_place(std::span<Complex> x, const IqEstimates& est);

/// Mean of |x|^2.
double estimate_noise_power(std::span<const Complex> x);

/// V = 1/(m l_s) sum |x(i)|^2 over the first m l_s samples.
double energy_statistic(std::span<const Complex> x, const OfdmParams& params, std::size_t m);

/// Null-hypothesis distribution of a scalar statistic.
struct NullModel {
  enum class Kind { kGaussian, kExponential, kGamma };
  Kind kind = Kind::kGaussian;
  double p1 = 0.0;  ///< mean (Gaussian, exponential) or shape (gamma)
  double p2 = 1.0;  ///< standard deviation (Gaussian) or scale (gamma)

  static NullModel gaussian(double mean, double sd) { return {Kind::kGaussian, mean, sd}; }
  static NullModel exponential(double mean) { return {Kind::kExponential, mean, 0.0}; }
  static NullModel gamma(double shape, double scale) { return {Kind::kGamma, shape, scale}; }
};

/// lambda with P(statistic > lambda | H0) == target_pfa under the model.
double threshold_for_pfa(const NullModel& model, double target_pfa);

/// P(statistic > lambda | H0) under the model.
double null_exceedance(const NullModel& model, double lambda);

struct SnapshotConfig {
  std::size_t m = 100;
  SnapshotDetector detector = SnapshotDetector::kCpAligned;
  bool compensate_iq = false;
  /// Normalize the statistic by the estimated noise power so the threshold is scale free.
  bool estimate_noise = false;
  /// cp.abs only: search (theta, phi) jointly instead of using the aligned windows.
  bool estimate_offsets = false;
  double target_pfa = 0.05;

  void validate() const;
  /// Samples the detector consumes from the receiver stream.
  std::size_t required_samples(const OfdmParams& params) const;
};

/// Scalar decision statistic for one observation; H1 is declared when it exceeds lambda.
double snapshot_statistic(const SnapshotConfig& cfg, const OfdmParams& params,
                          std::span<const Complex> x);

/// Closed-form null model of snapshot_statistic, when one exists. assumed_sigma_w2 is the
/// noise power the receiver designs for (worst case under noise uncertainty); known_iq
/// carries IQ parameters the receiver knows but does not compensate. Estimator-composed
/// statistics (timing search, IQ compensation) return nullopt.
std::optional<NullModel> analytic_null_model(const SnapshotConfig& cfg, const OfdmParams& params,
                                             double assumed_sigma_w2,
                                             const ImpairmentSpec& known_iq = {});

/// One receiver observation of cfg.required_samples under the given hypothesis.
SampleBlock snapshot_observation(const SnapshotConfig& cfg, const OfdmParams& params,
                                 const NodeScenario& scen, const ImpairmentSpec& imp,
                                 Hypothesis truth, Rng& rng);

SnapshotVerdict decide(double statistic, double threshold);

/// IQ compensation, noise-power normalization, offset estimation, statistic and comparison
/// against threshold, in that order.
SnapshotVerdict run_snapshot_pipeline(const SnapshotConfig& cfg, const OfdmParams& params,
                                      const NodeScenario& scen, const ImpairmentSpec& imp,
                                      Hypothesis truth, double threshold, Rng& rng);

}  // namespace ofdmsense
