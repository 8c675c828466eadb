#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ofdmsense/random.hpp"

namespace ofdmsense {

using Complex = std::complex<double>;

/// Ordered complex baseband samples.
using SampleBlock = std::vector<Complex>;

inline constexpr double kPi = 3.14159265358979323846;

/// OFDM framing. The symbol length is always l_d + l_c.
struct OfdmParams {
  std::size_t l_d = 64;             ///< useful symbol length (subcarriers)
  std::size_t l_c = 16;             ///< cyclic prefix length
  double delta_f = 10.0e6 / 64.0;   ///< carrier spacing in Hz, informational

  std::size_t l_s() const { return l_d + l_c; }
  void validate() const;
};

/// Per-node power budget; the channel gain is folded into sigma_s2.
struct NodeScenario {
  double sigma_w2 = 20.0;
  double sigma_s2 = 2.0;

  double snr() const { return sigma_s2 / sigma_w2; }
  void validate() const;

  static NodeScenario from_snr_db(double sigma_w2, double snr_db);
};

/// How the realized noise power is picked when the level is uncertain.
enum class NoiseDraw {
  kLogUniform,  ///< log-uniform over [nominal/delta, nominal*delta], once per trial
  kNominal,     ///< realized power equals the nominal value (threshold still uses the worst case)
  kWorstCase,   ///< realized power equals nominal*delta
};

struct ImpairmentSpec {
  std::size_t timing_offset = 0;  ///< index of the symbol boundary in the receiver frame
  double freq_offset = 0.0;       ///< normalized to the carrier spacing
  double iq_epsilon = 0.0;        ///< amplitude imbalance
  double iq_phase = 0.0;          ///< phase imbalance in radians
  double noise_uncertainty = 1.0; ///< delta >= 1
  NoiseDraw noise_draw = NoiseDraw::kLogUniform;

  Complex iq_alpha() const;
  Complex iq_beta() const;
  Complex iq_c1() const { return iq_alpha() * std::conj(iq_beta()); }
  bool has_iq() const { return iq_epsilon != 0.0 || iq_phase != 0.0; }
  void validate(const OfdmParams& params) const;
};

/// Geometric change time over OFDM-symbol slots.
struct ChangeModel {
  double rho = 0.004;
  std::size_t horizon = 2500;
  /// Slots guaranteed to be pre-change before the geometric draw starts counting.
  std::size_t min_pre_change = 0;

  void validate() const;
};

/// Modulates one symbol from explicit subcarrier values (size l_d). Output has the
/// cyclic prefix prepended and is scaled by 1/sqrt(l_d).
SampleBlock modulate_ofdm_symbol(const OfdmParams& params, std::span<const Complex> subcarriers);

/// Unit-power QPSK symbol with cyclic prefix (l_s samples, unit average power).
SampleBlock generate_ofdm_symbol(const OfdmParams& params, Rng& rng);

/// Concatenation of independent symbols.
SampleBlock emit_primary_stream(const OfdmParams& params, std::size_t n_symbols, Rng& rng);

/// Received-signal model: slot s (1-based, l_s samples each) carries noise only for
/// s < change_slot and sqrt(sigma_s2)*signal + noise from change_slot onward.
SampleBlock apply_channel(std::span<const Complex> signal, const NodeScenario& scen,
                          std::size_t change_slot, const OfdmParams& params, Rng& rng);

/// Receiver frame whose symbol boundary sits at index theta:
/// output[k] = input[k + (l_s - theta) mod l_s].
SampleBlock apply_timing_offset(std::span<const Complex> stream, std::size_t theta,
                                const OfdmParams& params);

/// output[k] = input[k] * exp(j 2 pi phi (k + start_index) / l_d)
SampleBlock apply_frequency_offset(std::span<const Complex> stream, double phi, std::size_t l_d,
                                   std::size_t start_index = 0);

/// output = alpha * x + beta * conj(x)
SampleBlock apply_iq_imbalance(std::span<const Complex> stream, double eps, double dphi);

double draw_noise_power(double nominal, double delta, Rng& rng);

/// Realized noise power for a trial, following imp.noise_draw.
double realize_noise_power(double nominal, const ImpairmentSpec& imp, Rng& rng);

/// Geometric change slot T >= 1 (shifted by min_pre_change); nullopt when T > horizon.
std::optional<std::size_t> draw_change_time(const ChangeModel& model, Rng& rng);

/// Lazily generated receiver stream for one node: OFDM symbols switched on at a change
/// slot, AWGN, timing offset, frequency offset and IQ imbalance, in that order.
///
/// True slot s (1-based) carries signal iff s >= change_slot; change_slot == 0 means the
/// primary is always on. The receiver frame leads the true frame by timing_offset samples,
/// which are drawn from a pre-change "slot 0".
class NodeStream {
public:
  NodeStream(const OfdmParams& params, const NodeScenario& scen, const ImpairmentSpec& imp,
             std::size_t change_slot, Rng rng);

  /// Next n receiver samples.
  SampleBlock next(std::size_t n);
  void next_into(std::size_t n, SampleBlock& out);

  /// Receiver samples consumed so far.
  std::size_t position() const { return position_; }

private:
  void produce_true_slot();

  OfdmParams params_;
  NodeScenario scen_;
  ImpairmentSpec imp_;
  std::size_t change_slot_;
  Rng rng_;
  Complex alpha_;
  Complex beta_;
  double signal_scale_;
  std::size_t next_true_slot_ = 1;
  std::size_t position_ = 0;
  SampleBlock pending_;
  std::size_t pending_head_ = 0;
  SampleBlock work_;
};

}  // namespace ofdmsense
