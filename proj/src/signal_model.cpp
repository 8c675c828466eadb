#include "ofdmsense/signal_model.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include <fftw3.h>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

namespace {

// Plans are created once per size; fftw_execute_dft on an existing plan is thread-safe.
fftw_plan backward_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<Complex> scratch(n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, plan);
  return plan;
}

void modulate_into(const OfdmParams& params, std::span<Complex> subcarriers, Complex* out) {
  const std::size_t l_d = params.l_d;
  const std::size_t l_c = params.l_c;
  auto* buf = reinterpret_cast<fftw_complex*>(subcarriers.data());
  fftw_execute_dft(backward_plan(l_d), buf, buf);
  const double scale = 1.0 / std::sqrt(static_cast<double>(l_d));
  for (std::size_t k = 0; k < l_d; ++k) out[l_c + k] = subcarriers[k] * scale;
  for (std::size_t k = 0; k < l_c; ++k) out[k] = out[l_d + k];
}

void fill_qpsk(Rng& rng, std::span<Complex> out) {
  constexpr double a = 0.70710678118654752440;
  std::uint64_t bits = 0;
  int left = 0;
  for (auto& s : out) {
    if (left == 0) {
      bits = rng();
      left = 32;
    }
    s = {(bits & 1U) ? a : -a, (bits & 2U) ? a : -a};
    bits >>= 2;
    --left;
  }
}

}  // namespace

void OfdmParams::validate() const {
  if (l_c < 1 || l_c >= l_d) {
    throw ParameterError("OfdmParams: require 1 <= l_c < l_d (l_d=" + std::to_string(l_d) +
                         ", l_c=" + std::to_string(l_c) + ")");
  }
}

void NodeScenario::validate() const {
  if (!(sigma_w2 > 0.0)) throw ParameterError("NodeScenario: sigma_w2 must be positive");
  if (!(sigma_s2 >= 0.0)) throw ParameterError("NodeScenario: sigma_s2 must be nonnegative");
}

NodeScenario NodeScenario::from_snr_db(double sigma_w2, double snr_db) {
  return {sigma_w2, sigma_w2 * std::pow(10.0, snr_db / 10.0)};
}

Complex ImpairmentSpec::iq_alpha() const {
  return {std::cos(iq_phase), iq_epsilon * std::sin(iq_phase)};
}

Complex ImpairmentSpec::iq_beta() const {
  return {iq_epsilon * std::cos(iq_phase), -std::sin(iq_phase)};
}

void ImpairmentSpec::validate(const OfdmParams& params) const {
  if (timing_offset >= params.l_s()) {
    throw ParameterError("ImpairmentSpec: timing_offset must be below l_s");
  }
  if (!(noise_uncertainty >= 1.0)) {
    throw ParameterError("ImpairmentSpec: noise_uncertainty must be >= 1");
  }
  if (std::abs(iq_phase) > kPi / 4.0 + 1e-12) {
    throw ParameterError("ImpairmentSpec: |iq_phase| must not exceed pi/4");
  }
}

void ChangeModel::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) throw ParameterError("ChangeModel: rho must lie in (0, 1]");
  if (horizon < 1) throw ParameterError("ChangeModel: horizon must be >= 1");
}

SampleBlock modulate_ofdm_symbol(const OfdmParams& params, std::span<const Complex> subcarriers) {
  params.validate();
  if (subcarriers.size() != params.l_d) {
    throw LengthError("modulate_ofdm_symbol: expected l_d subcarrier values");
  }
  SampleBlock work(subcarriers.begin(), subcarriers.end());
  SampleBlock out(params.l_s());
  modulate_into(params, work, out.data());
  return out;
}

SampleBlock generate_ofdm_symbol(const OfdmParams& params, Rng& rng) {
  params.validate();
  SampleBlock work(params.l_d);
  fill_qpsk(rng, work);
  SampleBlock out(params.l_s());
  modulate_into(params, work, out.data());
  return out;
}

SampleBlock emit_primary_stream(const OfdmParams& params, std::size_t n_symbols, Rng& rng) {
  params.validate();
  const std::size_t l_s = params.l_s();
  SampleBlock out(n_symbols * l_s);
  SampleBlock work(params.l_d);
  for (std::size_t s = 0; s < n_symbols; ++s) {
    fill_qpsk(rng, work);
    modulate_into(params, work, out.data() + s * l_s);
  }
  return out;
}

SampleBlock apply_channel(std::span<const Complex> signal, const NodeScenario& scen,
                          std::size_t change_slot, const OfdmParams& params, Rng& rng) {
  scen.validate();
  const std::size_t l_s = params.l_s();
  const std::size_t first_signal =
      change_slot == 0 ? 0 : (change_slot - 1) * l_s;  // index of first post-change sample
  const double amp = std::sqrt(scen.sigma_s2);
  SampleBlock out(signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k) {
    Complex x = complex_normal(rng, scen.sigma_w2);
    if (k >= first_signal) x += amp * signal[k];
    out[k] = x;
  }
  return out;
}

SampleBlock apply_timing_offset(std::span<const Complex> stream, std::size_t theta,
                                const OfdmParams& params) {
  const std::size_t l_s = params.l_s();
  if (theta >= l_s) throw ParameterError("apply_timing_offset: theta must lie in [0, l_s)");
  const std::size_t skip = (l_s - theta) % l_s;
  if (skip >= stream.size()) return {};
  return SampleBlock(stream.begin() + static_cast<std::ptrdiff_t>(skip), stream.end());
}

SampleBlock apply_frequency_offset(std::span<const Complex> stream, double phi, std::size_t l_d,
                                   std::size_t start_index) {
  SampleBlock out(stream.begin(), stream.end());
  if (phi == 0.0) return out;
  const double w = 2.0 * kPi * phi / static_cast<double>(l_d);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] *= std::polar(1.0, w * static_cast<double>(k + start_index));
  }
  return out;
}

SampleBlock apply_iq_imbalance(std::span<const Complex> stream, double eps, double dphi) {
  ImpairmentSpec imp;
  imp.iq_epsilon = eps;
  imp.iq_phase = dphi;
  const Complex alpha = imp.iq_alpha();
  const Complex beta = imp.iq_beta();
  SampleBlock out(stream.size());
  for (std::size_t k = 0; k < stream.size(); ++k) {
    out[k] = alpha * stream[k] + beta * std::conj(stream[k]);
  }
  return out;
}

double draw_noise_power(double nominal, double delta, Rng& rng) {
  if (!(delta >= 1.0)) throw ParameterError("draw_noise_power: delta must be >= 1");
  if (delta == 1.0) return nominal;
  const double lo = std::log(nominal / delta);
  const double hi = std::log(nominal * delta);
  return std::exp(lo + (hi - lo) * uniform01(rng));
}

double realize_noise_power(double nominal, const ImpairmentSpec& imp, Rng& rng) {
  switch (imp.noise_draw) {
    case NoiseDraw::kNominal:
      return nominal;
    case NoiseDraw::kWorstCase:
      return nominal * imp.noise_uncertainty;
    case NoiseDraw::kLogUniform:
      break;
  }
  return draw_noise_power(nominal, imp.noise_uncertainty, rng);
}

std::optional<std::size_t> draw_change_time(const ChangeModel& model, Rng& rng) {
  model.validate();
  std::size_t t = 1;
  if (model.rho < 1.0) {
    std::geometric_distribution<std::size_t> geom(model.rho);
    t = geom(rng) + 1;
  }
  t += model.min_pre_change;
  if (t > model.horizon) return std::nullopt;
  return t;
}

NodeStream::NodeStream(const OfdmParams& params, const NodeScenario& scen,
                       const ImpairmentSpec& imp, std::size_t change_slot, Rng rng)
    : params_(params),
      scen_(scen),
      imp_(imp),
      change_slot_(change_slot),
      rng_(std::move(rng)),
      alpha_(imp.iq_alpha()),
      beta_(imp.iq_beta()),
      signal_scale_(std::sqrt(scen.sigma_s2)) {
  params_.validate();
  scen_.validate();
  imp_.validate(params_);
  // Receiver lead-in: the tail of true slot 0, which carries signal only when the
  // primary is always on.
  const std::size_t l_s = params_.l_s();
  const std::size_t lead = imp_.timing_offset;
  pending_.reserve(3 * l_s);
  if (lead > 0) {
    SampleBlock slot0(l_s, Complex{});
    if (change_slot_ == 0) {
      SampleBlock work(params_.l_d);
      fill_qpsk(rng_, work);
      modulate_into(params_, work, slot0.data());
    }
    for (std::size_t k = l_s - lead; k < l_s; ++k) {
      pending_.push_back(signal_scale_ * slot0[k] + complex_normal(rng_, scen_.sigma_w2));
    }
  }
}

void NodeStream::produce_true_slot() {
  const std::size_t l_s = params_.l_s();
  const bool on = change_slot_ == 0 || next_true_slot_ >= change_slot_;
  const std::size_t base = pending_.size();
  pending_.resize(base + l_s);
  if (on) {
    work_.resize(params_.l_d);
    fill_qpsk(rng_, work_);
    modulate_into(params_, work_, pending_.data() + base);
    for (std::size_t k = 0; k < l_s; ++k) {
      pending_[base + k] = signal_scale_ * pending_[base + k] + complex_normal(rng_, scen_.sigma_w2);
    }
  } else {
    for (std::size_t k = 0; k < l_s; ++k) pending_[base + k] = complex_normal(rng_, scen_.sigma_w2);
  }
  ++next_true_slot_;
}

void NodeStream::next_into(std::size_t n, SampleBlock& out) {
  while (pending_.size() - pending_head_ < n) {
    if (pending_head_ > 0) {
      pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pending_head_));
      pending_head_ = 0;
    }
    produce_true_slot();
  }
  out.resize(n);
  const bool rotate = imp_.freq_offset != 0.0;
  const bool iq = imp_.has_iq();
  const double w = 2.0 * kPi * imp_.freq_offset / static_cast<double>(params_.l_d);
  for (std::size_t k = 0; k < n; ++k) {
    Complex x = pending_[pending_head_ + k];
    if (rotate) x *= std::polar(1.0, w * static_cast<double>(position_ + k));
    if (iq) x = alpha_ * x + beta_ * std::conj(x);
    out[k] = x;
  }
  pending_head_ += n;
  position_ += n;
}

SampleBlock NodeStream::next(std::size_t n) {
  SampleBlock out;
  next_into(n, out);
  return out;
}

}  // namespace ofdmsense
