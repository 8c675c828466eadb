#include "ofdmsense/snapshot_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

namespace {

void require_samples(std::span<const Complex> x, std::size_t needed, const char* what) {
  if (x.size() < needed) {
    throw LengthError(std::string(what) + ": need " + std::to_string(needed) + " samples, got " +
                      std::to_string(x.size()));
  }
}

void require_m(std::size_t m) {
  if (m < 1) throw ParameterError("snapshot statistic: m must be >= 1");
}

// Folded lag-l_d products: q[r] = sum_j x(j l_s + r) conj(x(j l_s + r + l_d)), r < l_s + l_c - 1.
std::vector<Complex> folded_products(std::span<const Complex> x, const OfdmParams& params,
                                     std::size_t m) {
  const std::size_t l_s = params.l_s();
  const std::size_t span_len = l_s + params.l_c - 1;
  std::vector<Complex> q(span_len, Complex{});
  for (std::size_t j = 0; j < m; ++j) {
    const Complex* base = x.data() + j * l_s;
    for (std::size_t r = 0; r < span_len; ++r) q[r] += base[r] * std::conj(base[r + params.l_d]);
  }
  return q;
}

std::vector<double> folded_power(std::span<const Complex> x, const OfdmParams& params,
                                 std::size_t m) {
  const std::size_t l_s = params.l_s();
  const std::size_t span_len = l_s + params.l_c - 1;
  std::vector<double> q(span_len, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const Complex* base = x.data() + j * l_s;
    for (std::size_t r = 0; r < span_len; ++r) {
      q[r] += 0.5 * (std::norm(base[r]) + std::norm(base[r + params.l_d]));
    }
  }
  return q;
}

template <typename T>
std::vector<T> window_sums(const std::vector<T>& q, std::size_t l_c, std::size_t n_out) {
  std::vector<T> out(n_out);
  T acc{};
  for (std::size_t i = 0; i < l_c; ++i) acc += q[i];
  out[0] = acc;
  for (std::size_t t = 1; t < n_out; ++t) {
    acc += q[t + l_c - 1] - q[t - 1];
    out[t] = acc;
  }
  return out;
}

}  // namespace

std::string_view detector_id(SnapshotDetector detector) {
  switch (detector) {
    case SnapshotDetector::kCpAligned:
      return "cp.aligned";
    case SnapshotDetector::kCpFull:
      return "cp.full";
    case SnapshotDetector::kCpTimingEst:
      return "cp.offset-est";
    case SnapshotDetector::kCpAbs:
      return "cp.abs";
    case SnapshotDetector::kEnergy:
      return "energy";
  }
  return "?";
}

SnapshotDetector parse_snapshot_detector(std::string_view id) {
  for (auto d : {SnapshotDetector::kCpAligned, SnapshotDetector::kCpFull,
                 SnapshotDetector::kCpTimingEst, SnapshotDetector::kCpAbs,
                 SnapshotDetector::kEnergy}) {
    if (detector_id(d) == id) return d;
  }
  throw ParameterError("unknown snapshot detector id '" + std::string(id) + "'");
}

CpStatistic cp_statistic_aligned(std::span<const Complex> x, const OfdmParams& params,
                                 std::size_t m) {
  return cp_statistic_at_offset(x, params, m, 0);
}

double cp_statistic_full(std::span<const Complex> x, const OfdmParams& params, std::size_t m) {
  require_m(m);
  const std::size_t n = m * params.l_s();
  require_samples(x, n + params.l_d, "cp_statistic_full");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex& a = x[i];
    const Complex& b = x[i + params.l_d];
    acc += a.real() * b.real() + a.imag() * b.imag();
  }
  return acc / static_cast<double>(n);
}

std::vector<Complex> cp_offset_profile(std::span<const Complex> x, const OfdmParams& params,
                                       std::size_t m) {
  require_m(m);
  const std::size_t l_s = params.l_s();
  require_samples(x, (m + 1) * l_s, "cp_offset_profile");
  auto q = folded_products(x, params, m);
  auto r = window_sums(q, params.l_c, l_s);
  const double norm = 1.0 / static_cast<double>(m * params.l_c);
  for (auto& v : r) v *= norm;
  return r;
}

std::size_t estimate_timing_offset(std::span<const Complex> x, const OfdmParams& params,
                                   std::size_t m, double omega) {
  const auto profile = cp_offset_profile(x, params, m);
  std::vector<double> penalty;
  if (omega != 0.0) {
    penalty = window_sums(folded_power(x, params, m), params.l_c, params.l_s());
    const double norm = 1.0 / static_cast<double>(m * params.l_c);
    for (auto& p : penalty) p *= norm;
  }
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < profile.size(); ++t) {
    double v = profile[t].real();
    if (omega != 0.0) v -= omega * penalty[t];
    if (v > best_val) {
      best_val = v;
      best = t;
    }
  }
  return best;
}

CpStatistic cp_statistic_at_offset(std::span<const Complex> x, const OfdmParams& params,
                                   std::size_t m, std::size_t theta_hat) {
  require_m(m);
  const std::size_t l_s = params.l_s();
  if (theta_hat >= l_s) throw ParameterError("cp_statistic_at_offset: theta_hat must be < l_s");
  require_samples(x, m * l_s + theta_hat, "cp_statistic_at_offset");
  Complex acc{};
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t base = j * l_s + theta_hat;
    for (std::size_t i = 0; i < params.l_c; ++i) {
      acc += x[base + i] * std::conj(x[base + i + params.l_d]);
    }
  }
  const std::size_t n = m * params.l_c;
  return {acc / static_cast<double>(n), n};
}

double estimate_frequency_offset(const CpStatistic& stat) {
  if (stat.r == Complex{}) {
    throw DegenerateInputError("estimate_frequency_offset: R == 0 has no phase");
  }
  double phi = -std::arg(stat.r) / (2.0 * kPi);
  if (phi <= -0.5) phi += 1.0;
  return phi;
}

OffsetEstimates estimate_joint_offsets(std::span<const Complex> x, const OfdmParams& params,
                                       std::size_t m) {
  const auto profile = cp_offset_profile(x, params, m);
  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t t = 0; t < profile.size(); ++t) {
    const double v = std::norm(profile[t]);
    if (v > best_val) {
      best_val = v;
      best = t;
    }
  }
  OffsetEstimates est;
  est.theta_hat = best;
  est.phi_hat = profile[best] == Complex{} ? 0.0
                                           : estimate_frequency_offset({profile[best], m * params.l_c});
  return est;
}

IqEstimates estimate_iq_imbalance(std::span<const Complex> x) {
  if (x.empty()) throw DegenerateInputError("estimate_iq_imbalance: empty input");
  double srr = 0.0;
  double sii = 0.0;
  double sri = 0.0;
  for (const auto& v : x) {
    srr += v.real() * v.real();
    sii += v.imag() * v.imag();
    sri += v.real() * v.imag();
  }
  return iq_estimates_from_moments(srr, sii, sri);
}

IqEstimates iq_estimates_from_moments(double srr, double sii, double sri) {
  if (!(sii > 0.0) || !(srr > 0.0)) {
    throw DegenerateInputError("estimate_iq_imbalance: zero in-phase or quadrature energy");
  }
  IqEstimates est;
  const double kappa = std::sqrt(srr / sii);
  est.eps_hat = (kappa - 1.0) / (kappa + 1.0);
  // Phase statistic on the amplitude-corrected branches.
  const double gr = 1.0 + est.eps_hat;
  const double gi = 1.0 - est.eps_hat;
  const double cross = sri / (gr * gi);
  const double power = srr / (gr * gr) + sii / (gi * gi);
  double two_delta = -2.0 * cross / power;
  if (two_delta > 1.0 || two_delta < -1.0) {
    two_delta = std::clamp(two_delta, -1.0, 1.0);
    est.clamped = true;
  }
  est.dphi_hat = 0.5 * std::asin(two_delta);
  return est;
}

SampleBlock compensate_iq(std::span<const Complex> x, const IqEstimates& est) {
  SampleBlock out(x.begin(), x.end());
  compensate_iq_in_place(out, est);
  return out;
}

void compensate_iq_in_place(std::span<Complex> x, const IqEstimates& est) {
  if (!(std::abs(est.eps_hat) < 1.0)) {
    throw ParameterError("compensate_iq: |eps_hat| must be below 1");
  }
  const double gr = 1.0 / (1.0 + est.eps_hat);
  const double gi = 1.0 / (1.0 - est.eps_hat);
  const double c = std::cos(est.dphi_hat);
  const double s = std::sin(est.dphi_hat);
  for (auto& v : x) {
    const double zr = v.real() * gr;
    const double zi = v.imag() * gi;
    v = {c * zr + s * zi, s * zr + c * zi};
  }
}

double estimate_noise_power(std::span<const Complex> x) {
  if (x.empty()) throw DegenerateInputError("estimate_noise_power: empty input");
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

double energy_statistic(std::span<const Complex> x, const OfdmParams& params, std::size_t m) {
  require_m(m);
  const std::size_t n = m * params.l_s();
  require_samples(x, n, "energy_statistic");
  return estimate_noise_power(x.first(n));
}

double threshold_for_pfa(const NullModel& model, double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw ParameterError("threshold_for_pfa: target_pfa must lie in (0, 1)");
  }
  switch (model.kind) {
    case NullModel::Kind::kGaussian: {
      boost::math::normal_distribution<double> dist(model.p1, model.p2);
      return boost::math::quantile(boost::math::complement(dist, target_pfa));
    }
    case NullModel::Kind::kExponential:
      return -model.p1 * std::log(target_pfa);
    case NullModel::Kind::kGamma: {
      boost::math::gamma_distribution<double> dist(model.p1, model.p2);
      return boost::math::quantile(boost::math::complement(dist, target_pfa));
    }
  }
  throw ParameterError("threshold_for_pfa: unknown model");
}

double null_exceedance(const NullModel& model, double lambda) {
  switch (model.kind) {
    case NullModel::Kind::kGaussian: {
      boost::math::normal_distribution<double> dist(model.p1, model.p2);
      return boost::math::cdf(boost::math::complement(dist, lambda));
    }
    case NullModel::Kind::kExponential:
      return lambda <= 0.0 ? 1.0 : std::exp(-lambda / model.p1);
    case NullModel::Kind::kGamma: {
      if (lambda <= 0.0) return 1.0;
      boost::math::gamma_distribution<double> dist(model.p1, model.p2);
      return boost::math::cdf(boost::math::complement(dist, lambda));
    }
  }
  return 0.0;
}

void SnapshotConfig::validate() const {
  if (m < 1) throw ParameterError("SnapshotConfig: m must be >= 1");
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw ParameterError("SnapshotConfig: target_pfa must lie in (0, 1)");
  }
  if (detector == SnapshotDetector::kEnergy && estimate_noise) {
    throw ParameterError("SnapshotConfig: the energy detector cannot normalize by its own statistic");
  }
  if (estimate_offsets && detector != SnapshotDetector::kCpAbs) {
    throw ParameterError("SnapshotConfig: joint offset search applies to cp.abs only");
  }
}

std::size_t SnapshotConfig::required_samples(const OfdmParams& params) const {
  if (detector == SnapshotDetector::kEnergy) return m * params.l_s();
  return (m + 1) * params.l_s();
}

double snapshot_statistic(const SnapshotConfig& cfg, const OfdmParams& params,
                          std::span<const Complex> x) {
  cfg.validate();
  SampleBlock compensated;
  if (cfg.compensate_iq) {
    const std::size_t n_est = std::min(x.size(), cfg.m * params.l_s());
    compensated = compensate_iq(x, estimate_iq_imbalance(x.first(n_est)));
    x = compensated;
  }
  double scale = 1.0;
  if (cfg.estimate_noise) {
    require_samples(x, cfg.m * params.l_s(), "snapshot_statistic");
    scale = 1.0 / estimate_noise_power(x.first(cfg.m * params.l_s()));
  }
  switch (cfg.detector) {
    case SnapshotDetector::kCpAligned:
      return scale * cp_statistic_aligned(x, params, cfg.m).r_r();
    case SnapshotDetector::kCpFull:
      return scale * cp_statistic_full(x, params, cfg.m);
    case SnapshotDetector::kCpTimingEst: {
      const std::size_t theta = estimate_timing_offset(x, params, cfg.m);
      return scale * cp_statistic_at_offset(x, params, cfg.m, theta).r_r();
    }
    case SnapshotDetector::kCpAbs: {
      CpStatistic stat;
      if (cfg.estimate_offsets) {
        const auto est = estimate_joint_offsets(x, params, cfg.m);
        stat = cp_statistic_at_offset(x, params, cfg.m, est.theta_hat);
      } else {
        stat = cp_statistic_aligned(x, params, cfg.m);
      }
      return scale * scale * std::norm(stat.r);
    }
    case SnapshotDetector::kEnergy:
      return energy_statistic(x, params, cfg.m);
  }
  throw ParameterError("snapshot_statistic: unknown detector");
}

std::optional<NullModel> analytic_null_model(const SnapshotConfig& cfg, const OfdmParams& params,
                                             double assumed_sigma_w2,
                                             const ImpairmentSpec& known_iq) {
  cfg.validate();
  if (cfg.compensate_iq || cfg.estimate_offsets ||
      cfg.detector == SnapshotDetector::kCpTimingEst) {
    return std::nullopt;
  }
  const double g = 1.0 + known_iq.iq_epsilon * known_iq.iq_epsilon;  // power gain of the IQ map
  const double improper = 4.0 * std::norm(known_iq.iq_c1());
  const double var_factor = g * g + improper;
  // With noise normalization the statistic behaves as if the pre-IQ noise power were 1/g.
  const double s2 = cfg.estimate_noise ? 1.0 / g : assumed_sigma_w2;
  const double m = static_cast<double>(cfg.m);
  const double l_c = static_cast<double>(params.l_c);
  const double l_s = static_cast<double>(params.l_s());
  switch (cfg.detector) {
    case SnapshotDetector::kCpAligned:
      return NullModel::gaussian(0.0, s2 * std::sqrt(var_factor / (2.0 * m * l_c)));
    case SnapshotDetector::kCpFull:
      return NullModel::gaussian(0.0, s2 * std::sqrt(var_factor / (2.0 * m * l_s)));
    case SnapshotDetector::kCpAbs:
      if (known_iq.has_iq()) return std::nullopt;
      return NullModel::exponential(s2 * s2 / (m * l_c));
    case SnapshotDetector::kEnergy: {
      const double n = m * l_s;
      if (known_iq.has_iq()) {
        // Gamma matched to the IQ-aware mean and variance; keeps the right-skew of V.
        const double mean = g * s2;
        const double var = s2 * s2 * var_factor / n;
        return NullModel::gamma(mean * mean / var, var / mean);
      }
      return NullModel::gamma(n, s2 / n);
    }
    case SnapshotDetector::kCpTimingEst:
      break;
  }
  return std::nullopt;
}

SampleBlock snapshot_observation(const SnapshotConfig& cfg, const OfdmParams& params,
                                 const NodeScenario& scen, const ImpairmentSpec& imp,
                                 Hypothesis truth, Rng& rng) {
  NodeScenario realized = scen;
  realized.sigma_w2 = realize_noise_power(scen.sigma_w2, imp, rng);
  if (truth == Hypothesis::kH0) realized.sigma_s2 = 0.0;
  const std::size_t change = truth == Hypothesis::kH1 ? 0 : std::numeric_limits<std::size_t>::max();
  NodeStream stream(params, realized, imp, change, Rng(rng()));
  return stream.next(cfg.required_samples(params));
}

SnapshotVerdict decide(double statistic, double threshold) {
  return {statistic, threshold, statistic > threshold ? Hypothesis::kH1 : Hypothesis::kH0};
}

SnapshotVerdict run_snapshot_pipeline(const SnapshotConfig& cfg, const OfdmParams& params,
                                      const NodeScenario& scen, const ImpairmentSpec& imp,
                                      Hypothesis truth, double threshold, Rng& rng) {
  const auto x = snapshot_observation(cfg, params, scen, imp, truth, rng);
  return decide(snapshot_statistic(cfg, params, x), threshold);
}

}  // namespace ofdmsense
