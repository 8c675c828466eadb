#include "ofdmsense/sequential_detect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

namespace {

void require_length(std::span<const Complex> samples, std::size_t n, const char* what) {
  if (samples.size() != n) {
    throw LengthError(std::string(what) + ": expected " + std::to_string(n) + " samples, got " +
                      std::to_string(samples.size()));
  }
}


// max_i ((pr - a_i)^2 + (pi - b_i)^2) inv_i, floored at 0.
double window_max_ratio(const double* a, const double* b, const double* inv, double pr, double pi,
                        std::size_t n) {
  double best = 0.0;
  std::size_t i = 0;
#if defined(__SSE2__)
  const __m128d vpr = _mm_set1_pd(pr);
  const __m128d vpi = _mm_set1_pd(pi);
  __m128d m0 = _mm_setzero_pd();
  __m128d m1 = _mm_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    __m128d dr = _mm_sub_pd(vpr, _mm_loadu_pd(a + i));
    __m128d di = _mm_sub_pd(vpi, _mm_loadu_pd(b + i));
    m0 = _mm_max_pd(_mm_mul_pd(_mm_add_pd(_mm_mul_pd(dr, dr), _mm_mul_pd(di, di)),
                               _mm_loadu_pd(inv + i)),
                    m0);
    dr = _mm_sub_pd(vpr, _mm_loadu_pd(a + i + 2));
    di = _mm_sub_pd(vpi, _mm_loadu_pd(b + i + 2));
    m1 = _mm_max_pd(_mm_mul_pd(_mm_add_pd(_mm_mul_pd(dr, dr), _mm_mul_pd(di, di)),
                               _mm_loadu_pd(inv + i + 2)),
                    m1);
  }
  double lanes[2];
  _mm_storeu_pd(lanes, _mm_max_pd(m0, m1));
  best = std::max(lanes[0], lanes[1]);
#endif
  for (; i < n; ++i) {
    const double dr = pr - a[i];
    const double di = pi - b[i];
    const double v = (dr * dr + di * di) * inv[i];
    best = v > best ? v : best;
  }
  return best;
}

}  // namespace

double cp_slot_statistic(std::span<const Complex> slot, const OfdmParams& params) {
  if (slot.size() < params.l_s()) throw LengthError("cp_slot_statistic: need l_s samples");
  double acc = 0.0;
  for (std::size_t i = 0; i < params.l_c; ++i) {
    const Complex& a = slot[i];
    const Complex& b = slot[i + params.l_d];
    acc += a.real() * b.real() + a.imag() * b.imag();
  }
  return acc / static_cast<double>(params.l_c);
}

double cp_llr(double r_r, double sigma_s2, double sigma_w2, std::size_t l_c) {
  if (!(sigma_w2 > 0.0)) throw ParameterError("cp_llr: sigma_w2 must be positive");
  return static_cast<double>(l_c) * (2.0 * sigma_s2 * r_r - sigma_s2 * sigma_s2) /
         (2.0 * sigma_w2 * sigma_w2);
}

double energy_slot_statistic(std::span<const Complex> slot, const OfdmParams& params) {
  require_length(slot, params.l_s(), "energy_slot_statistic");
  double acc = 0.0;
  for (const auto& v : slot) acc += std::norm(v);
  return acc / static_cast<double>(slot.size());
}

double energy_llr(double v, double sigma_s2, double sigma_w2, std::size_t n_samples) {
  if (!(sigma_w2 > 0.0) || !(sigma_s2 + sigma_w2 > 0.0) || n_samples == 0) {
    throw ParameterError("energy_llr: variances and n_samples must be positive");
  }
  const double n = static_cast<double>(n_samples);
  const double mu0 = sigma_w2;
  const double mu1 = sigma_s2 + sigma_w2;
  const double var0 = mu0 * mu0 / n;
  const double var1 = mu1 * mu1 / n;
  return 0.5 * std::log(var0 / var1) + (v - mu0) * (v - mu0) / (2.0 * var0) -
         (v - mu1) * (v - mu1) / (2.0 * var1);
}

CusumState cusum_step(CusumState state, double xi) {
  return {std::max(0.0, state.w + xi)};
}

double nonnegative_root(double a, double b, double c) {
  if (a == 0.0) {
    if (b == 0.0) return 0.0;
    return std::max(0.0, -c / b);
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  // Cancellation-free pair of roots; pick the larger.
  const double q = -0.5 * (b + std::copysign(sq, b));
  double r1 = q / a;
  double r2 = q != 0.0 ? c / q : r1;
  return std::max(0.0, std::max(r1, r2));
}

double solve_theta1_glr(double s, double sq, std::size_t k, double sigma_w2, std::size_t n_samples,
                        Theta1Form form) {
  if (k == 0) throw ParameterError("solve_theta1_glr: need at least one slot");
  const double kk = static_cast<double>(k);
  const double n = static_cast<double>(n_samples);
  const double w2 = sigma_w2;
  const double s_coef = form == Theta1Form::kExact ? n * s : s;
  const double b = 2.0 * kk * w2 + n * kk * w2 + s_coef;
  const double c = -(n * sq + n * w2 * s - kk * w2 * w2);
  return nonnegative_root(kk, b, c);
}

double solve_theta1_mglr(double s, double sq, std::size_t k, std::size_t n_samples) {
  if (k == 0) throw ParameterError("solve_theta1_mglr: need at least one slot");
  const double n = static_cast<double>(n_samples);
  return nonnegative_root(static_cast<double>(k), n * s, -n * sq);
}

double node_report(double w, double gamma, double b) { return w > gamma ? b : 0.0; }

// --- scalar CUSUMs -------------------------------------------------------------------------

CpCusum::CpCusum(const OfdmParams& params, const NodeScenario& design)
    : params_(params), design_(design) {
  params_.validate();
  design_.validate();
}

double CpCusum::step(std::span<const Complex> samples) {
  require_length(samples, params_.l_s(), "cp.cusum step");
  const double r_r = cp_slot_statistic(samples, params_);
  state_ = cusum_step(state_, cp_llr(r_r, design_.sigma_s2, design_.sigma_w2, params_.l_c));
  ++slot_;
  return state_.w;
}

EnergyCusum::EnergyCusum(const OfdmParams& params, const NodeScenario& design)
    : params_(params), design_(design) {
  params_.validate();
  design_.validate();
}

double EnergyCusum::step(std::span<const Complex> samples) {
  const double v = energy_slot_statistic(samples, params_);
  state_ = cusum_step(state_, energy_llr(v, design_.sigma_s2, design_.sigma_w2, params_.l_s()));
  ++slot_;
  return state_.w;
}

// --- offset bank ---------------------------------------------------------------------------

std::span<const Complex> CarryWindow::push(std::span<const Complex> samples, std::size_t slot) {
  const std::size_t full = params_.l_s() + params_.l_d;
  require_length(samples, samples_needed(slot), "slot capture");
  if (slot == 0) {
    window_.assign(samples.begin(), samples.end());
    return window_;
  }
  if (window_.size() != full) throw StateError("offset bank: carry from the previous slot missing");
  std::copy(window_.end() - static_cast<std::ptrdiff_t>(params_.l_d), window_.end(),
            window_.begin());
  std::copy(samples.begin(), samples.end(),
            window_.begin() + static_cast<std::ptrdiff_t>(params_.l_d));
  return window_;
}

void CarryWindow::offset_correlations(std::vector<Complex>& out) const {
  const std::size_t l_d = params_.l_d;
  const std::size_t l_c = params_.l_c;
  const std::size_t n_prod = l_d + l_c - 1;
  auto& prod = products_;
  prod.resize(n_prod);
  for (std::size_t k = 0; k < n_prod; ++k) prod[k] = window_[k] * std::conj(window_[k + l_d]);
  out.resize(l_d);
  Complex acc{};
  for (std::size_t i = 0; i < l_c; ++i) acc += prod[i];
  const double norm = 1.0 / static_cast<double>(l_c);
  out[0] = acc * norm;
  for (std::size_t m = 1; m < l_d; ++m) {
    acc += prod[m + l_c - 1] - prod[m - 1];
    out[m] = acc * norm;
  }
}

CusumBank::CusumBank(const OfdmParams& params, const NodeScenario& design)
    : params_(params), design_(design), window_(params), bank_(params.l_d, 0.0) {
  params_.validate();
  design_.validate();
}

double CusumBank::step(std::span<const Complex> samples) {
  window_.push(samples, slot_);
  window_.offset_correlations(r_);
  r_r_.resize(r_.size());
  for (std::size_t m = 0; m < r_.size(); ++m) r_r_[m] = r_[m].real();
  return step_statistics(r_r_);
}

double CusumBank::step_statistics(std::span<const double> r_r) {
  if (r_r.size() != bank_.size()) throw LengthError("cp.bank: one statistic per offset expected");
  const double s2 = design_.sigma_s2;
  const double scale = static_cast<double>(params_.l_c) / (2.0 * design_.sigma_w2 * design_.sigma_w2);
  w_ = 0.0;
  argmax_ = 0;
  for (std::size_t m = 0; m < bank_.size(); ++m) {
    const double xi = scale * (2.0 * s2 * r_r[m] - s2 * s2);
    bank_[m] = std::max(0.0, bank_[m] + xi);
    if (bank_[m] > w_) {
      w_ = bank_[m];
      argmax_ = m;
    }
  }
  ++slot_;
  return w_;
}

// --- running estimators --------------------------------------------------------------------

void RunningIqCompensator::process(std::span<Complex> samples) {
  for (const auto& v : samples) {
    srr_ += v.real() * v.real();
    sii_ += v.imag() * v.imag();
    sri_ += v.real() * v.imag();
  }
  if (srr_ > 0.0 && sii_ > 0.0) est_ = iq_estimates_from_moments(srr_, sii_, sri_);
  compensate_iq_in_place(samples, est_);
}

double RunningNoiseEstimate::update(std::span<const Complex> samples) {
  for (const auto& v : samples) sum_ += std::norm(v);
  count_ += samples.size();
  return value();
}

double RunningNoiseEstimate::value() const {
  if (count_ == 0) throw StateError("running noise estimate: no samples observed");
  return sum_ / static_cast<double>(count_);
}

// --- GLR, CP -------------------------------------------------------------------------------

GlrCp::GlrCp(const OfdmParams& params, double sigma_w2, std::size_t window, bool all_impairments)
    : params_(params),
      sigma_w2_(sigma_w2),
      window_(window),
      all_(all_impairments),
      carry_(params) {
  params_.validate();
  if (window_ < 1) throw ParameterError("cp.glr: window must be >= 1");
  if (!all_ && !(sigma_w2_ > 0.0)) throw ParameterError("cp.glr: sigma_w2 must be positive");
  const std::size_t ring = 2 * (window_ + 1);
  pre_re_.assign(params_.l_d * ring, 0.0);
  pre_im_.assign(params_.l_d * ring, 0.0);
  // inv_k_[i] = 1 / (window - i): lag k = depth - i when a window of depth is read forward.
  inv_k_.resize(window_);
  for (std::size_t i = 0; i < window_; ++i) inv_k_[i] = 1.0 / static_cast<double>(window_ - i);
}

double GlrCp::step(std::span<const Complex> samples) {
  double noise = sigma_w2_;
  std::span<const Complex> fresh = samples;
  if (all_) {
    scratch_.assign(samples.begin(), samples.end());
    iq_.process(scratch_);
    noise = noise_.update(scratch_);
    fresh = scratch_;
  }
  carry_.push(fresh, slot_);
  carry_.offset_correlations(r_);
  return step_statistics(r_, noise);
}

double GlrCp::step_statistics(std::span<const Complex> r, double sigma_w2) {
  if (r.size() != params_.l_d) throw LengthError("cp.glr: one statistic per offset expected");
  if (!(sigma_w2 > 0.0)) throw DegenerateInputError("cp.glr: noise power must be positive");
  // Prefix sums live twice in a ring of 2 (window + 1) so the window reads contiguously.
  const std::size_t period = window_ + 1;
  const std::size_t ring = 2 * period;
  const std::size_t j = slot_ + 1;
  const std::size_t pos = j % period;
  const std::size_t prev = (j - 1) % period;
  const std::size_t depth = std::min(j, window_);
  const double norm = static_cast<double>(params_.l_c) / (sigma_w2 * sigma_w2);
  w_ = 0.0;
  argmax_ = 0;
  for (std::size_t m = 0; m < params_.l_d; ++m) {
    double* re = pre_re_.data() + m * ring;
    double* im = pre_im_.data() + m * ring;
    const double pr = re[prev] + r[m].real();
    const double pi = im[prev] + r[m].imag();
    re[pos] = re[pos + period] = pr;
    im[pos] = im[pos + period] = pi;
    // Entries j-depth, ..., j-1 sit contiguously just below pos + period.
    const double* back_re = re + pos + period - depth;
    const double* back_im = im + pos + period - depth;
    const double* inv = inv_k_.data() + (window_ - depth);
    double best = window_max_ratio(back_re, back_im, inv, pr, pi, depth);
    best *= norm;
    if (best > w_) {
      w_ = best;
      argmax_ = m;
    }
  }
  noise_used_ = sigma_w2;
  ++slot_;
  return w_;
}

// --- GLR, energy ---------------------------------------------------------------------------

GlrEnergy::GlrEnergy(const OfdmParams& params, double sigma_w2, std::size_t window,
                     Theta1Form form)
    : params_(params), sigma_w2_(sigma_w2), window_(window), form_(form) {
  params_.validate();
  if (window_ < 1) throw ParameterError("energy.glr: window must be >= 1");
  if (!(sigma_w2_ > 0.0)) throw ParameterError("energy.glr: sigma_w2 must be positive");
  pre_s_.push_back(0.0);
  pre_sq_.push_back(0.0);
}

double GlrEnergy::step(std::span<const Complex> samples) {
  return step_value(energy_slot_statistic(samples, params_) - sigma_w2_);
}

double GlrEnergy::step_value(double v) {
  pre_s_.push_back(pre_s_.back() + v);
  pre_sq_.push_back(pre_sq_.back() + v * v);
  const std::size_t j = pre_s_.size() - 1;
  const std::size_t n_samples = params_.l_s();
  const double n = static_cast<double>(n_samples);
  const double w2 = sigma_w2_;
  const double pre_scale = n / (2.0 * w2 * w2);
  const std::size_t lo = j > window_ ? j - window_ + 1 : 1;
  w_ = 0.0;
  argmax_ = 0;
  theta1_ = 0.0;
  for (std::size_t i = j; i >= lo; --i) {
    const std::size_t k = j - i + 1;
    const double kk = static_cast<double>(k);
    const double s = pre_s_[j] - pre_s_[i - 1];
    const double sq = pre_sq_[j] - pre_sq_[i - 1];
    const double theta = solve_theta1_glr(s, sq, k, w2, n_samples, form_);
    const double post = theta + w2;
    const double resid = sq - 2.0 * theta * s + kk * theta * theta;
    const double a = sq * pre_scale - n * resid / (2.0 * post * post) + kk * std::log(w2 / post);
    if (a > w_) {
      w_ = a;
      argmax_ = i;
      theta1_ = theta;
    }
  }
  ++slot_;
  return w_;
}

// --- MGLR, energy --------------------------------------------------------------------------

MglrEnergy::MglrEnergy(const OfdmParams& params, std::size_t m_star, std::size_t window,
                       MglrScore score, bool reverse)
    : params_(params), m_star_(m_star), window_(window), score_(score), reverse_(reverse) {
  params_.validate();
  if (m_star_ < 1) throw ParameterError("energy.mglr: m_star must be >= 1");
  if (window_ < 1) throw ParameterError("energy.mglr: window must be >= 1");
  pre_s_.push_back(0.0);
  pre_sq_.push_back(0.0);
  head_.push_back({});
}

MglrEnergy::SegmentFit MglrEnergy::fit(double s, double sq, std::size_t k) const {
  const std::size_t n_samples = params_.l_s();
  SegmentFit f;
  f.theta = solve_theta1_mglr(s, sq, k, n_samples);
  if (!(f.theta > 0.0)) return f;
  const double kk = static_cast<double>(k);
  const double n = static_cast<double>(n_samples);
  const double resid = std::max(0.0, sq - 2.0 * f.theta * s + kk * f.theta * f.theta);
  f.b = n * resid / (2.0 * f.theta * f.theta);
  f.nll = f.b + kk * std::log(f.theta);
  return f;
}

double MglrEnergy::step(std::span<const Complex> samples) {
  return step_value(energy_slot_statistic(samples, params_));
}

double MglrEnergy::step_value(double v) {
  pre_s_.push_back(pre_s_.back() + v);
  pre_sq_.push_back(pre_sq_.back() + v * v);
  const std::size_t j = pre_s_.size() - 1;
  head_.push_back(fit(pre_s_[j], pre_sq_[j], j));
  w_ = 0.0;
  argmax_ = 0;
  theta1_ = 0.0;
  if (j > m_star_) {
    const SegmentFit& all = head_[j];
    const std::size_t lo = std::max(m_star_, j > window_ ? j - window_ : std::size_t{0});
    for (std::size_t i = j - 1; i >= lo; --i) {
      const SegmentFit& pre = head_[i];
      const SegmentFit post = fit(pre_s_[j] - pre_s_[i], pre_sq_[j] - pre_sq_[i], j - i);
      const bool rising = reverse_ ? post.theta < pre.theta : post.theta > pre.theta;
      if (rising) {
        const double a = score_ == MglrScore::kLikelihood ? all.nll - pre.nll - post.nll
                                                           : pre.b + post.b - all.b;
        if (a > w_) {
          w_ = a;
          argmax_ = i;
          theta1_ = post.theta;
        }
      }
      if (i == lo) break;
    }
  }
  ++slot_;
  return w_;
}

// --- registry ------------------------------------------------------------------------------

std::string_view algorithm_id(SequentialAlgorithm algorithm) {
  switch (algorithm) {
    case SequentialAlgorithm::kCpCusum:
      return "cp.cusum";
    case SequentialAlgorithm::kCpBank:
      return "cp.bank";
    case SequentialAlgorithm::kCpGlr:
      return "cp.glr";
    case SequentialAlgorithm::kCpGlrAll:
      return "cp.glr-all";
    case SequentialAlgorithm::kEnergyCusum:
      return "energy.cusum";
    case SequentialAlgorithm::kEnergyGlr:
      return "energy.glr";
    case SequentialAlgorithm::kEnergyMglr:
      return "energy.mglr";
  }
  return "?";
}

SequentialAlgorithm parse_algorithm(std::string_view id) {
  for (auto a : {SequentialAlgorithm::kCpCusum, SequentialAlgorithm::kCpBank,
                 SequentialAlgorithm::kCpGlr, SequentialAlgorithm::kCpGlrAll,
                 SequentialAlgorithm::kEnergyCusum, SequentialAlgorithm::kEnergyGlr,
                 SequentialAlgorithm::kEnergyMglr}) {
    if (algorithm_id(a) == id) return a;
  }
  throw ParameterError("unknown sequential algorithm '" + std::string(id) + "'");
}

void SequentialDetectorConfig::validate() const {
  if (glr_window < 1) throw ParameterError("glr_window must be >= 1");
  if (m_star < 1) throw ParameterError("m_star must be >= 1");
}

std::unique_ptr<NodeDetector> make_node_detector(const SequentialDetectorConfig& cfg,
                                                 const OfdmParams& params,
                                                 const NodeScenario& design) {
  cfg.validate();
  switch (cfg.algorithm) {
    case SequentialAlgorithm::kCpCusum:
      return std::make_unique<CpCusum>(params, design);
    case SequentialAlgorithm::kCpBank:
      return std::make_unique<CusumBank>(params, design);
    case SequentialAlgorithm::kCpGlr:
      return std::make_unique<GlrCp>(params, design.sigma_w2, cfg.glr_window, false);
    case SequentialAlgorithm::kCpGlrAll:
      return std::make_unique<GlrCp>(params, 0.0, cfg.glr_window, true);
    case SequentialAlgorithm::kEnergyCusum:
      return std::make_unique<EnergyCusum>(params, design);
    case SequentialAlgorithm::kEnergyGlr:
      return std::make_unique<GlrEnergy>(params, design.sigma_w2, cfg.glr_window,
                                         cfg.theta1_form);
    case SequentialAlgorithm::kEnergyMglr:
      return std::make_unique<MglrEnergy>(params, cfg.m_star, cfg.glr_window, cfg.mglr_score,
                                          cfg.mglr_reverse);
  }
  throw ParameterError("unknown sequential algorithm");
}

}  // namespace ofdmsense
