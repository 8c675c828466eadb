#include "ofdmsense/fusion_net.hpp"

#include <algorithm>
#include <cmath>

#include "ofdmsense/errors.hpp"

namespace ofdmsense {

void FusionParams::validate() const {
  if (n_nodes < 1) throw ParameterError("FusionParams: n_nodes must be >= 1");
  if (!(b > 0.0)) throw ParameterError("FusionParams: b must be positive");
  if (!(i_design >= 1.0 && i_design <= static_cast<double>(n_nodes))) {
    throw ParameterError("FusionParams: i_design must lie in [1, n_nodes]");
  }
  if (!(gamma > 0.0)) throw ParameterError("FusionParams: gamma must be positive");
  if (!(beta > 0.0)) throw ParameterError("FusionParams: beta must be positive");
  if (!(sigma_m2 > 0.0)) throw ParameterError("FusionParams: sigma_m2 must be positive");
}

double phy_fuse(std::span<const double> reports, double sigma_m2, Rng& rng) {
  double y = 0.0;
  for (double r : reports) y += r;
  if (sigma_m2 > 0.0) y += std::sqrt(sigma_m2) * standard_normal(rng);
  return y;
}

double fusion_llr(double y, double b, double i_design, double sigma_m2) {
  if (!(sigma_m2 > 0.0)) throw ParameterError("fusion_llr: sigma_m2 must be positive");
  const double bi = b * i_design;
  return (2.0 * y * bi - bi * bi) / (2.0 * sigma_m2);
}

void FusionState::step(double eta, double beta) {
  if (stopped()) throw StateError("fusion CUSUM already declared a change");
  ++slot_;
  f_ = std::max(0.0, f_ + eta);
  if (f_ > beta) tau_ = slot_;
}

Hypothesis and_rule_fuse(std::span<const Hypothesis> bits) {
  if (bits.empty()) throw ParameterError("and_rule_fuse: no node decisions");
  return std::all_of(bits.begin(), bits.end(), [](Hypothesis h) { return h == Hypothesis::kH1; })
             ? Hypothesis::kH1
             : Hypothesis::kH0;
}

}  // namespace ofdmsense
