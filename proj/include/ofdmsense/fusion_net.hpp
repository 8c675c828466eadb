#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "ofdmsense/random.hpp"
#include "ofdmsense/snapshot_detect.hpp"

namespace ofdmsense {

struct FusionParams {
  std::size_t n_nodes = 5;
  double b = 1.0;         ///< report amplitude
  double i_design = 1.0;  ///< design level I
  double gamma = 1.0;     ///< local threshold
  double beta = 1.0;      ///< fusion threshold
  double sigma_m2 = 1.0;  ///< fusion-channel noise power

  void validate() const;
};

/// Y_j = sum of reports + N(0, sigma_m2).
double phy_fuse(std::span<const double> reports, double sigma_m2, Rng& rng);

/// eta = (2 y b I - (b I)^2) / (2 sigma_m2)
double fusion_llr(double y, double b, double i_design, double sigma_m2);

/// Fusion-centre CUSUM F_k = (F_{k-1} + eta)^+ with stop at the first F_k > beta.
class FusionState {
public:
  /// Advances one slot. Throws StateError once stopped.
  void step(double eta, double beta);

  double f() const { return f_; }
  bool stopped() const { return tau_.has_value(); }
  /// 1-based slot of the declaration.
  std::optional<std::size_t> tau() const { return tau_; }
  std::size_t slot() const { return slot_; }

private:
  double f_ = 0.0;
  std::size_t slot_ = 0;
  std::optional<std::size_t> tau_;
};

/// H1 iff every node decided H1.
Hypothesis and_rule_fuse(std::span<const Hypothesis> bits);

}  // namespace ofdmsense
