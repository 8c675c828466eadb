#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ofdmsense/experiment.hpp"

namespace ofdmsense {

/// Sequential experiment plus run settings, read from a sectioned key = value file.
///
///   [scenario]    l_d l_c nodes sigma_w2 sigma_s2 snr_db design_sigma_w2 design_sigma_s2
///   [impairments] timing_offset freq_offset iq_epsilon iq_phase_deg noise_uncertainty noise_draw
///   [change]      rho horizon min_pre_change post_change_cap
///   [detector]    algorithm glr_window m_star theta1_form mglr_score mglr_reverse
///   [fusion]      b i_design gamma beta sigma_m2
///   [run]         trials calib_trials seed target_pfa threads
///
/// Unknown sections or keys are rejected.
struct ExperimentConfig {
  SequentialExperiment experiment;
  std::size_t trials = 2000;
  std::size_t calib_trials = 2000;
  std::uint64_t seed = 1;
  std::vector<double> target_pfa = {0.1};
  std::size_t threads = 0;

  void validate() const;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

/// Comma or whitespace separated list of numbers.
std::vector<double> parse_number_list(const std::string& text);

NoiseDraw parse_noise_draw(const std::string& id);

}  // namespace ofdmsense
