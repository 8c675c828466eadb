#pragma once

#include <stdexcept>
#include <string>

namespace ofdmsense {

/// Invalid configuration value (out of range threshold, offset, probability, ...).
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input block too short for the requested statistic.
class LengthError : public std::length_error {
public:
  using std::length_error::length_error;
};

/// Detector or fusion state used out of order (missing carry, stepping after stop).
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Estimator input that does not determine an estimate (e.g. R == 0).
class DegenerateInputError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

}  // namespace ofdmsense
