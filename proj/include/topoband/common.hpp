#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace topoband {

using cplx = std::complex<double>;

inline constexpr const char* kToolVersion = "0.1.0";

// Input/configuration problems: bad files, violated preconditions, unusable inputs.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A solver or cross-check failed: the result cannot be trusted.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace topoband
