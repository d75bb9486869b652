#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fq {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using Bits = std::vector<std::uint8_t>;

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;      // J*s
inline constexpr double kPi = 3.14159265358979323846;

/// Raised when an operation is called on data in a state it cannot handle
/// (e.g. a frame whose delays do not line up on the symbol grid).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Polarization : std::uint8_t { X = 0, Y = 1 };

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace fq
