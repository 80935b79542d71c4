#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace maggeo {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Point/vector types for chart or ambient coordinates. All built-in models
// live in at most four ambient coordinates, so these never allocate.
inline constexpr int kMaxAmbient = 4;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

// Integer deck-transformation data for loops stored as unwrapped lifts.
using Winding = std::array<std::int64_t, 3>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace maggeo
