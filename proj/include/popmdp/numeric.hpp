#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace popmdp {

/// Probabilities of a return distribution must sum to one within this bound.
inline constexpr double kProbabilityTolerance = 1e-12;
/// Measure weights off by less than this are silently renormalised.
inline constexpr double kRenormalizeTolerance = 1e-9;
/// Relative eigenvalue floor used for positive-definiteness checks.
inline constexpr double kPdRelativeTolerance = 1e-10;
/// Below this norm the mean relative risk counts as zero.
inline constexpr double kZeroMeanTolerance = 1e-12;
/// Default cap on the number of atoms produced by one pushforward.
inline constexpr std::size_t kDefaultSupportCap = 10'000'000;
/// Default cap on the number of rule sequences enumerated by the engine.
inline constexpr std::size_t kDefaultSearchCap = 1'000'000;

/// Absolute tolerance on unit-scale quantities, relative once |value| > 1.
inline bool approx_equal(double a, double b, double tol) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

inline double scaled_difference(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

}  // namespace popmdp
