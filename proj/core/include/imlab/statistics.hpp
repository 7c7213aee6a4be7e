#pragma once

#include <string>

#include "imlab/errors.hpp"

namespace imlab {

/// Exchange statistics: tau (wave-function picture) / eta (Fock picture).
enum class Statistics : int { boson = +1, fermion = -1 };

inline constexpr int sign(Statistics s) { return static_cast<int>(s); }

inline Statistics statistics_from_sign(int tau) {
  if (tau == +1) return Statistics::boson;
  if (tau == -1) return Statistics::fermion;
  throw InvariantViolation("statistics sign must be +1 or -1, got " + std::to_string(tau));
}

inline std::string to_string(Statistics s) {
  return s == Statistics::boson ? "boson" : "fermion";
}

inline Statistics statistics_from_string(const std::string& name) {
  if (name == "boson") return Statistics::boson;
  if (name == "fermion") return Statistics::fermion;
  throw ConfigError("unknown statistics '" + name + "' (expected boson|fermion)");
}

}  // namespace imlab
