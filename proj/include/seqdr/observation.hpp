#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "seqdr/error.hpp"

namespace seqdr {

// One subject record Z = (X, A, Y), with the design propensity when known.
struct Observation {
  std::vector<double> x;
  int a = 0;
  double y = 0.0;
  std::optional<double> known_pi;

  void validate() const {
    for (double v : x)
      if (!std::isfinite(v)) throw DataError("observation: non-finite covariate");
    if (a != 0 && a != 1) throw DataError("observation: treatment must be 0 or 1");
    if (!std::isfinite(y)) throw DataError("observation: non-finite outcome");
    if (known_pi && !(*known_pi > 0.0 && *known_pi < 1.0))
      throw DataError("observation: propensity must lie in (0, 1)");
  }
};

}  // namespace seqdr
