#pragma once

#include <cstddef>
#include <vector>

#include "flowbind/numcore/rng.hpp"

namespace flowbind {

/// Mixture over training times: t = 0 with probability alpha; otherwise
/// t = 1 with probability p_end, else t ~ U(0, 1).
struct TimeSampler {
  double alpha = 0.15;
  double p_end = 0.3;

  void validate() const;
  double draw(Rng& rng) const;
  std::vector<double> draw(std::size_t n, Rng& rng) const;

  double prob_zero() const { return alpha; }
  double prob_one() const { return (1.0 - alpha) * p_end; }

  friend bool operator==(const TimeSampler&, const TimeSampler&) = default;
};

}  // namespace flowbind
