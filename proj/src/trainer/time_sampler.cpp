#include "flowbind/trainer/time_sampler.hpp"

#include "flowbind/numcore/errors.hpp"

namespace flowbind {

void TimeSampler::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ArgumentError("time sampler: alpha must lie in [0, 1)");
  }
  if (!(p_end >= 0.0 && p_end <= 1.0)) {
    throw ArgumentError("time sampler: p_end must lie in [0, 1]");
  }
  if (!(prob_zero() + prob_one() < 1.0)) {
    throw ArgumentError("time sampler: interior times have zero probability");
  }
}

double TimeSampler::draw(Rng& rng) const {
  // One uniform picks the branch, a second (interior only) the time, so the
  // stream advances by a fixed amount per branch.
  const double u = rng.uniform();
  if (u < alpha) return 0.0;
  if (u < alpha + prob_one()) return 1.0;
  return rng.uniform();
}

std::vector<double> TimeSampler::draw(std::size_t n, Rng& rng) const {
  std::vector<double> out(n);
  for (double& t : out) t = draw(rng);
  return out;
}

}  // namespace flowbind
