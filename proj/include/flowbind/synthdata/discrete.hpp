#pragma once

#include <cstddef>
#include <vector>

#include "flowbind/numcore/rng.hpp"

namespace flowbind {

/// One atom of a finite joint over (z*, z^1..z^N).
struct DiscreteOutcome {
  double probability = 0.0;
  std::vector<double> shared;
  std::vector<std::vector<double>> modalities;
};

/// Finite joint distribution used as an exact oracle for conditional moments.
struct DiscreteJoint {
  std::vector<DiscreteOutcome> outcomes;

  std::size_t modality_count() const;
  void validate() const;
};

struct ConditionalGroup {
  double probability = 0.0;
  std::vector<double> shared;
  std::vector<double> mean;  // E[z^i | z* = shared]
  double variance = 0.0;     // tr Cov(z^i | z* = shared)
};

struct ConditionalMoments {
  std::vector<ConditionalGroup> groups;
  double expected_variance = 0.0;  // E[Var(z^i | z*)]
  double variance_of_mean = 0.0;   // Var(E[z^i | z*])
  double total_variance = 0.0;     // Var(z^i)
};

/// Exact conditional moments of modality `modality` given z*, by grouping
/// outcomes on bitwise-equal z* values. Vector variances are traces.
ConditionalMoments enumerate_conditionals(const DiscreteJoint& joint,
                                          std::size_t modality);

/// Compensated (Neumaier) accumulator.
class KahanSum {
 public:
  void add(double v);
  double value() const { return sum_ + correction_; }

 private:
  double sum_ = 0.0;
  double correction_ = 0.0;
};

struct RandomJointSpec {
  std::size_t groups = 10;
  std::size_t outcomes_per_group = 4;
  std::size_t shared_dim = 2;
  std::vector<std::size_t> modality_dims{2};
};

/// Random joint with `groups` distinct z* values, each carrying several
/// outcomes whose modality values scatter around a group-dependent centre.
DiscreteJoint random_joint(const RandomJointSpec& spec, Rng& rng);

}  // namespace flowbind
