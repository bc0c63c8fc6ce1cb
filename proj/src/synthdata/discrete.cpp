#include "flowbind/synthdata/discrete.hpp"

#include <cmath>
#include <map>

#include "flowbind/numcore/errors.hpp"

namespace flowbind {

void KahanSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    correction_ += (sum_ - t) + v;
  } else {
    correction_ += (v - t) + sum_;
  }
  sum_ = t;
}

std::size_t DiscreteJoint::modality_count() const {
  return outcomes.empty() ? 0 : outcomes.front().modalities.size();
}

void DiscreteJoint::validate() const {
  if (outcomes.empty()) throw ArgumentError("discrete joint has no outcomes");
  const auto& first = outcomes.front();
  KahanSum total;
  for (const auto& o : outcomes) {
    if (!(o.probability >= 0.0) || !std::isfinite(o.probability)) {
      throw ArgumentError("discrete joint probability must be finite and >= 0");
    }
    total.add(o.probability);
    if (o.shared.size() != first.shared.size() ||
        o.modalities.size() != first.modalities.size()) {
      throw ShapeError("discrete joint outcomes have inconsistent shapes");
    }
    for (double v : o.shared) {
      if (!std::isfinite(v)) throw NumericError("discrete joint: non-finite z*");
    }
    for (std::size_t i = 0; i < o.modalities.size(); ++i) {
      if (o.modalities[i].size() != first.modalities[i].size()) {
        throw ShapeError("discrete joint modality widths differ across outcomes");
      }
      for (double v : o.modalities[i]) {
        if (!std::isfinite(v)) throw NumericError("discrete joint: non-finite value");
      }
    }
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    throw ArgumentError("discrete joint probabilities sum to " +
                        std::to_string(total.value()));
  }
}

ConditionalMoments enumerate_conditionals(const DiscreteJoint& joint,
                                          std::size_t modality) {
  joint.validate();
  if (modality >= joint.modality_count()) {
    throw ArgumentError("enumerate_conditionals: modality index out of range");
  }
  const std::size_t width = joint.outcomes.front().modalities[modality].size();

  std::map<std::vector<double>, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t k = 0; k < joint.outcomes.size(); ++k) {
    const auto [it, inserted] =
        group_of.emplace(joint.outcomes[k].shared, members.size());
    if (inserted) members.emplace_back();
    members[it->second].push_back(k);
  }

  ConditionalMoments out;
  std::vector<KahanSum> overall_mean(width);
  for (const auto& o : joint.outcomes) {
    for (std::size_t c = 0; c < width; ++c) {
      overall_mean[c].add(o.probability * o.modalities[modality][c]);
    }
  }
  std::vector<double> mu(width);
  for (std::size_t c = 0; c < width; ++c) mu[c] = overall_mean[c].value();

  KahanSum expected_var, var_of_mean, total_var;
  for (const auto& idx : members) {
    ConditionalGroup g;
    g.shared = joint.outcomes[idx.front()].shared;
    KahanSum p;
    for (std::size_t k : idx) p.add(joint.outcomes[k].probability);
    g.probability = p.value();
    if (!(g.probability > 0.0)) {
      // Zero-mass groups contribute nothing; keep them with a zero mean.
      g.mean.assign(width, 0.0);
      out.groups.push_back(std::move(g));
      continue;
    }
    g.mean.assign(width, 0.0);
    for (std::size_t c = 0; c < width; ++c) {
      KahanSum acc;
      for (std::size_t k : idx) {
        acc.add(joint.outcomes[k].probability * joint.outcomes[k].modalities[modality][c]);
      }
      g.mean[c] = acc.value() / g.probability;
    }
    KahanSum within;
    for (std::size_t k : idx) {
      const auto& z = joint.outcomes[k].modalities[modality];
      double sq = 0.0;
      for (std::size_t c = 0; c < width; ++c) sq += (z[c] - g.mean[c]) * (z[c] - g.mean[c]);
      within.add(joint.outcomes[k].probability * sq);
    }
    g.variance = within.value() / g.probability;
    expected_var.add(within.value());
    double between = 0.0;
    for (std::size_t c = 0; c < width; ++c) between += (g.mean[c] - mu[c]) * (g.mean[c] - mu[c]);
    var_of_mean.add(g.probability * between);
    out.groups.push_back(std::move(g));
  }
  for (const auto& o : joint.outcomes) {
    double sq = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      sq += (o.modalities[modality][c] - mu[c]) * (o.modalities[modality][c] - mu[c]);
    }
    total_var.add(o.probability * sq);
  }
  out.expected_variance = expected_var.value();
  out.variance_of_mean = var_of_mean.value();
  out.total_variance = total_var.value();
  return out;
}

DiscreteJoint random_joint(const RandomJointSpec& spec, Rng& rng) {
  if (spec.groups == 0 || spec.outcomes_per_group == 0) {
    throw ArgumentError("random_joint: need at least one group and outcome");
  }
  DiscreteJoint joint;
  std::vector<double> weights;
  double total = 0.0;
  for (std::size_t g = 0; g < spec.groups; ++g) {
    std::vector<double> shared(spec.shared_dim);
    for (double& v : shared) v = rng.normal();
    std::vector<std::vector<double>> centres;
    for (std::size_t d : spec.modality_dims) {
      std::vector<double> c(d);
      for (double& v : c) v = 2.0 * rng.normal();
      centres.push_back(std::move(c));
    }
    for (std::size_t k = 0; k < spec.outcomes_per_group; ++k) {
      DiscreteOutcome o;
      o.shared = shared;
      for (std::size_t i = 0; i < spec.modality_dims.size(); ++i) {
        std::vector<double> z = centres[i];
        for (double& v : z) v += rng.normal();
        o.modalities.push_back(std::move(z));
      }
      const double w = 0.05 + rng.uniform();
      weights.push_back(w);
      total += w;
      joint.outcomes.push_back(std::move(o));
    }
  }
  for (std::size_t k = 0; k < joint.outcomes.size(); ++k) {
    joint.outcomes[k].probability = weights[k] / total;
  }
  return joint;
}

}  // namespace flowbind
