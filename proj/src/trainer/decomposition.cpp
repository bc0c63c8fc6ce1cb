#include "flowbind/trainer/decomposition.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace flowbind {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

DecompositionReport t0_decomposition(const DiscreteJoint& joint, const T0Drift& drift,
                                     double tolerance) {
  joint.validate();
  const std::size_t dim = joint.outcomes.front().shared.size();
  DecompositionReport report;
  KahanSum total_all, unexplained_all, approx_all;
  for (std::size_t i = 0; i < joint.modality_count(); ++i) {
    if (joint.outcomes.front().modalities[i].size() != dim) {
      throw ShapeError("t0_decomposition: modality width differs from z* width");
    }
    const auto check = [&](const std::vector<double>& v) {
      if (v.size() != dim) throw ShapeError("t0_decomposition: drift output width");
      return v;
    };
    KahanSum total;
    std::vector<double> target(dim);
    for (const auto& o : joint.outcomes) {
      const std::vector<double> v = check(drift(i, o.shared));
      for (std::size_t k = 0; k < dim; ++k) target[k] = o.modalities[i][k] - o.shared[k];
      total.add(o.probability * squared_distance(v, target));
    }
    const ConditionalMoments moments = enumerate_conditionals(joint, i);
    KahanSum approx;
    for (const auto& g : moments.groups) {
      const std::vector<double> v = check(drift(i, g.shared));
      for (std::size_t k = 0; k < dim; ++k) target[k] = g.mean[k] - g.shared[k];
      approx.add(g.probability * squared_distance(v, target));
    }
    DecompositionTerm term{total.value(), moments.expected_variance, approx.value()};
    total_all.add(term.total);
    unexplained_all.add(term.unexplained);
    approx_all.add(term.approx);
    report.per_modality.push_back(term);
  }
  report.total = total_all.value();
  report.unexplained = unexplained_all.value();
  report.approx = approx_all.value();
  if (!(std::abs(report.gap()) <= tolerance * (1.0 + std::abs(report.total)))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "t=0 decomposition violated: total " << report.total << " vs unexplained "
        << report.unexplained << " + approx " << report.approx;
    throw NumericError(msg.str());
  }
  return report;
}

T0Drift conditional_mean_drift(const DiscreteJoint& joint) {
  std::vector<std::map<std::vector<double>, std::vector<double>>> tables;
  for (std::size_t i = 0; i < joint.modality_count(); ++i) {
    std::map<std::vector<double>, std::vector<double>> table;
    for (const auto& g : enumerate_conditionals(joint, i).groups) {
      std::vector<double> v(g.mean.size());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = g.mean[k] - g.shared[k];
      table.emplace(g.shared, std::move(v));
    }
    tables.push_back(std::move(table));
  }
  return [tables = std::move(tables)](std::size_t i, std::span<const double> z) {
    const auto it = tables.at(i).find(std::vector<double>(z.begin(), z.end()));
    if (it == tables[i].end()) {
      throw ArgumentError("conditional_mean_drift: z* value not in the joint");
    }
    return it->second;
  };
}

DiscreteJoint bind_shared_latents(const DiscreteJoint& joint, const FlowBindModel& model,
                                  std::size_t source) {
  NoGradGuard guard;
  DiscreteJoint out = joint;
  for (auto& o : out.outcomes) {
    const Tensor x = Tensor::matrix(1, o.shared.size(), o.shared);
    const Tensor z = model.encoder().head_output(source, x);
    o.shared.assign(z.data().begin(), z.data().end());
  }
  return out;
}

DecompositionReport t0_decomposition_report(const FlowBindModel& model,
                                            const DiscreteJoint& joint,
                                            double tolerance) {
  joint.validate();
  const std::size_t d = model.latent_dim();
  if (joint.modality_count() != model.modality_count()) {
    throw ShapeError("t0_decomposition_report: joint and model modality counts differ");
  }
  DiscreteJoint padded = joint;
  for (auto& o : padded.outcomes) {
    if (o.shared.size() != d) {
      throw ShapeError("t0_decomposition_report: z* width differs from latent dim");
    }
    for (std::size_t i = 0; i < o.modalities.size(); ++i) {
      if (o.modalities[i].size() != model.modalities()[i].dim) {
        throw ShapeError("t0_decomposition_report: modality width mismatch");
      }
      o.modalities[i].resize(d, 0.0);
    }
  }
  // Outcomes sharing a z* value hit the cache instead of the network.
  std::map<std::pair<std::size_t, std::vector<double>>, std::vector<double>> cache;
  const T0Drift drift = [&model, &cache, d](std::size_t i, std::span<const double> z) {
    auto key = std::make_pair(i, std::vector<double>(z.begin(), z.end()));
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    NoGradGuard guard;
    const Tensor v = model.drift(i)(Tensor::matrix(1, d, key.second), 0.0);
    std::vector<double> out(v.data().begin(), v.data().end());
    cache.emplace(std::move(key), out);
    return out;
  };
  return t0_decomposition(padded, drift, tolerance);
}

}  // namespace flowbind
