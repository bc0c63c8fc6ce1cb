#include "flowbind/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "flowbind/cli/tabular.hpp"
#include "flowbind/trainer/decomposition.hpp"

namespace flowbind {

namespace fs = std::filesystem;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ArgumentError("missing required option " + flag);
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string s; std::getline(in, s, ',');) {
    if (s.empty()) throw ArgumentError("empty modality name in '" + text + "'");
    out.push_back(s);
  }
  return out;
}

/// Collects PASS/FAIL lines and the overall status.
class Assertions {
 public:
  explicit Assertions(std::ostream& log) : log_(log) {}
  void check(bool ok, const std::string& what) {
    log_ << (ok ? "PASS " : "FAIL ") << what << "\n";
    failed_ = failed_ || !ok;
  }
  int status() const { return failed_ ? exit_code::kAssertionFailed : exit_code::kOk; }

 private:
  std::ostream& log_;
  bool failed_ = false;
};

std::string fixed(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

ModalityBatch paired_eval(const ModelBundle& b) {
  Rng rng = Rng(b.config.seed()).split(streams::kEval);
  return standardize(sample_paired(b.config.world, b.config.eval.samples, rng), b.stats);
}

bool zero_drifts(const FlowBindModel& model) {
  for (std::size_t i = 0; i < model.modality_count(); ++i) {
    for (const auto& p : model.drift(i).head().parameters()) {
      for (double v : p.tensor.data()) {
        if (v != 0.0) return false;
      }
    }
  }
  return true;
}

int eval_decompose(const ModelBundle& b, const std::string& out, Assertions& a) {
  const auto& model = b.model;
  std::vector<std::vector<std::string>> rows;
  bool identity_ok = true, total_variance_ok = true;
  for (std::size_t j = 0; j < b.config.decompose_joints; ++j) {
    Rng rng = Rng(b.config.seed()).split(1000 + j);
    RandomJointSpec spec;
    spec.groups = 2 + rng.below(19);
    spec.outcomes_per_group = 1 + rng.below(5);
    spec.shared_dim = model.modalities()[0].dim;
    spec.modality_dims.clear();
    for (const auto& m : model.modalities()) spec.modality_dims.push_back(m.dim);
    const DiscreteJoint joint = bind_shared_latents(random_joint(spec, rng), model, 0);
    DecompositionReport report;
    try {
      report = t0_decomposition_report(model, joint);
    } catch (const NumericError&) {
      identity_ok = false;
      report = t0_decomposition_report(model, joint, INFINITY);
    }
    for (std::size_t i = 0; i < report.per_modality.size(); ++i) {
      const auto& t = report.per_modality[i];
      const auto moments = enumerate_conditionals(joint, i);
      const double ltv =
          moments.total_variance - (moments.expected_variance + moments.variance_of_mean);
      total_variance_ok = total_variance_ok && std::abs(ltv) <= 1e-12;
      rows.push_back({std::to_string(j), model.modalities()[i].name, format_double(t.total),
                      format_double(t.unexplained), format_double(t.approx),
                      format_double(t.total - t.unexplained - t.approx)});
    }
    rows.push_back({std::to_string(j), "all", format_double(report.total),
                    format_double(report.unexplained), format_double(report.approx),
                    format_double(report.gap())});
  }
  write_file_atomic(join_path(out, "decompose.csv"),
                    write_csv({"joint", "modality", "total", "unexplained", "approx", "gap"},
                              rows));
  a.check(identity_ok, "t=0 loss = unexplained variance + drift error on " +
                           std::to_string(b.config.decompose_joints) + " joints");
  a.check(total_variance_ok, "law of total variance on every joint and modality");
  return a.status();
}

int eval_alignment(const ModelBundle& b, const std::string& out, Assertions& a) {
  const ModalityBatch eval = paired_eval(b);
  const auto report = alignment_report(b.model, eval, all_pairs(b.model.modality_count()),
                                       b.config.solver, b.config.eval, b.config.seed());
  std::vector<std::vector<std::string>> rows;
  const bool stationary = zero_drifts(b.model);
  for (const auto& r : report) {
    const std::string pair = b.model.modalities()[r.a].name + "+" + b.model.modalities()[r.b].name;
    rows.push_back({pair, format_double(r.raw), format_double(r.shared), format_double(r.shuffled)});
    if (stationary) {
      a.check(r.shared == r.raw, pair + " shared CKNNA equals raw under zero drift (" +
                                     fixed(r.shared) + ")");
    } else if (b.step > 0) {
      a.check(r.shared > r.raw,
              pair + " shared CKNNA " + fixed(r.shared) + " > raw " + fixed(r.raw));
    }
    a.check(std::abs(r.shuffled) < 0.1, pair + " shuffled-pair CKNNA " + fixed(r.shuffled) +
                                            " within 0.1 of zero");
  }
  write_file_atomic(join_path(out, "alignment.csv"),
                    write_csv({"pair", "raw_cknna", "shared_cknna", "shuffled_cknna"}, rows));
  return a.status();
}

int eval_variance(const ModelBundle& b, const std::string& out, Assertions& a) {
  Rng rng = Rng(b.config.seed()).split(streams::kEval);
  const ModalityBatch eval = standardize(
      sample_batch(b.config.world, b.config.pairing(), b.config.eval.samples, rng), b.stats);
  std::vector<std::vector<std::string>> rows;
  const bool trained = b.step > 0 && !b.config.train.freeze_encoder &&
                       b.config.train.anchor == AnchorMode::learnable;
  for (std::size_t i = 0; i < b.model.modality_count(); ++i) {
    const double f = explained_variance(b.model, eval, i, b.config.eval.knn);
    const std::string& name = b.model.modalities()[i].name;
    rows.push_back({name, format_double(f)});
    a.check(f >= 0.0 && f <= 1.0, name + " explained variance " + fixed(f) + " in [0, 1]");
    if (trained) a.check(f >= 0.8, name + " explained variance " + fixed(f) + " >= 0.8");
  }
  write_file_atomic(join_path(out, "variance.csv"),
                    write_csv({"modality", "explained_variance"}, rows));
  return a.status();
}

int eval_ablation(const ModelBundle& b, const std::string& out, Assertions& a) {
  const auto& c = b.config;
  const AblationResult r =
      run_ablation(c.ablation, c.world, c.pairing(), c.model, c.train, c.solver, c.eval);
  const auto row = [](const std::string& arm, const ArmMetrics& m) {
    return std::vector<std::string>{arm, format_double(m.explained_variance),
                                    format_double(m.cknna), format_double(m.rmse)};
  };
  write_file_atomic(join_path(out, "ablation.csv"),
                    write_csv({"arm", "explained_variance", "cknna", "rmse"},
                              {row("learnable", r.learnable), row("fixed", r.fixed)}));
  const std::string pair =
      c.world.views[c.ablation.source].name + "->" + c.world.views[c.ablation.target].name;
  a.check(r.learnable.explained_variance >= r.fixed.explained_variance,
          pair + " explained variance: learnable " + fixed(r.learnable.explained_variance) +
              " >= fixed " + fixed(r.fixed.explained_variance));
  a.check(r.learnable.cknna >= r.fixed.cknna, pair + " CKNNA: learnable " +
                                                  fixed(r.learnable.cknna) + " >= fixed " +
                                                  fixed(r.fixed.cknna));
  return a.status();
}

int eval_interp(const ModelBundle& b, const std::string& out, Assertions& a) {
  const auto& c = b.config;
  if (c.interp_source >= b.model.modality_count() || c.interp_target >= b.model.modality_count()) {
    throw ConfigError("eval interp: interp_source / interp_target not set for this world");
  }
  const ModalityBatch eval = paired_eval(b);
  const Tensor source = padded_latents(b.model, eval, c.interp_source);
  const Tensor z_a = encode_to_shared(index_rows(source, std::vector<std::size_t>{0}),
                                      b.model.drift(c.interp_source), c.solver);
  const Tensor z_b = encode_to_shared(index_rows(source, std::vector<std::size_t>{1}),
                                      b.model.drift(c.interp_source), c.solver);
  const std::size_t steps = c.eval.interp_steps;
  const auto path = latent_interpolate(z_a, z_b, steps, c.interp_target, b.model, b.stats, c.solver);
  const std::string& target = b.model.modalities()[c.interp_target].name;
  std::vector<std::string> header{"k", "lambda"};
  for (std::size_t j = 0; j < path.front().cols; ++j) header.push_back(target + "." + std::to_string(j));
  std::vector<std::vector<std::string>> rows;
  double length = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    std::vector<std::string> row{std::to_string(k),
                                 format_double(static_cast<double>(k) / static_cast<double>(steps - 1))};
    for (double v : path[k].values) row.push_back(format_double(v));
    rows.push_back(std::move(row));
    if (k > 0) {
      double sq = 0.0;
      for (std::size_t j = 0; j < path[k].values.size(); ++j) {
        const double d = path[k].values[j] - path[k - 1].values[j];
        sq += d * d;
      }
      length += std::sqrt(sq);
    }
  }
  write_file_atomic(join_path(out, "interp.csv"), write_csv(header, rows));
  const Matrix end_a = decode_target(z_a, c.interp_target, b.model, b.stats, c.solver);
  const Matrix end_b = decode_target(z_b, c.interp_target, b.model, b.stats, c.solver);
  a.check(path.front() == end_a && path.back() == end_b,
          "interpolation endpoints equal the decodes of the two latents");
  if (b.step > 0) {
    double sq = 0.0;
    for (std::size_t j = 0; j < end_a.values.size(); ++j) {
      const double d = end_b.values[j] - end_a.values[j];
      sq += d * d;
    }
    const double direct = std::sqrt(sq);
    a.check(length <= 1.5 * direct, "decoded path length " + fixed(length) +
                                        " <= 1.5 x direct distance " + fixed(direct));
  }
  return a.status();
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& options) {
  ExperimentConfig cfg = options.config.empty() ? ExperimentConfig{} : load_config(options.config);
  if (options.seed) cfg.train.seed = *options.seed;
  cfg.validate();
  return cfg;
}

int cmd_gen_world(const CommandOptions& options, std::ostream& log) {
  require(options.out, "--out");
  const ExperimentConfig cfg = resolve_config(options);
  fs::create_directories(options.out);
  const std::size_t rows = options.rows.value_or(cfg.eval.samples);
  Rng rng = Rng(cfg.seed()).split(streams::kData);
  const ModalityBatch batch = sample_batch(cfg.world, cfg.pairing(), rows, rng);
  std::vector<std::string> header{"subset"};
  for (const auto& v : cfg.world.views) {
    for (std::size_t j = 0; j < v.dim(); ++j) header.push_back(v.name + "." + std::to_string(j));
  }
  std::vector<std::vector<std::string>> table;
  for (std::size_t r = 0; r < batch.rows; ++r) {
    ModalitySubset s = 0;
    for (std::size_t i = 0; i < batch.modality_count(); ++i) {
      if (batch.is_present(i, r)) s |= ModalitySubset{1} << i;
    }
    std::vector<std::string> row{subset_to_string(s, cfg.world)};
    for (std::size_t i = 0; i < batch.modality_count(); ++i) {
      for (double v : batch.latents[i].row(r)) row.push_back(format_cell(v));
    }
    table.push_back(std::move(row));
  }
  write_file_atomic(join_path(options.out, "samples.csv"), write_csv(header, table));
  write_file_atomic(join_path(options.out, "config.cfg"), serialize_config(cfg));
  log << "wrote " << rows << " samples to " << join_path(options.out, "samples.csv") << "\n";
  return exit_code::kOk;
}

int cmd_train(const CommandOptions& options, std::ostream& log) {
  require(options.out, "--out");
  const ExperimentConfig cfg = resolve_config(options);
  fs::create_directories(options.out);
  ModelBundle bundle = initial_bundle(cfg);

  std::vector<std::string> header{"step", "loss", "t0_fraction"};
  for (const auto& m : bundle.model.modalities()) header.push_back("residual_" + m.name);
  std::vector<std::vector<std::string>> rows;
  TrainingHooks hooks;
  hooks.on_step = [&](const StepStats& s) {
    std::vector<std::string> row{std::to_string(s.step), format_double(s.loss),
                                 format_double(s.t0_fraction)};
    for (double r : s.residual_rms) row.push_back(format_cell(r));
    rows.push_back(std::move(row));
  };
  hooks.on_checkpoint = [&](std::size_t step) {
    const fs::path dir = fs::path(options.out) / "checkpoints";
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof name, "step_%08zu.fbnd", step);
    bundle.step = step;
    save_bundle((dir / name).string(), bundle);
  };
  const std::string log_path = join_path(options.out, "train_log.csv");
  try {
    run_training(bundle.model, cfg.world, cfg.pairing(), bundle.stats, cfg.train, hooks);
  } catch (const TrainingDiverged& e) {
    write_file_atomic(log_path, write_csv(header, rows));
    write_file_atomic(join_path(options.out, "diagnostics.txt"),
                      std::string(e.what()) + "\n" + e.diagnostics());
    log << e.what() << "\n" << e.diagnostics();
    return exit_code::kDiverged;
  }
  bundle.step = cfg.train.steps;
  write_file_atomic(log_path, write_csv(header, rows));
  save_bundle(join_path(options.out, "model.fbnd"), bundle);
  log << "trained " << cfg.train.steps << " steps";
  if (!rows.empty()) log << ", final loss " << rows.back()[1];
  log << "; bundle " << join_path(options.out, "model.fbnd") << "\n";
  return exit_code::kOk;
}

int cmd_translate(const CommandOptions& options, std::ostream& log) {
  require(options.bundle, "--bundle");
  require(options.sources, "--sources");
  require(options.target, "--target");
  require(options.in, "--in");
  require(options.out, "--out");
  const ModelBundle bundle = load_bundle(options.bundle);
  const auto& model = bundle.model;
  const TableFormat format =
      options.format.empty() ? table_format_for(options.in) : parse_table_format(options.format);

  TranslationRequest request;
  request.target = model.index_of(options.target);
  request.solver = bundle.config.solver;
  const auto names = split_names(options.sources);
  for (const auto& name : names) model.index_of(name);

  const LatentTable input = read_latents(read_file(options.in), format);
  LatentTable output;
  output.empty_input = input.empty_input;
  if (!input.empty_input) {
    for (const auto& [name, block] : input.blocks) {
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ArgumentError("input has columns for '" + name + "', which is not in --sources");
      }
    }
    for (const auto& name : names) {
      const Matrix* block = input.find(name);
      if (!block) throw ArgumentError("input has no columns for source '" + name + "'");
      const std::size_t i = model.index_of(name);
      if (block->cols != model.modalities()[i].dim) {
        throw ArgumentError("source '" + name + "' has " + std::to_string(block->cols) +
                            " columns, the model expects " +
                            std::to_string(model.modalities()[i].dim));
      }
      request.sources.push_back({i, *block});
    }
    output.rows = input.rows;
    output.blocks.push_back({options.target, translate(request, model, bundle.stats)});
  }
  write_file_atomic(options.out, write_latents(output, format));
  log << "translated " << input.rows << " rows to " << options.target << "\n";
  return exit_code::kOk;
}

int cmd_eval(const std::string& which, const CommandOptions& options, std::ostream& log) {
  require(options.bundle, "--bundle");
  require(options.out, "--out");
  ModelBundle bundle = load_bundle(options.bundle);
  if (options.seed) bundle.config.train.seed = *options.seed;
  fs::create_directories(options.out);
  Assertions a(log);
  if (which == "decompose") return eval_decompose(bundle, options.out, a);
  if (which == "alignment") return eval_alignment(bundle, options.out, a);
  if (which == "variance") return eval_variance(bundle, options.out, a);
  if (which == "ablation") return eval_ablation(bundle, options.out, a);
  if (which == "interp") return eval_interp(bundle, options.out, a);
  throw ArgumentError("unknown eval '" + which +
                      "' (expected decompose, alignment, variance, ablation or interp)");
}

}  // namespace flowbind
