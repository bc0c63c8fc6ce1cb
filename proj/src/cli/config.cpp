#include "flowbind/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace flowbind {

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::vector<std::pair<std::string, Entry>> entries;  // file order kept
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

class Reader {
 public:
  explicit Reader(Section& section) : section_(section) {}

  std::optional<Entry*> find(const std::string& key) {
    for (auto& [k, e] : section_.entries) {
      if (k == key) {
        e.used = true;
        return &e;
      }
    }
    return std::nullopt;
  }

  void real(const std::string& key, double& out) {
    if (auto e = find(key)) out = parse_real((*e)->value, (*e)->line, key);
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (auto e = find(key)) out = static_cast<Int>(parse_uint((*e)->value, (*e)->line, key));
  }
  void boolean(const std::string& key, bool& out) {
    if (auto e = find(key)) {
      if ((*e)->value == "true") {
        out = true;
      } else if ((*e)->value == "false") {
        out = false;
      } else {
        fail((*e)->line, "'" + key + "' must be true or false");
      }
    }
  }
  void reals(const std::string& key, std::vector<double>& out) {
    if (auto e = find(key)) {
      out.clear();
      for (const auto& w : words((*e)->value)) out.push_back(parse_real(w, (*e)->line, key));
    }
  }
  void matrix(const std::string& key, std::vector<std::vector<double>>& out) {
    if (auto e = find(key)) {
      out.clear();
      for (const auto& row : split((*e)->value, ';')) {
        std::vector<double> r;
        for (const auto& w : words(row)) r.push_back(parse_real(w, (*e)->line, key));
        if (r.empty()) fail((*e)->line, "'" + key + "' has an empty row");
        out.push_back(std::move(r));
      }
    }
  }

  static double parse_real(const std::string& text, std::size_t line, const std::string& key) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) {
      fail(line, "'" + key + "' expects a number, got '" + text + "'");
    }
    return v;
  }
  static std::uint64_t parse_uint(const std::string& text, std::size_t line,
                                  const std::string& key) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) {
      fail(line, "'" + key + "' expects a non-negative integer, got '" + text + "'");
    }
    return v;
  }

  void reject_unused() const {
    for (const auto& [k, e] : section_.entries) {
      if (!e.used) {
        const std::string where =
            section_.name.empty() ? "at top level" : "in [" + section_.name + "]";
        fail(e.line, "unknown key '" + k + "' " + where);
      }
    }
  }

 private:
  Section& section_;
};

std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> sections(1);
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      for (const auto& sec : sections) {
        if (sec.name == name) fail(line, "section [" + name + "] repeated");
      }
      sections.push_back({name, line, {}});
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) fail(line, "empty key");
    for (const auto& [k, e] : sections.back().entries) {
      if (k == key) fail(line, "key '" + key + "' repeated");
    }
    sections.back().entries.push_back({key, Entry{trim(s.substr(eq + 1)), line}});
  }
  return sections;
}

std::size_t modality_ref(const WorldSpec& world, Entry* e, const std::string& key) {
  try {
    return world.index_of(e->value);
  } catch (const Error&) {
    fail(e->line, "'" + key + "' names unknown modality '" + e->value + "'");
  }
}

void parse_world(std::vector<Section>& sections, ExperimentConfig& cfg) {
  bool custom_views = false;
  for (auto& sec : sections) {
    if (sec.name.rfind("modality.", 0) != 0) continue;
    if (!custom_views) cfg.world.views.clear();
    custom_views = true;
    ModalityView view;
    view.name = sec.name.substr(9);
    if (view.name.empty() || view.name.find_first_of("+ ,") != std::string::npos) {
      fail(sec.line, "invalid modality name '" + view.name + "'");
    }
    Reader r(sec);
    std::vector<std::vector<double>> map;
    r.matrix("map", map);
    if (map.empty()) fail(sec.line, "[" + sec.name + "] requires 'map'");
    view.map = Matrix(map.size(), map.front().size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map[i].size() != map.front().size()) fail(sec.line, "'map' rows differ in length");
      for (std::size_t j = 0; j < map[i].size(); ++j) view.map(i, j) = map[i][j];
    }
    view.offset.assign(view.map.rows, 0.0);
    r.reals("offset", view.offset);
    if (auto e = r.find("nonlinearity")) {
      try {
        view.nonlinearity = parse_nonlinearity((*e)->value);
      } catch (const Error& err) {
        fail((*e)->line, err.what());
      }
    }
    r.real("noise", view.noise);
    r.reject_unused();
    cfg.world.views.push_back(std::move(view));
  }
  for (auto& sec : sections) {
    if (sec.name != "world") continue;
    Reader r(sec);
    r.integer("hidden_dim", cfg.world.hidden_dim);
    r.real("mixture_std", cfg.world.mixture.std);
    r.matrix("mixture_means", cfg.world.mixture.means);
    r.reals("mixture_weights", cfg.world.mixture.weights);
    r.reject_unused();
  }
  try {
    cfg.world.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid world: ") + e.what());
  }
}

void parse_rest(std::vector<Section>& sections, ExperimentConfig& cfg) {
  const WorldSpec& world = cfg.world;
  for (auto& sec : sections) {
    Reader r(sec);
    if (sec.name.empty()) {
      r.integer("seed", cfg.train.seed);
    } else if (sec.name == "world" || sec.name.rfind("modality.", 0) == 0) {
      continue;
    } else if (sec.name == "pairing") {
      cfg.pairing_weights.clear();
      for (auto& [key, e] : sec.entries) {
        e.used = true;
        PairingEntry p;
        try {
          p.subset = parse_subset(key, world);
        } catch (const Error& err) {
          fail(e.line, "bad pairing subset '" + key + "': " + err.what());
        }
        p.probability = Reader::parse_real(e.value, e.line, key);
        cfg.pairing_weights.push_back(p);
      }
    } else if (sec.name == "model") {
      r.integer("latent_dim", cfg.model.latent_dim);
      r.integer("blocks", cfg.model.blocks);
      r.integer("hidden_mult", cfg.model.hidden_mult);
      r.integer("time_dim", cfg.model.time_dim);
      r.integer("encoder_hidden", cfg.model.encoder_hidden);
      r.real("latent_noise", cfg.model.latent_noise);
      r.boolean("zero_drift_head", cfg.model.zero_drift_head);
    } else if (sec.name == "train") {
      auto& t = cfg.train;
      r.integer("steps", t.steps);
      r.integer("batch_size", t.batch_size);
      r.real("lr", t.adam.lr);
      r.real("beta1", t.adam.beta1);
      r.real("beta2", t.adam.beta2);
      r.real("eps", t.adam.eps);
      r.real("clip_norm", t.adam.clip_norm);
      r.real("alpha", t.time.alpha);
      r.real("p_end", t.time.p_end);
      r.boolean("detach_target", t.detach_target);
      r.boolean("freeze_encoder", t.freeze_encoder);
      if (auto e = r.find("anchor")) {
        if ((*e)->value == "learnable") {
          t.anchor = AnchorMode::learnable;
        } else if ((*e)->value == "fixed") {
          t.anchor = AnchorMode::fixed;
        } else {
          fail((*e)->line, "'anchor' must be learnable or fixed");
        }
      }
      if (auto e = r.find("anchor_modality")) {
        t.anchor_modality = modality_ref(world, *e, "anchor_modality");
      }
      r.integer("stats_samples", t.stats_samples);
      r.integer("checkpoint_every", t.checkpoint_every);
    } else if (sec.name == "solver") {
      if (auto e = r.find("method")) {
        try {
          cfg.solver.method = parse_solver_method((*e)->value);
        } catch (const Error& err) {
          fail((*e)->line, err.what());
        }
      }
      r.integer("steps", cfg.solver.steps);
    } else if (sec.name == "eval") {
      r.integer("samples", cfg.eval.samples);
      r.integer("cknna_k", cfg.eval.cknna_k);
      r.integer("cknna_max", cfg.eval.cknna_max);
      r.integer("knn", cfg.eval.knn);
      r.integer("interp_steps", cfg.eval.interp_steps);
      r.integer("decompose_joints", cfg.decompose_joints);
      if (auto e = r.find("interp_source")) {
        cfg.interp_source = modality_ref(world, *e, "interp_source");
      }
      if (auto e = r.find("interp_target")) {
        cfg.interp_target = modality_ref(world, *e, "interp_target");
      }
    } else if (sec.name == "ablation") {
      if (auto e = r.find("anchor")) cfg.ablation.anchor = modality_ref(world, *e, "anchor");
      if (auto e = r.find("source")) cfg.ablation.source = modality_ref(world, *e, "source");
      if (auto e = r.find("target")) cfg.ablation.target = modality_ref(world, *e, "target");
      if (auto e = r.find("exclude")) {
        cfg.ablation.excluded.clear();
        if (!(*e)->value.empty()) {
          for (const auto& s : split((*e)->value, ',')) {
            try {
              cfg.ablation.excluded.push_back(parse_subset(s, world));
            } catch (const Error& err) {
              fail((*e)->line, "bad excluded subset '" + s + "': " + err.what());
            }
          }
        }
      }
    } else {
      fail(sec.line, "unknown section [" + sec.name + "]");
    }
    r.reject_unused();
  }
}

}  // namespace

AblationSpec default_ablation(const WorldSpec& world) {
  AblationSpec spec;
  spec.anchor = world.index_of("T");
  spec.source = world.index_of("I");
  spec.target = world.index_of("A");
  spec.excluded = {parse_subset("I+A", world)};
  return spec;
}

void ExperimentConfig::validate() const {
  world.validate();
  const std::size_t n = world.modality_count();
  for (const auto& p : pairing_weights) {
    if (!(p.probability >= 0.0) || !std::isfinite(p.probability)) {
      throw ConfigError("pairing weight for '" + subset_to_string(p.subset, world) +
                        "' must be finite and >= 0");
    }
  }
  pairing().validate(n);
  for (const auto& v : world.views) {
    if (v.dim() > model.latent_dim) {
      throw ConfigError("modality '" + v.name + "' dim " + std::to_string(v.dim()) +
                        " exceeds model latent_dim " + std::to_string(model.latent_dim));
    }
  }
  if (model.latent_dim == 0 || model.hidden_mult == 0 || model.encoder_hidden == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (model.time_dim == 0 || model.time_dim % 2 != 0) {
    throw ConfigError("model time_dim must be even and positive");
  }
  if (!(model.latent_noise >= 0.0)) throw ConfigError("model latent_noise must be >= 0");
  try {
    train.validate();
    solver.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (train.anchor_modality >= n) throw ConfigError("train anchor_modality out of range");
  if (eval.cknna_k == 0 || eval.knn == 0 || eval.interp_steps < 2) {
    throw ConfigError("eval: cknna_k and knn must be positive, interp_steps >= 2");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<Section> sections = tokenize(text);
  ExperimentConfig cfg;
  parse_world(sections, cfg);
  parse_rest(sections, cfg);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

namespace {

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

std::string modality_name(const WorldSpec& world, std::size_t i) {
  return world.views.at(i).name;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  const auto b = [](bool v) { return v ? "true" : "false"; };
  std::ostringstream out;
  out << "seed = " << c.train.seed << "\n\n[world]\n";
  out << "hidden_dim = " << c.world.hidden_dim << "\n";
  out << "mixture_std = " << format_double(c.world.mixture.std) << "\n";
  out << "mixture_means = ";
  for (std::size_t i = 0; i < c.world.mixture.means.size(); ++i) {
    out << (i ? "; " : "") << join(c.world.mixture.means[i]);
  }
  out << "\nmixture_weights = " << join(c.world.mixture.weights) << "\n";
  for (const auto& v : c.world.views) {
    out << "\n[modality." << v.name << "]\nmap = ";
    for (std::size_t r = 0; r < v.map.rows; ++r) {
      const auto row = v.map.row(r);
      out << (r ? "; " : "") << join({row.begin(), row.end()});
    }
    out << "\noffset = " << join(v.offset) << "\n";
    out << "nonlinearity = " << to_string(v.nonlinearity) << "\n";
    out << "noise = " << format_double(v.noise) << "\n";
  }
  out << "\n[pairing]\n";
  for (const auto& p : c.pairing_weights) {
    out << subset_to_string(p.subset, c.world) << " = " << format_double(p.probability) << "\n";
  }
  const auto& m = c.model;
  out << "\n[model]\nlatent_dim = " << m.latent_dim << "\nblocks = " << m.blocks
      << "\nhidden_mult = " << m.hidden_mult << "\ntime_dim = " << m.time_dim
      << "\nencoder_hidden = " << m.encoder_hidden
      << "\nlatent_noise = " << format_double(m.latent_noise)
      << "\nzero_drift_head = " << b(m.zero_drift_head) << "\n";
  const auto& t = c.train;
  out << "\n[train]\nsteps = " << t.steps << "\nbatch_size = " << t.batch_size
      << "\nlr = " << format_double(t.adam.lr) << "\nbeta1 = " << format_double(t.adam.beta1)
      << "\nbeta2 = " << format_double(t.adam.beta2) << "\neps = " << format_double(t.adam.eps)
      << "\nclip_norm = " << format_double(t.adam.clip_norm)
      << "\nalpha = " << format_double(t.time.alpha)
      << "\np_end = " << format_double(t.time.p_end)
      << "\ndetach_target = " << b(t.detach_target)
      << "\nfreeze_encoder = " << b(t.freeze_encoder)
      << "\nanchor = " << (t.anchor == AnchorMode::fixed ? "fixed" : "learnable")
      << "\nanchor_modality = " << modality_name(c.world, t.anchor_modality)
      << "\nstats_samples = " << t.stats_samples
      << "\ncheckpoint_every = " << t.checkpoint_every << "\n";
  out << "\n[solver]\nmethod = " << to_string(c.solver.method)
      << "\nsteps = " << c.solver.steps << "\n";
  const auto& e = c.eval;
  out << "\n[eval]\nsamples = " << e.samples << "\ncknna_k = " << e.cknna_k
      << "\ncknna_max = " << e.cknna_max << "\nknn = " << e.knn
      << "\ninterp_steps = " << e.interp_steps << "\ndecompose_joints = " << c.decompose_joints;
  if (c.interp_source < c.world.modality_count()) {
    out << "\ninterp_source = " << modality_name(c.world, c.interp_source);
  }
  if (c.interp_target < c.world.modality_count()) {
    out << "\ninterp_target = " << modality_name(c.world, c.interp_target);
  }
  out << "\n\n[ablation]\n";
  const std::size_t n = c.world.modality_count();
  if (c.ablation.anchor < n) out << "anchor = " << modality_name(c.world, c.ablation.anchor) << "\n";
  if (c.ablation.source < n) out << "source = " << modality_name(c.world, c.ablation.source) << "\n";
  if (c.ablation.target < n) out << "target = " << modality_name(c.world, c.ablation.target) << "\n";
  out << "exclude = ";
  for (std::size_t i = 0; i < c.ablation.excluded.size(); ++i) {
    out << (i ? ", " : "") << subset_to_string(c.ablation.excluded[i], c.world);
  }
  out << "\n";
  return out.str();
}

}  // namespace flowbind
