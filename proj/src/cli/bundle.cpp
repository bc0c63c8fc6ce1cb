#include "flowbind/cli/bundle.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace flowbind {

namespace {

constexpr char kMagic[4] = {'F', 'B', 'N', 'D'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    out_.append(static_cast<const char*>(data), n);
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void array(const std::string& name, const Shape& shape, std::span<const double> values) {
    str(name);
    u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) u64(e);
    for (double v : values) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Cursor {
 public:
  explicit Cursor(const std::string& in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error("bundle truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * k);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * k);
    }
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::vector<NamedArray> stats_arrays(const ModelBundle& b) {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < b.stats.size(); ++i) {
    const std::string name = b.model.modalities()[i].name;
    out.push_back({"norm." + name + ".mean", {b.stats[i].mean.size()}, b.stats[i].mean});
    out.push_back({"norm." + name + ".std", {b.stats[i].std.size()}, b.stats[i].std});
  }
  return out;
}

}  // namespace

ModelBundle initial_bundle(const ExperimentConfig& config) {
  config.validate();
  Rng stats_rng = Rng(config.seed()).split(streams::kStats);
  auto stats = compute_norm_stats(config.world, config.train.stats_samples, stats_rng);
  return ModelBundle{config, make_model(config.world, config.model, config.seed()),
                     std::move(stats), 0};
}

std::string encode_bundle(const ModelBundle& bundle) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(ModelBundle::kFormatVersion);
  w.str(serialize_config(bundle.config));
  w.u64(bundle.step);
  const ParameterList params = bundle.model.parameters();
  const auto stats = stats_arrays(bundle);
  w.u32(static_cast<std::uint32_t>(params.size() + stats.size()));
  for (const auto& p : params) w.array(p.name, p.tensor.shape(), p.tensor.data());
  for (const auto& a : stats) w.array(a.name, a.shape, a.values);
  return w.take();
}

ModelBundle decode_bundle(const std::string& bytes) {
  Cursor c(bytes);
  c.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("not a model bundle (bad magic)");
  c.skip(4);
  const std::uint32_t version = c.u32();
  if (version != ModelBundle::kFormatVersion) {
    throw Error("bundle format version " + std::to_string(version) +
                " is not supported by this build (expected " +
                std::to_string(ModelBundle::kFormatVersion) +
                "); re-run `train` with the embedded config to migrate");
  }
  ExperimentConfig config = parse_config(c.str());
  ModelBundle bundle = initial_bundle(config);
  bundle.step = c.u64();

  std::map<std::string, NamedArray> arrays;
  const std::uint32_t count = c.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = c.str();
    const std::uint32_t rank = c.u32();
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.shape.push_back(c.u64());
      numel *= a.shape.back();
    }
    c.need(numel * 8);
    a.values.resize(numel);
    for (double& v : a.values) v = c.f64();
    if (!arrays.emplace(a.name, a).second) throw Error("bundle repeats array '" + a.name + "'");
  }
  if (!c.done()) throw Error("bundle has trailing bytes at " + std::to_string(c.pos()));

  const auto take = [&](const std::string& name, const Shape& shape) {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw Error("bundle is missing array '" + name + "'");
    if (it->second.shape != shape) {
      throw Error("bundle array '" + name + "' has shape " + shape_to_string(it->second.shape) +
                  ", model expects " + shape_to_string(shape));
    }
    std::vector<double> values = std::move(it->second.values);
    arrays.erase(it);
    return values;
  };
  for (auto& p : bundle.model.parameters()) {
    const auto values = take(p.name, p.tensor.shape());
    std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
  }
  for (std::size_t i = 0; i < bundle.stats.size(); ++i) {
    const std::string name = bundle.model.modalities()[i].name;
    const std::size_t d = bundle.stats[i].mean.size();
    bundle.stats[i].mean = take("norm." + name + ".mean", {d});
    bundle.stats[i].std = take("norm." + name + ".std", {d});
  }
  if (!arrays.empty()) throw Error("bundle has unknown array '" + arrays.begin()->first + "'");
  return bundle;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  const std::filesystem::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + temp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write to '" + temp.string() + "' failed");
  }
  std::filesystem::rename(temp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_bundle(const std::string& path, const ModelBundle& bundle) {
  write_file_atomic(path, encode_bundle(bundle));
}

ModelBundle load_bundle(const std::string& path) { return decode_bundle(read_file(path)); }

bool bundles_equal(const ModelBundle& a, const ModelBundle& b) {
  return encode_bundle(a) == encode_bundle(b);
}

}  // namespace flowbind
