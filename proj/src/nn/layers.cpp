#include "seqcr/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

namespace seqcr::nn {

Conv3d::Conv3d(std::string name, int in_channels, int out_channels, const ConvGeometry& geometry, Rng& rng)
    : name_(std::move(name)), geometry_(geometry) {
  const auto [kt, kh, kw] = geometry.kernel;
  Tensor w({out_channels, in_channels, kt, kh, kw});
  // He-uniform fan-in initialisation.
  const double fan_in = static_cast<double>(in_channels) * kt * kh * kw;
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : w.values()) v = dist(rng);
  weight_ = Var(std::move(w), true);
  bias_ = Var(Tensor({out_channels}, 0.0), true);
}

void Conv3d::collect(ParameterList& out) const {
  out.push_back({name_ + ".weight", weight_});
  out.push_back({name_ + ".bias", bias_});
}

ConvGeometry conv2d_geometry(int kernel, int stride) {
  return {{1, kernel, kernel}, {1, stride, stride}, {0, kernel / 2, kernel / 2}};
}

ConvGeometry conv3d_geometry(int kernel) {
  return {{kernel, kernel, kernel}, {1, 1, 1}, {kernel / 2, kernel / 2, kernel / 2}};
}

Adam::Adam(ParameterList params, AdamOptions options) : options_(options) {
  for (auto& p : params) slots_.push_back({p.var, Tensor(p.var.shape(), 0.0), Tensor(p.var.shape(), 0.0), 0});
}

void Adam::step() {
  ++steps_;
  for (auto& s : slots_) {
    if (!s.param.requires_grad()) continue;
    const Tensor& g = s.param.grad();
    if (g.numel() != s.param.value().numel()) continue;
    ++s.t;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    Tensor& p = s.param.mutable_value();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= options_.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

std::uint64_t checksum(const ParameterList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.var.value().data());
    const std::size_t n = p.var.value().numel() * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void set_trainable(const ParameterList& params, bool on) {
  for (const auto& p : params) {
    Var v = p.var;
    v.set_requires_grad(on);
  }
}

void load_values(const ParameterList& dst, const ParameterList& src) {
  std::map<std::string, const Var*> by_name;
  for (const auto& p : src) by_name[p.name] = &p.var;
  for (const auto& p : dst) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw std::runtime_error("missing parameter '" + p.name + "'");
    if (!it->second->value().same_shape(p.var.value())) throw std::runtime_error("shape mismatch for parameter '" + p.name + "'");
    Var v = p.var;
    v.mutable_value() = it->second->value();
  }
}

}  // namespace seqcr::nn

#include <fstream>

namespace seqcr::nn {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'E', 'Q', 'C', 'R', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated checkpoint '" + path + "'");
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::string& metadata_json, const ParameterList& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, metadata_json.size());
  out.write(metadata_json.data(), static_cast<std::streamsize>(metadata_json.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Tensor& v = p.var.value();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v.ndim()));
    for (int d : v.shape()) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw std::runtime_error("'" + path + "' is not a checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.metadata_json.resize(get<std::uint64_t>(in, path));
  in.read(ck.metadata_json.data(), static_cast<std::streamsize>(ck.metadata_json.size()));
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get<std::uint32_t>(in, path), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    std::vector<int> shape(get<std::uint32_t>(in, path));
    for (int& d : shape) d = get<std::int32_t>(in, path);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint '" + path + "'");
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void load_values(const ParameterList& dst, const Checkpoint& src) {
  ParameterList as_params;
  for (const auto& [name, t] : src.tensors) as_params.push_back({name, Var(t)});
  load_values(dst, as_params);
}

}  // namespace seqcr::nn
