#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seqcr/nn/autograd.hpp"

namespace seqcr::nn {

using Rng = std::mt19937_64;

struct NamedParameter {
  std::string name;
  Var var;
};
using ParameterList = std::vector<NamedParameter>;

/// 3-D convolution layer; a 2-D convolution is the kernel-time-1 case.
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(std::string name, int in_channels, int out_channels, const ConvGeometry& geometry, Rng& rng);

  Var operator()(const Var& x) const { return conv3d(x, weight_, bias_, geometry_); }

  void collect(ParameterList& out) const;
  int in_channels() const { return weight_.shape()[1]; }
  int out_channels() const { return weight_.shape()[0]; }
  const ConvGeometry& geometry() const { return geometry_; }

 private:
  std::string name_;
  Var weight_;
  Var bias_;
  ConvGeometry geometry_;
};

/// Spatial-only convolution geometry: kernel (1, k, k), "same" padding.
ConvGeometry conv2d_geometry(int kernel = 3, int stride = 1);
/// Cubic 3-D geometry with "same" padding.
ConvGeometry conv3d_geometry(int kernel = 3);

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// ADAM over a fixed parameter list. Parameters whose requires_grad is off
/// are skipped entirely, moments included.
class Adam {
 public:
  Adam(ParameterList params, AdamOptions options);

  void step();
  void zero_grad();
  const AdamOptions& options() const { return options_; }
  long long steps_taken() const { return steps_; }

 private:
  struct Slot {
    Var param;
    Tensor m;
    Tensor v;
    long long t = 0;
  };
  std::vector<Slot> slots_;
  AdamOptions options_;
  long long steps_ = 0;
};

/// FNV-1a over the raw bytes of every parameter value, in list order.
std::uint64_t checksum(const ParameterList& params);

void set_trainable(const ParameterList& params, bool on);

/// Copies values from `src` into same-named parameters of `dst`.
void load_values(const ParameterList& dst, const ParameterList& src);

}  // namespace seqcr::nn

namespace seqcr::nn {

/// Self-describing parameter file: magic, version, JSON metadata, named tensors.
struct Checkpoint {
  std::string metadata_json;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const std::string& metadata_json, const ParameterList& params);
Checkpoint read_checkpoint(const std::string& path);
/// Copies checkpoint tensors into same-named parameters.
void load_values(const ParameterList& dst, const Checkpoint& src);

}  // namespace seqcr::nn
