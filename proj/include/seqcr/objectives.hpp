#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqcr/core_types.hpp"
#include "seqcr/nn/layers.hpp"

namespace seqcr {

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed, differentiable map from (C, T, H, W) images to one or more feature
/// grids. Each time slice is processed independently.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual std::vector<nn::Var> extract(const nn::Var& images) const = 0;
};

/// Features are the pixels themselves; reduces the perceptual term to L2.
class IdentityExtractor final : public FeatureExtractor {
 public:
  std::string name() const override { return "identity"; }
  std::vector<nn::Var> extract(const nn::Var& images) const override { return {images}; }
};

/// Three stride-2 3x3 convolution stages (16/32/64 channels) with ReLU,
/// seed-initialised and frozen.
class ConvPyramidExtractor final : public FeatureExtractor {
 public:
  explicit ConvPyramidExtractor(std::uint64_t seed = 1234, int in_channels = kOpticalBands);

  std::string name() const override { return "conv-pyramid"; }
  std::vector<nn::Var> extract(const nn::Var& images) const override;

  /// Replaces the random weights by a stored parameter file.
  void load_weights(const std::string& path);
  nn::ParameterList parameters() const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<nn::Conv3d> stages_;
};

/// Extractor by name ("conv-pyramid" or "identity"), optionally with weights.
std::unique_ptr<FeatureExtractor> make_feature_extractor(const std::string& name, std::uint64_t seed = 1234,
                                                         const std::string& weights_path = "");

// Graph-level losses. `pred` is (C, T, H, W); targets are constants of the same shape.

/// Mean |pred - target| over all entries.
nn::Var l1_loss(const nn::Var& pred, const Tensor& target);

/// Equal-weight mean over feature stages of the mean squared feature distance.
/// With a mask ((H, W) or (T, H, W), 1 = cloudy) both inputs are multiplied by
/// (1 - m) before extraction.
nn::Var perceptual_loss(const nn::Var& pred, const Tensor& target, const FeatureExtractor& fx,
                        const Tensor* mask = nullptr);

struct Seq2PointLossWeights {
  double l1 = 100.0;
  double perceptual = 1.0;
};

nn::Var seq2point_loss(const nn::Var& pred, const Tensor& target, const FeatureExtractor& fx,
                       Seq2PointLossWeights weights = {});

struct Seq2SeqLossWeights {
  double l2 = 1.0;
  double perceptual = 0.01;
};

/// Masked reconstruction loss over cloud-free entries. masks: (T, H, W).
/// The L2 term is the mean over steps of each step's squared error averaged
/// over its clear entries (0 for a step with none).
nn::Var seq2seq_loss(const nn::Var& pred_seq, const Tensor& target_seq, const Tensor& masks,
                     const FeatureExtractor& fx, Seq2SeqLossWeights weights = {});

// Image-level conveniences (no gradient).
double l1_loss(const OpticalImage& pred, const OpticalImage& target);
double perceptual_loss(const OpticalImage& pred, const OpticalImage& target, const FeatureExtractor& fx,
                       const CloudMask* mask = nullptr);
double seq2point_loss(const OpticalImage& pred, const OpticalImage& target, const FeatureExtractor& fx,
                      Seq2PointLossWeights weights = {});

/// (C, H, W) -> (C, 1, H, W).
Tensor as_frame(const Tensor& chw);
/// Stacks T (C, H, W) images into (C, T, H, W).
Tensor stack_frames(const std::vector<const Tensor*>& frames);

}  // namespace seqcr
