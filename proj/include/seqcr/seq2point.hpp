#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqcr/dataset_io.hpp"
#include "seqcr/objectives.hpp"

namespace seqcr {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Seq2PointConfig {
  int n = 3;
  bool use_sar = true;
  int branch_depth = 16;
  int feature_width = 256;
  int n_3d_blocks = 2;
  long freeze_steps = 25000;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch = 1;
  int epochs = 10;
  double lambda_l1 = 100.0;
  double lambda_perc = 1.0;
  double max_cov = 0.5;
  long max_steps = 0;  // 0: no cap beyond epochs
  std::uint64_t init_seed = 0;
  std::string extractor = "conv-pyramid";
  std::uint64_t extractor_seed = 1234;
};

std::vector<std::string> check_config(const Seq2PointConfig& config);
std::string to_json(const Seq2PointConfig& config);
Seq2PointConfig seq2point_config_from_json(const std::string& text);

/// Single-time-point residual cloud-removal network: input convolution,
/// residual blocks with 0.1 scaling, and (standalone use only) a projection
/// to 13 bands added to the input optical image.
class ResNetBranch {
 public:
  ResNetBranch() = default;
  ResNetBranch(int in_channels, int width, int depth, nn::Rng& rng);

  /// (Cin, 1, H, W) -> (width, 1, H, W).
  nn::Var features(const nn::Var& x) const;
  /// (Cin, 1, H, W) -> (13, 1, H, W) correction added to the optical input.
  nn::Var standalone(const nn::Var& x) const;

  nn::ParameterList parameters() const;
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_ = 0;
  nn::Conv3d input_;
  std::vector<std::pair<nn::Conv3d, nn::Conv3d>> blocks_;
  nn::Conv3d output_;
};

/// n parameter-shared branches, temporal stacking, 3-D convolutions, 13-band output.
class Seq2PointModel {
 public:
  explicit Seq2PointModel(const Seq2PointConfig& config);

  const Seq2PointConfig& config() const { return config_; }
  int branch_input_channels() const { return branch_.in_channels(); }

  /// One (Cin, 1, H, W) frame per time point -> (13, 1, H, W), unclamped.
  nn::Var forward_graph(std::span<const Tensor> frames) const;

  const ResNetBranch& branch() const { return branch_; }
  nn::ParameterList branch_parameters() const { return branch_.parameters(); }
  nn::ParameterList head_parameters() const;
  nn::ParameterList parameters() const;

 private:
  Seq2PointConfig config_;
  ResNetBranch branch_;  // one instance, applied to every time point
  std::vector<nn::Conv3d> temporal_blocks_;
  nn::Conv3d collapse_;
  nn::Conv3d projection_;
};

Seq2PointModel build_seq2point(const Seq2PointConfig& config);

/// Clip-and-rescale a RAW step into the ResNet ranges.
TimeStep prepare_resnet_step(const TimeStep& raw);

/// Network input for one RESNET-range step: optical (+ SAR) as (Cin, 1, H, W).
Tensor branch_input(const TimeStep& step, bool use_sar);

/// Inference on n RESNET-range steps; output clamped to [0, 5].
OpticalImage forward(const Seq2PointModel& model, std::span<const TimeStep> inputs);

/// Standalone branch on one RESNET-range step; output clamped to [0, 5].
OpticalImage forward_branch(const Seq2PointModel& model, const TimeStep& input);

struct Seq2PointTrainStep {
  long step = 0;
  double loss = 0.0;
  bool branch_frozen = false;
};

using Seq2PointHook = std::function<void(const Seq2PointTrainStep&, const Seq2PointModel&)>;

struct Seq2PointTrainResult {
  std::vector<double> loss_trace;
  long steps = 0;
  long skipped_series = 0;
};

/// Branch parameters are frozen for the first freeze_steps updates, then the
/// whole network trains end to end. One tuple per series per epoch; series
/// without a valid tuple are skipped. Series must be RAW (preprocessed here).
Seq2PointTrainResult train_seq2point(Seq2PointModel& model, std::span<const PatchSeries> series, Rng& rng,
                                     const Seq2PointHook& hook = {});
Seq2PointTrainResult train_seq2point(Seq2PointModel& model, const DatasetManifest& manifest, Rng& rng,
                                     const Seq2PointHook& hook = {});

/// Single-time-point pretraining of the branch (standalone head).
std::vector<double> pretrain_branch(Seq2PointModel& model, std::span<const PatchSeries> series, long steps, Rng& rng);

void save_checkpoint(const Seq2PointModel& model, const std::string& path);
Seq2PointModel load_seq2point_checkpoint(const std::string& path);
/// Replaces branch weights from a checkpoint (branch.* tensors).
void load_branch_checkpoint(Seq2PointModel& model, const std::string& path);

}  // namespace seqcr
