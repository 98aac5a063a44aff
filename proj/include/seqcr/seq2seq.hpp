#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seqcr/dataset_io.hpp"
#include "seqcr/objectives.hpp"

namespace seqcr {

enum class InputSource { Sar, Noise };
std::string to_string(InputSource s);
InputSource parse_input_source(const std::string& s);

struct Seq2SeqConfig {
  InputSource input_source = InputSource::Sar;
  int passes = 20;
  int iters_per_pass = 100;
  int batch_n = 5;  // temporally adjacent steps per window
  double lr = 0.01;
  int depth = 4;    // encoder stages
  int width = 32;
  bool skip_connections = true;
  std::uint64_t noise_seed = 0;
  double noise_sigma = 0.1;
  double lambda_l2 = 1.0;
  double lambda_perc = 0.01;
};

std::vector<std::string> check_config(const Seq2SeqConfig& config);
std::string to_json(const Seq2SeqConfig& config);
/// "seq2seq-unet" or "seq2seq-noskip".
std::string config_name(const Seq2SeqConfig& config);

/// Symmetric 3-D (time x height x width) encoder-decoder. Encoder stages after
/// the first halve the spatial size; time length is preserved throughout.
class Seq2SeqModel {
 public:
  Seq2SeqModel(const Seq2SeqConfig& config, nn::Rng& rng);

  /// (2, T, H, W) -> (13, T, H, W) in [0, 1].
  nn::Var forward_graph(const nn::Var& input) const;
  nn::ParameterList parameters() const;
  const Seq2SeqConfig& config() const { return config_; }

 private:
  Seq2SeqConfig config_;
  std::vector<std::pair<nn::Conv3d, nn::Conv3d>> encoder_;
  std::vector<nn::Conv3d> decoder_;
  nn::Conv3d output_;
};

Seq2SeqModel build_seq2seq(const Seq2SeqConfig& config, nn::Rng& rng);

struct Seq2SeqFit {
  std::vector<OpticalImage> predictions;  // UNIT range, one per step
  std::vector<double> loss_trace;         // per iteration
  std::vector<double> pass_losses;        // mean loss per pass
  int passes_run = 0;
};

/// Called after every pass with its mean loss and a callable producing the
/// current predictions. Returning false stops training.
using Seq2SeqPassHook =
    std::function<bool(int pass, double pass_loss, const std::function<std::vector<OpticalImage>()>& predict_all)>;

/// Windows of batch_n adjacent steps (stride 1), or a single window over the
/// whole series when it is shorter.
std::vector<int> window_starts(int T, int batch_n);
/// Window whose centre is closest to step t; ties go to the earliest.
int central_window(int t, int T, int batch_n);

/// Trains a fresh network on this series alone and returns its prediction
/// for every step. The series is used in RAW or UNIT range.
Seq2SeqFit fit_seq2seq(const PatchSeries& series, const Seq2SeqConfig& config, const FeatureExtractor& fx, Rng& rng,
                       const Seq2SeqPassHook& hook = {});

/// Cached prediction for step t.
const OpticalImage& predict(const Seq2SeqFit& fit, int t);

}  // namespace seqcr
