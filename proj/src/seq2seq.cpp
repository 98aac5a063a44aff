#include "seqcr/seq2seq.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "seqcr/preprocess.hpp"
#include "seqcr/seq2point.hpp"

namespace seqcr {

using nn::Var;

std::string to_string(InputSource s) { return s == InputSource::Sar ? "sar" : "noise"; }

InputSource parse_input_source(const std::string& s) {
  if (s == "sar" || s == "SAR") return InputSource::Sar;
  if (s == "noise" || s == "NOISE") return InputSource::Noise;
  throw ModelError("unknown input source '" + s + "'");
}

std::vector<std::string> check_config(const Seq2SeqConfig& c) {
  std::vector<std::string> out;
  if (c.passes < 1) out.push_back("passes must be >= 1");
  if (c.iters_per_pass < 1) out.push_back("iters_per_pass must be >= 1");
  if (c.batch_n < 1) out.push_back("batch_n must be >= 1");
  if (c.depth < 1) out.push_back("depth must be >= 1");
  if (c.width < 1) out.push_back("width must be >= 1");
  if (!(c.lr > 0)) out.push_back("lr must be positive");
  if (c.noise_sigma < 0) out.push_back("noise_sigma must be non-negative");
  return out;
}

std::string to_json(const Seq2SeqConfig& c) {
  nlohmann::json j{{"kind", "seq2seq"},
                   {"name", config_name(c)},
                   {"input_source", to_string(c.input_source)},
                   {"passes", c.passes},
                   {"iters_per_pass", c.iters_per_pass},
                   {"batch_n", c.batch_n},
                   {"lr", c.lr},
                   {"depth", c.depth},
                   {"width", c.width},
                   {"skip_connections", c.skip_connections},
                   {"noise_seed", c.noise_seed},
                   {"noise_sigma", c.noise_sigma},
                   {"lambda_l2", c.lambda_l2},
                   {"lambda_perc", c.lambda_perc}};
  return j.dump();
}

std::string config_name(const Seq2SeqConfig& c) { return c.skip_connections ? "seq2seq-unet" : "seq2seq-noskip"; }

Seq2SeqModel::Seq2SeqModel(const Seq2SeqConfig& config, nn::Rng& rng) : config_(config) {
  const auto problems = check_config(config);
  if (!problems.empty()) throw ModelError("invalid seq2seq config: " + problems.front());
  const int w = config.width;
  const auto same = nn::conv3d_geometry(3);
  nn::ConvGeometry down = same;
  down.stride = {1, 2, 2};
  for (int d = 0; d < config.depth; ++d) {
    const std::string p = "enc" + std::to_string(d);
    encoder_.emplace_back(nn::Conv3d(p + ".conv0", d == 0 ? kSarChannels : w, w, d == 0 ? same : down, rng),
                          nn::Conv3d(p + ".conv1", w, w, same, rng));
  }
  for (int d = config.depth - 1; d >= 1; --d) {
    decoder_.emplace_back("dec" + std::to_string(d), config.skip_connections ? 2 * w : w, w, same, rng);
  }
  output_ = nn::Conv3d("out", w, kOpticalBands, {{1, 1, 1}, {1, 1, 1}, {0, 0, 0}}, rng);
}

Var Seq2SeqModel::forward_graph(const Var& input) const {
  const auto& s = input.shape();
  if (s.size() != 4 || s[0] != kSarChannels) {
    throw ModelError("seq2seq expects (2, T, H, W) input, got " + shape_string(s));
  }
  constexpr double slope = 0.2;
  std::vector<Var> skips;
  Var x = input;
  for (const auto& [c0, c1] : encoder_) {
    x = nn::leaky_relu(c1(nn::leaky_relu(c0(x), slope)), slope);
    skips.push_back(x);
  }
  for (std::size_t k = 0; k < decoder_.size(); ++k) {
    const Var& skip = skips[skips.size() - 2 - k];
    Var up = nn::fit_spatial(nn::upsample_spatial(x, 2), skip.shape()[2], skip.shape()[3]);
    if (config_.skip_connections) {
      const Var parts[] = {up, skip};
      up = nn::concat_channels(parts);
    }
    x = nn::leaky_relu(decoder_[k](up), slope);
  }
  return nn::sigmoid(output_(x));
}

nn::ParameterList Seq2SeqModel::parameters() const {
  nn::ParameterList out;
  for (const auto& [c0, c1] : encoder_) {
    c0.collect(out);
    c1.collect(out);
  }
  for (const auto& d : decoder_) d.collect(out);
  output_.collect(out);
  return out;
}

Seq2SeqModel build_seq2seq(const Seq2SeqConfig& config, nn::Rng& rng) { return Seq2SeqModel(config, rng); }

std::vector<int> window_starts(int T, int batch_n) {
  if (T <= batch_n) return {0};
  std::vector<int> out;
  for (int s = 0; s + batch_n <= T; ++s) out.push_back(s);
  return out;
}

int central_window(int t, int T, int batch_n) {
  const auto starts = window_starts(T, batch_n);
  const int len = std::min(T, batch_n);
  int best = 0;
  double best_dist = 1e300;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (t < starts[k] || t >= starts[k] + len) continue;
    const double dist = std::abs(starts[k] + (len - 1) / 2.0 - t);
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(k);
    }
  }
  return best;
}

namespace {

Tensor window_tensor(const Tensor& seq, int t0, int len) {
  nn::NoGradGuard g;
  return nn::slice_time(Var(seq), t0, len).value();
}

Tensor window_masks(const Tensor& masks, int t0, int len) {
  const std::size_t plane = static_cast<std::size_t>(masks.dim(1)) * masks.dim(2);
  Tensor out({len, masks.dim(1), masks.dim(2)});
  std::copy_n(masks.data() + t0 * plane, len * plane, out.data());
  return out;
}

}  // namespace

Seq2SeqFit fit_seq2seq(const PatchSeries& series, const Seq2SeqConfig& config, const FeatureExtractor& fx, Rng& rng,
                       const Seq2SeqPassHook& hook) {
  if (series.steps.empty()) throw ModelError("fit needs a non-empty series");
  const int T = static_cast<int>(series.steps.size());
  const int h = series.steps[0].optical.height(), w = series.steps[0].optical.width();

  std::vector<OpticalImage> optical;
  std::vector<Tensor> sar;
  Tensor masks({T, h, w});
  for (int t = 0; t < T; ++t) {
    const TimeStep& s = series.steps[t];
    if (s.mask.height() != h || s.mask.width() != w) {
      throw ModelError("fit needs a cloud mask for every step (step " + std::to_string(t) + ")");
    }
    optical.push_back(to_eval_range(s.optical));
    sar.push_back(s.sar.range == SarRange::RawDb ? clip_rescale(s.sar, sar_unit_spec()).data : to_eval_range(s.sar).data);
    std::copy(s.mask.data.values().begin(), s.mask.data.values().end(), masks.data() + static_cast<std::size_t>(t) * h * w);
  }
  std::vector<const Tensor*> opt_ptrs, sar_ptrs;
  for (const auto& o : optical) opt_ptrs.push_back(&o.data);
  for (const auto& s : sar) sar_ptrs.push_back(&s);
  const Tensor target = stack_frames(opt_ptrs);

  Tensor drive;
  if (config.input_source == InputSource::Sar) {
    drive = stack_frames(sar_ptrs);
  } else {
    // Sampled once and held fixed for the whole fit.
    drive = Tensor({kSarChannels, T, h, w});
    nn::Rng noise_rng(config.noise_seed);
    std::normal_distribution<double> gauss(0.0, config.noise_sigma);
    for (double& v : drive.values()) v = gauss(noise_rng);
  }

  nn::Rng init_rng(rng());
  Seq2SeqModel model(config, init_rng);
  nn::Adam opt(model.parameters(), {config.lr, 0.9, 0.999, 1e-8});
  const Seq2SeqLossWeights weights{config.lambda_l2, config.lambda_perc};

  const auto starts = window_starts(T, config.batch_n);
  const int len = std::min(T, config.batch_n);
  std::vector<Tensor> win_drive, win_target, win_masks;
  for (int s : starts) {
    win_drive.push_back(window_tensor(drive, s, len));
    win_target.push_back(window_tensor(target, s, len));
    win_masks.push_back(window_masks(masks, s, len));
  }

  auto predict_all = [&]() {
    nn::NoGradGuard g;
    std::vector<Tensor> cache(starts.size());
    std::vector<OpticalImage> out;
    for (int t = 0; t < T; ++t) {
      const int k = central_window(t, T, config.batch_n);
      if (cache[k].empty()) cache[k] = model.forward_graph(Var(win_drive[k])).value();
      OpticalImage img = optical[t];
      img.range = OpticalRange::Unit;
      img.data = Tensor({kOpticalBands, h, w});
      const int local = t - starts[k];
      const std::size_t plane = static_cast<std::size_t>(h) * w;
      for (int c = 0; c < kOpticalBands; ++c)
        for (std::size_t i = 0; i < plane; ++i)
          img.data[c * plane + i] = std::clamp(cache[k][(static_cast<std::size_t>(c) * len + local) * plane + i], 0.0, 1.0);
      out.push_back(std::move(img));
    }
    return out;
  };

  Seq2SeqFit fit;
  for (int pass = 0; pass < config.passes; ++pass) {
    double pass_sum = 0.0;
    for (int it = 0; it < config.iters_per_pass; ++it) {
      const std::size_t k = static_cast<std::size_t>(it) % starts.size();
      opt.zero_grad();
      const Var loss = seq2seq_loss(model.forward_graph(Var(win_drive[k])), win_target[k], win_masks[k], fx, weights);
      if (!std::isfinite(loss.item())) {
        throw TrainingError("non-finite seq2seq loss at pass " + std::to_string(pass) + ", iteration " + std::to_string(it));
      }
      nn::backward(loss);
      opt.step();
      fit.loss_trace.push_back(loss.item());
      pass_sum += loss.item();
    }
    fit.pass_losses.push_back(pass_sum / config.iters_per_pass);
    fit.passes_run = pass + 1;
    if (hook && !hook(pass, fit.pass_losses.back(), predict_all)) break;
  }
  fit.predictions = predict_all();
  return fit;
}

const OpticalImage& predict(const Seq2SeqFit& fit, int t) {
  if (t < 0 || t >= static_cast<int>(fit.predictions.size())) {
    throw std::out_of_range("step " + std::to_string(t) + " outside the fitted series");
  }
  return fit.predictions[t];
}

}  // namespace seqcr
