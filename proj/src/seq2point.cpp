#include "seqcr/seq2point.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "seqcr/preprocess.hpp"

namespace seqcr {

using nn::Var;
using nlohmann::json;

std::vector<std::string> check_config(const Seq2PointConfig& c) {
  std::vector<std::string> out;
  if (c.n < 1) out.push_back("n must be >= 1");
  if (c.branch_depth < 1) out.push_back("branch_depth must be >= 1");
  if (c.feature_width < 1) out.push_back("feature_width must be >= 1");
  if (c.n_3d_blocks < 0) out.push_back("n_3d_blocks must be >= 0");
  if (c.freeze_steps < 0) out.push_back("freeze_steps must be >= 0");
  if (!(c.lr > 0)) out.push_back("lr must be positive");
  if (c.batch != 1) out.push_back("only batch = 1 is supported");
  if (c.epochs < 1) out.push_back("epochs must be >= 1");
  if (c.lambda_l1 < 0 || c.lambda_perc < 0) out.push_back("loss weights must be non-negative");
  return out;
}

std::string to_json(const Seq2PointConfig& c) {
  json j{{"kind", "seq2point"},
         {"n", c.n},
         {"use_sar", c.use_sar},
         {"branch_depth", c.branch_depth},
         {"feature_width", c.feature_width},
         {"n_3d_blocks", c.n_3d_blocks},
         {"freeze_steps", c.freeze_steps},
         {"lr", c.lr},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"batch", c.batch},
         {"epochs", c.epochs},
         {"lambda_l1", c.lambda_l1},
         {"lambda_perc", c.lambda_perc},
         {"max_cov", c.max_cov},
         {"max_steps", c.max_steps},
         {"init_seed", c.init_seed},
         {"extractor", c.extractor},
         {"extractor_seed", c.extractor_seed}};
  return j.dump();
}

Seq2PointConfig seq2point_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("kind", "") != "seq2point") throw ModelError("checkpoint is not a seq2point model");
  Seq2PointConfig c;
  c.n = j.at("n");
  c.use_sar = j.at("use_sar");
  c.branch_depth = j.at("branch_depth");
  c.feature_width = j.at("feature_width");
  c.n_3d_blocks = j.at("n_3d_blocks");
  c.freeze_steps = j.at("freeze_steps");
  c.lr = j.at("lr");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.batch = j.at("batch");
  c.epochs = j.at("epochs");
  c.lambda_l1 = j.at("lambda_l1");
  c.lambda_perc = j.at("lambda_perc");
  c.max_cov = j.at("max_cov");
  c.max_steps = j.at("max_steps");
  c.init_seed = j.at("init_seed");
  c.extractor = j.at("extractor");
  c.extractor_seed = j.at("extractor_seed");
  return c;
}

ResNetBranch::ResNetBranch(int in_channels, int width, int depth, nn::Rng& rng) : in_channels_(in_channels) {
  const auto g = nn::conv2d_geometry(3);
  input_ = nn::Conv3d("branch.input", in_channels, width, g, rng);
  for (int b = 0; b < depth; ++b) {
    const std::string p = "branch.block" + std::to_string(b);
    blocks_.emplace_back(nn::Conv3d(p + ".conv0", width, width, g, rng), nn::Conv3d(p + ".conv1", width, width, g, rng));
  }
  output_ = nn::Conv3d("branch.output", width, kOpticalBands, g, rng);
}

Var ResNetBranch::features(const Var& x) const {
  Var h = nn::relu(input_(x));
  for (const auto& [c0, c1] : blocks_) {
    const Var r = c1(nn::relu(c0(h)));
    h = nn::add(h, nn::scale(r, 0.1));
  }
  return h;
}

Var ResNetBranch::standalone(const Var& x) const {
  const Var optical = nn::slice_channels(x, 0, kOpticalBands);
  return nn::add(optical, output_(features(x)));
}

nn::ParameterList ResNetBranch::parameters() const {
  nn::ParameterList out;
  input_.collect(out);
  for (const auto& [c0, c1] : blocks_) {
    c0.collect(out);
    c1.collect(out);
  }
  output_.collect(out);
  return out;
}

Seq2PointModel::Seq2PointModel(const Seq2PointConfig& config) : config_(config) {
  const auto problems = check_config(config);
  if (!problems.empty()) throw ModelError("invalid seq2point config: " + problems.front());
  nn::Rng rng(config.init_seed);
  const int width = config.feature_width;
  branch_ = ResNetBranch(kOpticalBands + (config.use_sar ? kSarChannels : 0), width, config.branch_depth, rng);
  for (int b = 0; b < config.n_3d_blocks; ++b) {
    temporal_blocks_.emplace_back("head.conv3d" + std::to_string(b), width, width, nn::conv3d_geometry(3), rng);
  }
  nn::ConvGeometry collapse;
  collapse.kernel = {config.n, 3, 3};
  collapse.stride = {1, 1, 1};
  collapse.padding = {0, 1, 1};
  collapse_ = nn::Conv3d("head.collapse", width, width, collapse, rng);
  projection_ = nn::Conv3d("head.projection", width, kOpticalBands, nn::conv2d_geometry(3), rng);
}

nn::ParameterList Seq2PointModel::head_parameters() const {
  nn::ParameterList out;
  for (const auto& b : temporal_blocks_) b.collect(out);
  collapse_.collect(out);
  projection_.collect(out);
  return out;
}

nn::ParameterList Seq2PointModel::parameters() const {
  nn::ParameterList out = branch_parameters();
  for (auto& p : head_parameters()) out.push_back(p);
  return out;
}

Var Seq2PointModel::forward_graph(std::span<const Tensor> frames) const {
  if (static_cast<int>(frames.size()) != config_.n) {
    throw ModelError("seq2point expects " + std::to_string(config_.n) + " time points, got " +
                     std::to_string(frames.size()));
  }
  std::vector<Var> feats;
  for (const auto& f : frames) {
    if (f.ndim() != 4 || f.dim(0) != branch_.in_channels() || f.dim(1) != 1) {
      throw ModelError("seq2point branch expects (" + std::to_string(branch_.in_channels()) + ", 1, H, W) input, got " +
                       shape_string(f.shape()));
    }
    feats.push_back(branch_.features(Var(f)));
  }
  Var x = nn::stack_time(feats);
  for (const auto& b : temporal_blocks_) x = nn::relu(b(x));
  x = nn::relu(collapse_(x));
  return projection_(x);
}

Seq2PointModel build_seq2point(const Seq2PointConfig& config) { return Seq2PointModel(config); }

TimeStep prepare_resnet_step(const TimeStep& raw) {
  TimeStep s = raw;
  s.optical = clip_rescale(raw.optical, optical_resnet_spec());
  s.sar = clip_rescale(raw.sar, sar_resnet_spec());
  return s;
}

Tensor branch_input(const TimeStep& step, bool use_sar) {
  if (step.optical.range != OpticalRange::ResNet || (use_sar && step.sar.range != SarRange::ResNet)) {
    throw ModelError("seq2point inputs must be in RESNET range mode (optical " + to_string(step.optical.range) +
                     ", sar " + to_string(step.sar.range) + ")");
  }
  const int h = step.optical.height(), w = step.optical.width();
  const int c = kOpticalBands + (use_sar ? kSarChannels : 0);
  Tensor out({c, 1, h, w});
  std::copy(step.optical.data.values().begin(), step.optical.data.values().end(), out.data());
  if (use_sar) {
    if (step.sar.height() != h || step.sar.width() != w) throw ModelError("SAR and optical footprints differ");
    std::copy(step.sar.data.values().begin(), step.sar.data.values().end(), out.data() + step.optical.data.numel());
  }
  return out;
}

namespace {

OpticalImage to_image(const Var& out, const OpticalImage& like) {
  OpticalImage img = like;
  const auto& s = out.shape();
  img.data = out.value().reshaped({s[0], s[2], s[3]});
  for (double& v : img.data.values()) v = std::clamp(v, 0.0, 5.0);
  img.range = OpticalRange::ResNet;
  return img;
}

}  // namespace

OpticalImage forward(const Seq2PointModel& model, std::span<const TimeStep> inputs) {
  if (inputs.empty()) throw ModelError("seq2point forward needs inputs");
  std::vector<Tensor> frames;
  for (const auto& s : inputs) frames.push_back(branch_input(s, model.config().use_sar));
  nn::NoGradGuard guard;
  return to_image(model.forward_graph(frames), inputs.back().optical);
}

OpticalImage forward_branch(const Seq2PointModel& model, const TimeStep& input) {
  nn::NoGradGuard guard;
  return to_image(model.branch().standalone(Var(branch_input(input, model.config().use_sar))), input.optical);
}

namespace {

std::vector<PatchSeries> prepare_all(std::span<const PatchSeries> series) {
  std::vector<PatchSeries> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    PatchSeries p = s;
    for (auto& step : p.steps) step = prepare_resnet_step(step);
    out.push_back(std::move(p));
  }
  return out;
}

void check_finite(double loss, long step, const PatchSeries& s, const TrainingTuple& tuple) {
  if (std::isfinite(loss)) return;
  std::string idx;
  for (int i : tuple.input_indices) idx += std::to_string(i) + " ";
  throw TrainingError("non-finite loss at step " + std::to_string(step) + " on series " + s.roi_id + "/" +
                      tuple.target.patch_id + " (inputs " + idx + "target " + std::to_string(tuple.target_index) + ")");
}

}  // namespace

Seq2PointTrainResult train_seq2point(Seq2PointModel& model, std::span<const PatchSeries> series, Rng& rng,
                                     const Seq2PointHook& hook) {
  if (series.empty()) throw TrainingError("training split is empty");
  const Seq2PointConfig& cfg = model.config();
  const auto fx = make_feature_extractor(cfg.extractor, cfg.extractor_seed);
  const std::vector<PatchSeries> prepared = prepare_all(series);
  const auto branch = model.branch_parameters();
  nn::Adam opt(model.parameters(), {cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  const Seq2PointLossWeights weights{cfg.lambda_l1, cfg.lambda_perc};

  Seq2PointTrainResult result;
  std::vector<std::size_t> order(series.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k : order) {
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) return result;
      TrainingTuple tuple;
      try {
        tuple = sample_training_tuple(series[k], cfg.n, cfg.max_cov, rng);
      } catch (const DatasetError&) {
        ++result.skipped_series;
        continue;
      }
      const bool frozen = result.steps < cfg.freeze_steps;
      nn::set_trainable(branch, !frozen);

      std::vector<Tensor> frames;
      for (int i : tuple.input_indices) frames.push_back(branch_input(prepared[k].steps[i], cfg.use_sar));
      const Tensor target = as_frame(prepared[k].steps[tuple.target_index].optical.data);
      opt.zero_grad();
      const Var loss = seq2point_loss(model.forward_graph(frames), target, *fx, weights);
      check_finite(loss.item(), result.steps, series[k], tuple);
      nn::backward(loss);
      opt.step();
      result.loss_trace.push_back(loss.item());
      ++result.steps;
      if (hook) hook({result.steps, loss.item(), frozen}, model);
    }
  }
  nn::set_trainable(branch, true);
  return result;
}

Seq2PointTrainResult train_seq2point(Seq2PointModel& model, const DatasetManifest& manifest, Rng& rng,
                                     const Seq2PointHook& hook) {
  std::vector<PatchSeries> series;
  for (const auto& [roi, patch] : manifest.patches_in(Split::Train)) series.push_back(load_series(manifest, roi, patch));
  return train_seq2point(model, std::span<const PatchSeries>(series), rng, hook);
}

std::vector<double> pretrain_branch(Seq2PointModel& model, std::span<const PatchSeries> series, long steps, Rng& rng) {
  if (series.empty()) throw TrainingError("pretraining set is empty");
  const Seq2PointConfig& cfg = model.config();
  const auto fx = make_feature_extractor(cfg.extractor, cfg.extractor_seed);
  const std::vector<PatchSeries> prepared = prepare_all(series);
  nn::Adam opt(model.branch_parameters(), {cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  std::vector<double> trace;
  std::uniform_int_distribution<std::size_t> pick(0, series.size() - 1);
  long attempts = 0;
  while (static_cast<long>(trace.size()) < steps) {
    if (++attempts > 100 * steps + 100) throw TrainingError("no series yields a single-time-point tuple");
    const std::size_t k = pick(rng);
    TrainingTuple tuple;
    try {
      tuple = sample_training_tuple(series[k], 1, cfg.max_cov, rng);
    } catch (const DatasetError&) {
      continue;
    }
    const Tensor in = branch_input(prepared[k].steps[tuple.input_indices[0]], cfg.use_sar);
    const Tensor target = as_frame(prepared[k].steps[tuple.target_index].optical.data);
    opt.zero_grad();
    const Var loss = seq2point_loss(model.branch().standalone(Var(in)), target, *fx, {cfg.lambda_l1, cfg.lambda_perc});
    check_finite(loss.item(), static_cast<long>(trace.size()), series[k], tuple);
    nn::backward(loss);
    opt.step();
    trace.push_back(loss.item());
  }
  return trace;
}

void save_checkpoint(const Seq2PointModel& model, const std::string& path) {
  nn::write_checkpoint(path, to_json(model.config()), model.parameters());
}

Seq2PointModel load_seq2point_checkpoint(const std::string& path) {
  const nn::Checkpoint ck = nn::read_checkpoint(path);
  Seq2PointModel model(seq2point_config_from_json(ck.metadata_json));
  nn::load_values(model.parameters(), ck);
  return model;
}

void load_branch_checkpoint(Seq2PointModel& model, const std::string& path) {
  nn::Checkpoint ck = nn::read_checkpoint(path);
  std::erase_if(ck.tensors, [](const auto& t) { return t.first.rfind("branch.", 0) != 0; });
  nn::load_values(model.branch_parameters(), ck);
}

}  // namespace seqcr
