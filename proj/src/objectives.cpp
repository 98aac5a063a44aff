#include "seqcr/objectives.hpp"

#include <algorithm>

namespace seqcr {

using nn::Var;

ConvPyramidExtractor::ConvPyramidExtractor(std::uint64_t seed, int in_channels) : seed_(seed) {
  nn::Rng rng(seed);
  const int widths[] = {16, 32, 64};
  int in = in_channels;
  for (int s = 0; s < 3; ++s) {
    stages_.emplace_back("fx.stage" + std::to_string(s), in, widths[s], nn::conv2d_geometry(3, 2), rng);
    in = widths[s];
  }
  nn::set_trainable(parameters(), false);
}

nn::ParameterList ConvPyramidExtractor::parameters() const {
  nn::ParameterList out;
  for (const auto& s : stages_) s.collect(out);
  return out;
}

std::vector<Var> ConvPyramidExtractor::extract(const Var& images) const {
  std::vector<Var> feats;
  Var x = images;
  for (const auto& s : stages_) {
    x = nn::relu(s(x));
    feats.push_back(x);
  }
  return feats;
}

void ConvPyramidExtractor::load_weights(const std::string& path) {
  nn::load_values(parameters(), nn::read_checkpoint(path));
  nn::set_trainable(parameters(), false);
}

std::unique_ptr<FeatureExtractor> make_feature_extractor(const std::string& name, std::uint64_t seed,
                                                         const std::string& weights_path) {
  if (name == "identity") return std::make_unique<IdentityExtractor>();
  if (name == "conv-pyramid") {
    auto fx = std::make_unique<ConvPyramidExtractor>(seed);
    if (!weights_path.empty()) fx->load_weights(weights_path);
    return fx;
  }
  throw LossError("unknown feature extractor '" + name + "'");
}

namespace {

void check_pair(const Var& pred, const Tensor& target, const char* who) {
  if (pred.shape() != target.shape()) {
    throw LossError(std::string(who) + ": shape mismatch " + shape_string(pred.shape()) + " vs " +
                    shape_string(target.shape()));
  }
}

Tensor clear_weights(const Tensor& mask) {
  Tensor w = mask;
  for (double& v : w.values()) v = 1.0 - v;
  return w;
}

Var zero_scalar() { return Var(Tensor({1}, 0.0)); }

}  // namespace

Var l1_loss(const Var& pred, const Tensor& target) {
  check_pair(pred, target, "l1_loss");
  return nn::mean_abs_diff(pred, Var(target));
}

Var perceptual_loss(const Var& pred, const Tensor& target, const FeatureExtractor& fx, const Tensor* mask) {
  check_pair(pred, target, "perceptual_loss");
  Var p = pred;
  Var t(target);
  if (mask) {
    const Tensor w = clear_weights(*mask);
    p = nn::mul_mask(p, w);
    t = nn::mul_mask(t, w);
  }
  std::vector<Var> fp, ft;
  try {
    fp = fx.extract(p);
    ft = fx.extract(t);
  } catch (const std::exception& e) {
    throw LossError("feature extractor '" + fx.name() + "' failed: " + e.what());
  }
  if (fp.empty() || fp.size() != ft.size()) throw LossError("feature extractor '" + fx.name() + "' returned no stages");
  std::vector<Var> terms;
  for (std::size_t s = 0; s < fp.size(); ++s) terms.push_back(nn::mean_sq_diff(fp[s], ft[s]));
  const std::vector<double> w(terms.size(), 1.0 / static_cast<double>(terms.size()));
  return nn::weighted_sum(terms, w);
}

Var seq2point_loss(const Var& pred, const Tensor& target, const FeatureExtractor& fx, Seq2PointLossWeights weights) {
  if (weights.l1 < 0 || weights.perceptual < 0) throw LossError("seq2point_loss: weights must be non-negative");
  std::vector<Var> terms{l1_loss(pred, target)};
  std::vector<double> w{weights.l1};
  if (weights.perceptual > 0) {
    terms.push_back(perceptual_loss(pred, target, fx));
    w.push_back(weights.perceptual);
  }
  return nn::weighted_sum(terms, w);
}

Var seq2seq_loss(const Var& pred_seq, const Tensor& target_seq, const Tensor& masks, const FeatureExtractor& fx,
                 Seq2SeqLossWeights weights) {
  check_pair(pred_seq, target_seq, "seq2seq_loss");
  if (weights.l2 < 0 || weights.perceptual < 0) throw LossError("seq2seq_loss: weights must be non-negative");
  const auto& s = pred_seq.shape();
  if (s.size() != 4) throw LossError("seq2seq_loss: expected (C, T, H, W)");
  const int c = s[0], t = s[1], h = s[2], w = s[3];
  if (masks.ndim() != 3 || masks.dim(0) != t || masks.dim(1) != h || masks.dim(2) != w) {
    throw LossError("seq2seq_loss: mask sequence " + shape_string(masks.shape()) + " does not match prediction " +
                    shape_string(s));
  }
  const Tensor clear = clear_weights(masks);
  const Var masked_pred = nn::mul_mask(pred_seq, clear);
  const Tensor masked_target = nn::mul_mask(Var(target_seq), clear).value();

  std::vector<Var> step_terms;
  std::vector<double> step_weights;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ti = 0; ti < t; ++ti) {
    double clear_px = 0.0;
    for (std::size_t i = 0; i < plane; ++i) clear_px += clear[ti * plane + i];
    if (clear_px == 0.0) continue;
    const Var p = nn::slice_time(masked_pred, ti, 1);
    const Var q = nn::slice_time(Var(masked_target), ti, 1);
    // mean over all C*H*W entries rescaled to a mean over the clear ones
    step_terms.push_back(nn::mean_sq_diff(p, q));
    step_weights.push_back(static_cast<double>(plane) / clear_px / t);
  }
  Var l2 = step_terms.empty() ? zero_scalar() : nn::weighted_sum(step_terms, step_weights);
  (void)c;

  std::vector<Var> terms{l2};
  std::vector<double> tw{weights.l2};
  if (weights.perceptual > 0) {
    terms.push_back(perceptual_loss(pred_seq, target_seq, fx, &masks));
    tw.push_back(weights.perceptual);
  }
  return nn::weighted_sum(terms, tw);
}

Tensor as_frame(const Tensor& chw) {
  if (chw.ndim() != 3) throw LossError("expected a (C, H, W) image");
  return chw.reshaped({chw.dim(0), 1, chw.dim(1), chw.dim(2)});
}

Tensor stack_frames(const std::vector<const Tensor*>& frames) {
  if (frames.empty()) throw LossError("stack_frames: no frames");
  const int c = frames[0]->dim(0), h = frames[0]->dim(1), w = frames[0]->dim(2);
  const int t = static_cast<int>(frames.size());
  Tensor out({c, t, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ti = 0; ti < t; ++ti) {
    if (frames[ti]->shape() != frames[0]->shape()) throw LossError("stack_frames: frame shapes differ");
    for (int ci = 0; ci < c; ++ci)
      std::copy_n(frames[ti]->data() + ci * plane, plane, out.data() + (static_cast<std::size_t>(ci) * t + ti) * plane);
  }
  return out;
}

namespace {

void check_images(const OpticalImage& a, const OpticalImage& b, const char* who) {
  if (!a.data.same_shape(b.data)) throw LossError(std::string(who) + ": shape mismatch");
  if (a.range != b.range) throw LossError(std::string(who) + ": range modes differ");
}

}  // namespace

double l1_loss(const OpticalImage& pred, const OpticalImage& target) {
  check_images(pred, target, "l1_loss");
  nn::NoGradGuard g;
  return l1_loss(Var(as_frame(pred.data)), as_frame(target.data)).item();
}

double perceptual_loss(const OpticalImage& pred, const OpticalImage& target, const FeatureExtractor& fx,
                       const CloudMask* mask) {
  check_images(pred, target, "perceptual_loss");
  if (mask && (mask->height() != pred.height() || mask->width() != pred.width())) {
    throw LossError("perceptual_loss: mask shape mismatch");
  }
  nn::NoGradGuard g;
  return perceptual_loss(Var(as_frame(pred.data)), as_frame(target.data), fx, mask ? &mask->data : nullptr).item();
}

double seq2point_loss(const OpticalImage& pred, const OpticalImage& target, const FeatureExtractor& fx,
                      Seq2PointLossWeights weights) {
  check_images(pred, target, "seq2point_loss");
  nn::NoGradGuard g;
  return seq2point_loss(Var(as_frame(pred.data)), as_frame(target.data), fx, weights).item();
}

}  // namespace seqcr
