#include "seqcr/preprocess.hpp"

#include <algorithm>
#include <string>

namespace seqcr {

ValueRangeSpec optical_resnet_spec() {
  return {std::vector<double>(kOpticalBands, 0.0), std::vector<double>(kOpticalBands, 10000.0), 0.0, 5.0};
}
ValueRangeSpec sar_resnet_spec() { return {{-25.0, -32.5}, {0.0, 0.0}, 0.0, 2.0}; }
ValueRangeSpec optical_unit_spec() {
  return {std::vector<double>(kOpticalBands, 0.0), std::vector<double>(kOpticalBands, 10000.0), 0.0, 1.0};
}
ValueRangeSpec sar_unit_spec() { return {{-25.0, -25.0}, {0.0, 0.0}, 0.0, 1.0}; }

double clip_rescale_value(double v, double clip_lo, double clip_hi, double out_lo, double out_hi) {
  const double c = std::clamp(v, clip_lo, clip_hi);
  return out_lo + (c - clip_lo) / (clip_hi - clip_lo) * (out_hi - out_lo);
}

namespace {

void check_spec(const ValueRangeSpec& spec, int channels) {
  if (static_cast<int>(spec.clip_lo.size()) != channels || static_cast<int>(spec.clip_hi.size()) != channels) {
    throw PreprocessError("value range spec needs " + std::to_string(channels) + " channel bounds");
  }
  for (int c = 0; c < channels; ++c) {
    if (!(spec.clip_lo[c] < spec.clip_hi[c])) throw PreprocessError("clip_lo must be below clip_hi");
  }
  if (!(spec.out_lo < spec.out_hi)) throw PreprocessError("out_lo must be below out_hi");
}

Tensor apply_spec(const Tensor& data, const ValueRangeSpec& spec) {
  Tensor out = data;
  const int channels = data.dim(0);
  const std::size_t plane = data.numel() / channels;
  for (int c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out[c * plane + i];
      v = clip_rescale_value(v, spec.clip_lo[c], spec.clip_hi[c], spec.out_lo, spec.out_hi);
    }
  }
  return out;
}

Tensor linear_remap(const Tensor& data, Interval from, Interval to) {
  Tensor out = data;
  for (double& v : out.values()) v = clip_rescale_value(v, from.lo, from.hi, to.lo, to.hi);
  return out;
}

template <typename Mode>
Mode output_mode(const ValueRangeSpec& spec, std::initializer_list<Mode> candidates) {
  for (Mode m : candidates) {
    const Interval b = bounds(m);
    if (b.lo == spec.out_lo && b.hi == spec.out_hi) return m;
  }
  throw PreprocessError("output interval matches no range mode");
}

template <typename Image>
std::vector<Image> slice_image(const Image& scene, int size) {
  if (size <= 0) throw PreprocessError("patch size must be positive");
  const int h = scene.height(), w = scene.width();
  if (h < size || w < size) {
    throw PreprocessError("scene " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than patch size " +
                          std::to_string(size));
  }
  Image meta = scene;
  meta.data = Tensor();
  std::vector<Image> out;
  for (int r = 0; r < h / size; ++r) {
    for (int c = 0; c < w / size; ++c) {
      Image p = meta;
      p.data = crop(scene.data, r * size, c * size, size, size);
      p.patch_id = scene.patch_id + "_r" + std::to_string(r) + "_c" + std::to_string(c);
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace

Tensor crop(const Tensor& chw, int row, int col, int height, int width) {
  const int channels = chw.dim(0);
  Tensor out({channels, height, width});
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) out.at(c, i, j) = chw.at(c, row + i, col + j);
  return out;
}

OpticalImage clip_rescale(const OpticalImage& image, const ValueRangeSpec& spec) {
  if (image.range != OpticalRange::RawDn) {
    throw PreprocessError("optical image is already rescaled (" + to_string(image.range) + "); refusing to preprocess twice");
  }
  check_spec(spec, image.data.dim(0));
  OpticalImage out = image;
  out.data = apply_spec(image.data, spec);
  out.range = output_mode(spec, {OpticalRange::ResNet, OpticalRange::Unit});
  return out;
}

SarImage clip_rescale(const SarImage& image, const ValueRangeSpec& spec) {
  if (image.range != SarRange::RawDb) {
    throw PreprocessError("SAR image is already rescaled (" + to_string(image.range) + "); refusing to preprocess twice");
  }
  check_spec(spec, image.data.dim(0));
  SarImage out = image;
  out.data = apply_spec(image.data, spec);
  out.range = output_mode(spec, {SarRange::ResNet, SarRange::Unit});
  return out;
}

OpticalImage to_eval_range(const OpticalImage& image) {
  switch (image.range) {
    case OpticalRange::Unit: return image;
    case OpticalRange::RawDn: return clip_rescale(image, optical_unit_spec());
    case OpticalRange::ResNet: {
      OpticalImage out = image;
      out.data = linear_remap(image.data, bounds(OpticalRange::ResNet), bounds(OpticalRange::Unit));
      out.range = OpticalRange::Unit;
      return out;
    }
  }
  return image;
}

SarImage to_eval_range(const SarImage& image) {
  switch (image.range) {
    case SarRange::Unit: return image;
    case SarRange::RawDb: return clip_rescale(image, sar_unit_spec());
    case SarRange::ResNet: {
      SarImage out = image;
      out.data = linear_remap(image.data, bounds(SarRange::ResNet), bounds(SarRange::Unit));
      out.range = SarRange::Unit;
      return out;
    }
  }
  return image;
}

OpticalImage to_resnet_range(const OpticalImage& unit) {
  if (unit.range == OpticalRange::ResNet) return unit;
  const OpticalImage u = to_eval_range(unit);
  OpticalImage out = u;
  out.data = linear_remap(u.data, bounds(OpticalRange::Unit), bounds(OpticalRange::ResNet));
  out.range = OpticalRange::ResNet;
  return out;
}

std::vector<OpticalImage> slice_patches(const OpticalImage& scene, int size) { return slice_image(scene, size); }
std::vector<SarImage> slice_patches(const SarImage& scene, int size) { return slice_image(scene, size); }

std::vector<CloudMask> slice_patches(const CloudMask& scene, int size) {
  if (size <= 0) throw PreprocessError("patch size must be positive");
  const int h = scene.height(), w = scene.width();
  if (h < size || w < size) throw PreprocessError("mask is smaller than patch size");
  const Tensor as3 = scene.data.reshaped({1, h, w});
  std::vector<CloudMask> out;
  for (int r = 0; r < h / size; ++r)
    for (int c = 0; c < w / size; ++c)
      out.push_back(make_mask(crop(as3, r * size, c * size, size, size).reshaped({size, size})));
  return out;
}

}  // namespace seqcr
