#include "seqcr/baselines.hpp"

#include <string>

namespace seqcr {

namespace {

void check_inputs(std::span<const MaskedImage> inputs, const char* who) {
  if (inputs.empty()) throw BaselineError(std::string(who) + ": no inputs");
  for (const auto& in : inputs) {
    if (in.image.range != OpticalRange::Unit) throw BaselineError(std::string(who) + ": inputs must be in UNIT range");
  }
}

}  // namespace

OpticalImage least_cloudy(std::span<const MaskedImage> inputs) {
  check_inputs(inputs, "least_cloudy");
  std::size_t best = 0;
  for (std::size_t i = 1; i < inputs.size(); ++i)
    if (inputs[i].mask.coverage < inputs[best].mask.coverage) best = i;
  return inputs[best].image;
}

OpticalImage mosaic(std::span<const MaskedImage> inputs) {
  check_inputs(inputs, "mosaic");
  const auto& shape = inputs[0].image.data.shape();
  const int c = shape.at(0), h = shape.at(1), w = shape.at(2);
  for (const auto& in : inputs) {
    if (in.image.data.shape() != shape || in.mask.height() != h || in.mask.width() != w) {
      throw BaselineError("mosaic: inputs must share one shape");
    }
  }
  OpticalImage out = inputs[0].image;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      int clear = 0;
      for (const auto& in : inputs) clear += in.mask.data.at(i, j) == 0.0;
      for (int b = 0; b < c; ++b) {
        if (clear == 0) {
          out.data.at(b, i, j) = kMosaicProxy;
          continue;
        }
        double s = 0.0;
        for (const auto& in : inputs)
          if (in.mask.data.at(i, j) == 0.0) s += in.image.data.at(b, i, j);
        out.data.at(b, i, j) = s / clear;
      }
    }
  }
  return out;
}

}  // namespace seqcr
