#pragma once

#include <stdexcept>
#include <vector>

#include "seqcr/core_types.hpp"

namespace seqcr {

class PreprocessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-channel clip window followed by an affine map onto [out_lo, out_hi].
struct ValueRangeSpec {
  std::vector<double> clip_lo;
  std::vector<double> clip_hi;
  double out_lo = 0.0;
  double out_hi = 1.0;
};

// Rescaling pipelines of the ResNet-backbone models and of every other network.
ValueRangeSpec optical_resnet_spec();  // [0, 10000] -> [0, 5]
ValueRangeSpec sar_resnet_spec();      // VV [-25, 0], VH [-32.5, 0] -> [0, 2]
ValueRangeSpec optical_unit_spec();    // [0, 10000] -> [0, 1]
ValueRangeSpec sar_unit_spec();        // [-25, 0] on both channels -> [0, 1]

/// Scalar form of the clip-and-rescale rule applied to each value.
double clip_rescale_value(double v, double clip_lo, double clip_hi, double out_lo, double out_hi);

/// Clips and rescales a RAW image. The output range mode is the one whose
/// bounds equal [out_lo, out_hi]. Throws PreprocessError on non-RAW input.
OpticalImage clip_rescale(const OpticalImage& image, const ValueRangeSpec& spec);
SarImage clip_rescale(const SarImage& image, const ValueRangeSpec& spec);

/// Remaps any range mode onto [0, 1] for evaluation.
OpticalImage to_eval_range(const OpticalImage& image);
SarImage to_eval_range(const SarImage& image);

/// Inverse of to_eval_range for in-range values.
OpticalImage to_resnet_range(const OpticalImage& unit);

/// Non-overlapping size x size tiles in row-major order; trailing remainders
/// are dropped. Patch ids are "<scene id>_r<row>_c<col>".
std::vector<OpticalImage> slice_patches(const OpticalImage& scene, int size = 256);
std::vector<SarImage> slice_patches(const SarImage& scene, int size = 256);
std::vector<CloudMask> slice_patches(const CloudMask& scene, int size = 256);

/// Crops a (C, H, W) tensor.
Tensor crop(const Tensor& chw, int row, int col, int height, int width);

}  // namespace seqcr
