#pragma once

#include <span>
#include <stdexcept>

#include "seqcr/core_types.hpp"

namespace seqcr {

class BaselineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MaskedImage {
  OpticalImage image;  // UNIT range
  CloudMask mask;
};

/// Proxy value for pixels that are cloudy at every time point.
inline constexpr double kMosaicProxy = 0.5;

/// Input with the smallest coverage, returned unmodified; ties go to the earliest.
OpticalImage least_cloudy(std::span<const MaskedImage> inputs);

/// Per-pixel temporal composite: mean over clear time points, kMosaicProxy when none.
OpticalImage mosaic(std::span<const MaskedImage> inputs);

}  // namespace seqcr
