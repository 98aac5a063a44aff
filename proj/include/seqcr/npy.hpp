#pragma once

#include <filesystem>
#include <stdexcept>

#include "seqcr/tensor.hpp"

namespace seqcr {

class RasterIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NpyDtype { U16, F32, F64 };

/// Single-array raster container in NumPy .npy (format 1.0, little endian, C order).
/// U16 rounds and saturates; F32 narrows.
void write_npy(const std::filesystem::path& path, const Tensor& tensor, NpyDtype dtype);

struct NpyArray {
  Tensor tensor;
  NpyDtype dtype = NpyDtype::F64;
};

NpyArray read_npy(const std::filesystem::path& path);

/// Value after a round trip through `dtype`.
double quantize(double v, NpyDtype dtype);

}  // namespace seqcr
