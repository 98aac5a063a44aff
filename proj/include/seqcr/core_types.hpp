#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "seqcr/tensor.hpp"

namespace seqcr {

inline constexpr int kOpticalBands = 13;
inline constexpr int kSarChannels = 2;
/// Maximum S1/S2 acquisition offset within one pair, inclusive.
inline constexpr int kMaxPairingDays = 14;

using Date = std::chrono::year_month_day;

Date parse_date(const std::string& iso);  // "YYYY-MM-DD"
std::string format_date(const Date& d);
/// Signed day difference a - b.
int days_between(const Date& a, const Date& b);
Date add_days(const Date& d, int days);

enum class OpticalRange { RawDn, ResNet, Unit };
enum class SarRange { RawDb, ResNet, Unit };

std::string to_string(OpticalRange r);
std::string to_string(SarRange r);
OpticalRange parse_optical_range(const std::string& s);
SarRange parse_sar_range(const std::string& s);

/// Bounds implied by a range mode.
struct Interval {
  double lo;
  double hi;
};
Interval bounds(OpticalRange r);
Interval bounds(SarRange r);

/// 13-band multi-spectral raster, (C, H, W).
struct OpticalImage {
  Tensor data;
  OpticalRange range = OpticalRange::RawDn;
  Date timestamp{};
  std::string patch_id;

  int height() const { return data.ndim() == 3 ? data.dim(1) : 0; }
  int width() const { return data.ndim() == 3 ? data.dim(2) : 0; }
};

/// Two-channel (VV, VH) radar raster in decibels, (2, H, W).
struct SarImage {
  Tensor data;
  SarRange range = SarRange::RawDb;
  Date timestamp{};
  std::string patch_id;

  int height() const { return data.ndim() == 3 ? data.dim(1) : 0; }
  int width() const { return data.ndim() == 3 ? data.dim(2) : 0; }
};

/// Binary occlusion map, (H, W), 1 = cloud-covered.
struct CloudMask {
  Tensor data;
  double coverage = 0.0;

  int height() const { return data.ndim() == 2 ? data.dim(0) : 0; }
  int width() const { return data.ndim() == 2 ? data.dim(1) : 0; }
};

/// Builds a mask from a binary grid and fills in its coverage.
CloudMask make_mask(Tensor data);
/// Fraction of ones, counted directly.
double count_coverage(const Tensor& mask);

struct TimeStep {
  SarImage sar;
  OpticalImage optical;
  CloudMask mask;
  int t_index = 0;
};

struct PatchSeries {
  std::vector<TimeStep> steps;
  std::string roi_id;

  std::size_t size() const { return steps.size(); }
};

/// Lists every violated data-model invariant; empty iff the series is well formed.
/// Each entry names the step index and the invariant.
std::vector<std::string> validate(const PatchSeries& series);

}  // namespace seqcr
