#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqcr/core_types.hpp"

namespace seqcr {

class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps an optical image to a binary cloud mask of the same footprint.
/// Implementations must be deterministic and safe for concurrent calls.
class CloudDetector {
 public:
  virtual ~CloudDetector() = default;
  virtual std::string name() const = 0;
  virtual CloudMask detect(const OpticalImage& optical) const = 0;
};

/// Brightness-whiteness rule on the visible bands (B2, B3, B4) in UNIT range:
/// cloud iff mean > brightness and population std across the three < whiteness.
class ThresholdDetector final : public CloudDetector {
 public:
  explicit ThresholdDetector(double brightness = 0.35, double whiteness = 0.1)
      : brightness_(brightness), whiteness_(whiteness) {}

  std::string name() const override { return "threshold"; }
  CloudMask detect(const OpticalImage& optical) const override;

  double brightness() const { return brightness_; }
  double whiteness() const { return whiteness_; }

 private:
  double brightness_;
  double whiteness_;
};

using DetectorFactory = std::function<std::unique_ptr<CloudDetector>()>;

/// Name-keyed detector plug-ins. "threshold" is always registered.
void register_detector(const std::string& name, DetectorFactory factory);
std::unique_ptr<CloudDetector> make_detector(const std::string& name);
std::vector<std::string> detector_names();

/// Runs a detector and checks its output; failures are rethrown as
/// DetectorError carrying the detector name.
CloudMask detect_clouds(const OpticalImage& optical, const CloudDetector& detector);

struct CoverageHistogram {
  std::vector<double> edges;  // bins + 1 edges over [0, 1]
  std::vector<int> counts;    // last bin is closed on the right
  double mean = 0.0;
  double stddev = 0.0;        // population
};

CoverageHistogram coverage_histogram(std::span<const CloudMask> masks, int bins);
/// Same statistic from precomputed coverage values.
CoverageHistogram coverage_histogram(std::span<const double> coverages, int bins);

/// Indices of the Sentinel-2 visible bands B2, B3, B4.
inline constexpr int kBlueBand = 1;
inline constexpr int kGreenBand = 2;
inline constexpr int kRedBand = 3;

}  // namespace seqcr
