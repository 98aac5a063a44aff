#include "seqcr/cloudmask.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "seqcr/preprocess.hpp"

namespace seqcr {

CloudMask ThresholdDetector::detect(const OpticalImage& optical) const {
  const OpticalImage unit = to_eval_range(optical);
  const int h = unit.height(), w = unit.width();
  Tensor m({h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double b = unit.data.at(kBlueBand, i, j);
      const double g = unit.data.at(kGreenBand, i, j);
      const double r = unit.data.at(kRedBand, i, j);
      const double mean = (b + g + r) / 3.0;
      const double var = ((b - mean) * (b - mean) + (g - mean) * (g - mean) + (r - mean) * (r - mean)) / 3.0;
      m.at(i, j) = (mean > brightness_ && std::sqrt(var) < whiteness_) ? 1.0 : 0.0;
    }
  }
  return make_mask(std::move(m));
}

namespace {

struct Registry {
  std::mutex mu;
  std::map<std::string, DetectorFactory> factories{
      {"threshold", [] { return std::make_unique<ThresholdDetector>(); }}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_detector(const std::string& name, DetectorFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<CloudDetector> make_detector(const std::string& name) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.factories.find(name);
  if (it == r.factories.end()) throw DetectorError("unknown cloud detector '" + name + "'");
  return it->second();
}

std::vector<std::string> detector_names() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> names;
  for (const auto& [k, _] : r.factories) names.push_back(k);
  return names;
}

CloudMask detect_clouds(const OpticalImage& optical, const CloudDetector& detector) {
  CloudMask mask;
  try {
    mask = detector.detect(optical);
  } catch (const std::exception& e) {
    throw DetectorError("detector '" + detector.name() + "' failed: " + e.what());
  }
  if (mask.height() != optical.height() || mask.width() != optical.width()) {
    throw DetectorError("detector '" + detector.name() + "' returned a mask of the wrong shape");
  }
  for (double v : mask.data.values()) {
    if (v != 0.0 && v != 1.0) throw DetectorError("detector '" + detector.name() + "' returned a non-binary mask");
  }
  mask.coverage = count_coverage(mask.data);
  return mask;
}

CoverageHistogram coverage_histogram(std::span<const double> coverages, int bins) {
  if (coverages.empty()) throw std::invalid_argument("coverage histogram needs at least one mask");
  if (bins < 1) throw std::invalid_argument("coverage histogram needs at least one bin");
  CoverageHistogram h;
  h.counts.assign(bins, 0);
  for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
  // Summed in sorted order so the moments do not depend on input order.
  std::vector<double> sorted(coverages.begin(), coverages.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double c : sorted) {
    int b = static_cast<int>(std::floor(c * bins));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
    sum += c;
  }
  const double n = static_cast<double>(coverages.size());
  h.mean = sum / n;
  double ss = 0.0;
  for (double c : sorted) ss += (c - h.mean) * (c - h.mean);
  h.stddev = std::sqrt(ss / n);
  return h;
}

CoverageHistogram coverage_histogram(std::span<const CloudMask> masks, int bins) {
  std::vector<double> cov;
  cov.reserve(masks.size());
  for (const auto& m : masks) cov.push_back(m.coverage);
  return coverage_histogram(std::span<const double>(cov), bins);
}

}  // namespace seqcr
