#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqcr/core_types.hpp"

namespace seqcr {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChannelScope { Rgb3, All13 };
enum class MaskMode { All, Cloudy, Clear };

std::string to_string(ChannelScope s);
ChannelScope parse_channel_scope(const std::string& s);

/// Band indices in a scope; RGB3 is (B4, B3, B2).
std::vector<int> scope_bands(ChannelScope scope);

inline constexpr double kPsnrCap = 100.0;
inline constexpr double kSsimEps1 = 0.01 * 0.01;
inline constexpr double kSsimEps2 = 0.03 * 0.03;
inline constexpr int kSsimWindow = 8;

/// Root mean squared difference over the selected pixels and bands, or
/// nullopt when the selection is empty. CLOUDY/CLEAR need a mask.
std::optional<double> nrmse(const OpticalImage& x, const OpticalImage& y, ChannelScope scope,
                            MaskMode mode = MaskMode::All, const CloudMask* mask = nullptr);

/// 20 log10(1 / nrmse), capped at kPsnrCap when nrmse < 1e-5.
double psnr_from_nrmse(double nrmse_value);
double psnr(const OpticalImage& x, const OpticalImage& y, ChannelScope scope);

struct SsimOptions {
  int window = kSsimWindow;
  bool global = false;  // one window covering the whole image
};

/// Structural similarity with squared mean/variance terms, averaged over all
/// window positions (stride 1) and bands.
double ssim(const OpticalImage& x, const OpticalImage& y, ChannelScope scope, SsimOptions options = {});

/// Angle between the flattened selections; nullopt if either has zero norm.
std::optional<double> sam(const OpticalImage& x, const OpticalImage& y, ChannelScope scope, bool degrees = false);

struct EvalRecord {
  double nrmse_all = 0.0;
  std::optional<double> nrmse_cloudy;
  std::optional<double> nrmse_clear;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> sam;
  ChannelScope channel_scope = ChannelScope::Rgb3;
};

/// All metrics for one prediction. `mask` marks the pixels scored as cloudy.
EvalRecord evaluate(const OpticalImage& pred, const OpticalImage& target, const CloudMask& mask,
                    ChannelScope scope = ChannelScope::Rgb3, bool sam_degrees = false);

}  // namespace seqcr
