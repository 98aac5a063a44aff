#include "seqcr/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace seqcr {

std::string to_string(ChannelScope s) { return s == ChannelScope::Rgb3 ? "RGB3" : "ALL13"; }

ChannelScope parse_channel_scope(const std::string& s) {
  std::string k = s;
  for (char& ch : k) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (k == "rgb3" || k == "rgb") return ChannelScope::Rgb3;
  if (k == "all13" || k == "all") return ChannelScope::All13;
  throw MetricError("unknown channel scope '" + s + "'");
}

std::vector<int> scope_bands(ChannelScope scope) {
  if (scope == ChannelScope::Rgb3) return {3, 2, 1};
  std::vector<int> all(kOpticalBands);
  for (int i = 0; i < kOpticalBands; ++i) all[i] = i;
  return all;
}

namespace {

void check_pair(const OpticalImage& x, const OpticalImage& y) {
  if (x.range != OpticalRange::Unit || y.range != OpticalRange::Unit) {
    throw MetricError("metrics require UNIT range images (got " + to_string(x.range) + ", " + to_string(y.range) + ")");
  }
  if (!x.data.same_shape(y.data)) {
    throw MetricError("metric shape mismatch " + shape_string(x.data.shape()) + " vs " + shape_string(y.data.shape()));
  }
  if (x.data.ndim() != 3 || x.data.dim(0) != kOpticalBands) throw MetricError("metrics expect 13-band images");
}

}  // namespace

std::optional<double> nrmse(const OpticalImage& x, const OpticalImage& y, ChannelScope scope, MaskMode mode,
                            const CloudMask* mask) {
  check_pair(x, y);
  const int h = x.height(), w = x.width();
  if (mode != MaskMode::All) {
    if (!mask) throw MetricError("CLOUDY/CLEAR NRMSE needs a mask");
    if (mask->height() != h || mask->width() != w) throw MetricError("mask shape does not match images");
  }
  double ss = 0.0;
  std::size_t n = 0;
  for (int b : scope_bands(scope)) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        if (mode == MaskMode::Cloudy && mask->data.at(i, j) != 1.0) continue;
        if (mode == MaskMode::Clear && mask->data.at(i, j) == 1.0) continue;
        const double d = x.data.at(b, i, j) - y.data.at(b, i, j);
        ss += d * d;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(ss / static_cast<double>(n));
}

double psnr_from_nrmse(double v) {
  if (v < 1e-5) return kPsnrCap;
  return 20.0 * std::log10(1.0 / v);
}

double psnr(const OpticalImage& x, const OpticalImage& y, ChannelScope scope) {
  return psnr_from_nrmse(*nrmse(x, y, scope));
}

double ssim(const OpticalImage& x, const OpticalImage& y, ChannelScope scope, SsimOptions options) {
  check_pair(x, y);
  const int h = x.height(), w = x.width();
  const int wh = options.global ? h : options.window;
  const int ww = options.global ? w : options.window;
  if (h < wh || w < ww) throw MetricError("image is smaller than the SSIM window");
  const double n = static_cast<double>(wh) * ww;
  double total = 0.0;
  std::size_t count = 0;
  for (int b : scope_bands(scope)) {
    // Summed-area tables for x, y, x^2, y^2, xy.
    const int sh = h + 1, sw = w + 1;
    std::vector<double> sx(sh * sw, 0.0), sy(sx), sxx(sx), syy(sx), sxy(sx);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double a = x.data.at(b, i, j), c = y.data.at(b, i, j);
        const int k = (i + 1) * sw + (j + 1);
        const int up = i * sw + (j + 1), left = (i + 1) * sw + j, diag = i * sw + j;
        sx[k] = a + sx[up] + sx[left] - sx[diag];
        sy[k] = c + sy[up] + sy[left] - sy[diag];
        sxx[k] = a * a + sxx[up] + sxx[left] - sxx[diag];
        syy[k] = c * c + syy[up] + syy[left] - syy[diag];
        sxy[k] = a * c + sxy[up] + sxy[left] - sxy[diag];
      }
    }
    auto box = [&](const std::vector<double>& s, int i, int j) {
      return s[(i + wh) * sw + (j + ww)] - s[i * sw + (j + ww)] - s[(i + wh) * sw + j] + s[i * sw + j];
    };
    for (int i = 0; i + wh <= h; ++i) {
      for (int j = 0; j + ww <= w; ++j) {
        const double mx = box(sx, i, j) / n, my = box(sy, i, j) / n;
        const double vx = std::max(box(sxx, i, j) / n - mx * mx, 0.0);
        const double vy = std::max(box(syy, i, j) / n - my * my, 0.0);
        const double cxy = box(sxy, i, j) / n - mx * my;
        total += ((2 * mx * my + kSsimEps1) * (2 * cxy + kSsimEps2)) /
                 ((mx * mx + my * my + kSsimEps1) * (vx + vy + kSsimEps2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

std::optional<double> sam(const OpticalImage& x, const OpticalImage& y, ChannelScope scope, bool degrees) {
  check_pair(x, y);
  double xy = 0.0, xx = 0.0, yy = 0.0;
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  for (int b : scope_bands(scope)) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double a = x.data[b * plane + i], c = y.data[b * plane + i];
      xy += a * c;
      xx += a * a;
      yy += c * c;
    }
  }
  if (xx == 0.0 || yy == 0.0) return std::nullopt;
  // half-angle form: acos loses precision near 0
  const double nx = std::sqrt(xx), ny = std::sqrt(yy);
  double diff = 0.0, sum = 0.0;
  for (int b : scope_bands(scope)) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double a = x.data[b * plane + i] / nx, c = y.data[b * plane + i] / ny;
      diff += (a - c) * (a - c);
      sum += (a + c) * (a + c);
    }
  }
  const double angle = 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
  return degrees ? angle * 180.0 / std::numbers::pi : angle;
}

EvalRecord evaluate(const OpticalImage& pred, const OpticalImage& target, const CloudMask& mask, ChannelScope scope,
                    bool sam_degrees) {
  EvalRecord r;
  r.channel_scope = scope;
  r.nrmse_all = *nrmse(pred, target, scope, MaskMode::All);
  r.nrmse_cloudy = nrmse(pred, target, scope, MaskMode::Cloudy, &mask);
  r.nrmse_clear = nrmse(pred, target, scope, MaskMode::Clear, &mask);
  r.psnr = psnr_from_nrmse(r.nrmse_all);
  r.ssim = ssim(pred, target, scope);
  r.sam = sam(pred, target, scope, sam_degrees);
  return r;
}

}  // namespace seqcr
