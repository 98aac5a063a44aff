#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <unistd.h>

#include "seqcr/baselines.hpp"
#include "seqcr/core_types.hpp"
#include "seqcr/metrics.hpp"
#include "seqcr/nn/autograd.hpp"

namespace fixtures {

using seqcr::CloudMask;
using seqcr::OpticalImage;
using seqcr::Tensor;
using Gen = std::mt19937_64;

inline Tensor uniform(std::vector<int> shape, Gen& g, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(g);
  return t;
}

inline OpticalImage unit_image(int h, int w, Gen& g) {
  OpticalImage img;
  img.data = uniform({seqcr::kOpticalBands, h, w}, g);
  img.range = seqcr::OpticalRange::Unit;
  return img;
}

inline CloudMask random_mask(int h, int w, double p, Gen& g) {
  Tensor m({h, w});
  std::bernoulli_distribution b(p);
  for (double& v : m.values()) v = b(g) ? 1.0 : 0.0;
  return seqcr::make_mask(std::move(m));
}

// --- brute-force reference implementations ---------------------------------

inline std::optional<double> nrmse_oracle(const OpticalImage& x, const OpticalImage& y, const std::vector<int>& bands,
                                          const CloudMask* mask, double keep) {
  double ss = 0;
  long n = 0;
  for (int b : bands)
    for (int i = 0; i < x.height(); ++i)
      for (int j = 0; j < x.width(); ++j) {
        if (mask && mask->data.at(i, j) != keep) continue;
        const double d = x.data.at(b, i, j) - y.data.at(b, i, j);
        ss += d * d;
        ++n;
      }
  if (n == 0) return std::nullopt;
  return std::sqrt(ss / n);
}

// Direct window loops with two-pass variance.
inline double ssim_oracle(const OpticalImage& x, const OpticalImage& y, const std::vector<int>& bands, int win) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  long count = 0;
  for (int b : bands)
    for (int i = 0; i + win <= x.height(); ++i)
      for (int j = 0; j + win <= x.width(); ++j) {
        double mx = 0, my = 0;
        for (int a = 0; a < win; ++a)
          for (int c = 0; c < win; ++c) mx += x.data.at(b, i + a, j + c), my += y.data.at(b, i + a, j + c);
        mx /= win * win;
        my /= win * win;
        double vx = 0, vy = 0, cxy = 0;
        for (int a = 0; a < win; ++a)
          for (int c = 0; c < win; ++c) {
            const double dx = x.data.at(b, i + a, j + c) - mx, dy = y.data.at(b, i + a, j + c) - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
          }
        vx /= win * win;
        vy /= win * win;
        cxy /= win * win;
        total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return total / count;
}

inline double sam_oracle(const OpticalImage& x, const OpticalImage& y, const std::vector<int>& bands) {
  std::vector<double> a, c;
  for (int b : bands)
    for (int i = 0; i < x.height(); ++i)
      for (int j = 0; j < x.width(); ++j) a.push_back(x.data.at(b, i, j)), c.push_back(y.data.at(b, i, j));
  double dot = 0, na = 0, nc = 0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * c[k], na += a[k] * a[k], nc += c[k] * c[k];
  return std::acos(std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nc))));
}

inline OpticalImage mosaic_oracle(const std::vector<seqcr::MaskedImage>& stack) {
  OpticalImage out = stack.front().image;
  const int h = out.height(), w = out.width();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      std::vector<const OpticalImage*> clear;
      for (const auto& s : stack)
        if (s.mask.data.at(i, j) == 0.0) clear.push_back(&s.image);
      for (int b = 0; b < out.data.dim(0); ++b) {
        if (clear.empty()) {
          out.data.at(b, i, j) = 0.5;
          continue;
        }
        double acc = 0;
        for (const auto* c : clear) acc += c->data.at(b, i, j);
        out.data.at(b, i, j) = acc / clear.size();
      }
    }
  return out;
}

// --- finite differences ----------------------------------------------------

struct GradCheck {
  double max_rel_error = 0.0;
  int coordinates = 0;
};

/// Compares the analytic gradient of f at `x` with central differences on
/// `samples` random coordinates. f must build a fresh graph on each call.
inline GradCheck grad_check(const std::function<seqcr::nn::Var(const seqcr::nn::Var&)>& f, const Tensor& x,
                            int samples, Gen& g, double h = 1e-6) {
  seqcr::nn::Var leaf(x, true);
  seqcr::nn::backward(f(leaf));
  const Tensor analytic = leaf.grad();
  GradCheck out;
  std::uniform_int_distribution<std::size_t> pick(0, x.numel() - 1);
  for (int s = 0; s < samples; ++s) {
    const std::size_t k = pick(g);
    Tensor xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    double fp, fm;
    {
      seqcr::nn::NoGradGuard ng;
      fp = f(seqcr::nn::Var(xp)).item();
      fm = f(seqcr::nn::Var(xm)).item();
    }
    const double numeric = (fp - fm) / (2 * h);
    const double a = analytic.numel() ? analytic[k] : 0.0;
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / scale);
    ++out.coordinates;
  }
  return out;
}

}  // namespace fixtures

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fixtures {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("seqcr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// FNV-1a over relative paths and contents of every regular file, in sorted
/// order. Files named `skip` are left out.
inline std::uint64_t tree_checksum(const std::filesystem::path& root, const std::string& skip = "") {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != skip) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  };
  for (const auto& f : files) {
    mix(std::filesystem::relative(f, root).string());
    mix(slurp(f));
  }
  return h;
}

}  // namespace fixtures
