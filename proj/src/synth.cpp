#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "seqcr/dataset_io.hpp"

namespace seqcr {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(splitmix(seed) ^ a) ^ b) ^ c);
}

/// Smooth value noise in [0, 1]: octaves of bilinearly interpolated lattices.
Tensor value_noise(int size, int base_cell, int octaves, Rng& rng) {
  Tensor out({size, size}, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double amp = 1.0, total = 0.0;
  int cell = base_cell;
  for (int o = 0; o < octaves && cell >= 1; ++o) {
    const int n = size / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(n) * n);
    for (double& v : lattice) v = u(rng);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        const double fy = static_cast<double>(i) / cell, fx = static_cast<double>(j) / cell;
        const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        double ty = fy - y0, tx = fx - x0;
        ty = ty * ty * (3 - 2 * ty);
        tx = tx * tx * (3 - 2 * tx);
        const double a = lattice[y0 * n + x0], b = lattice[y0 * n + x0 + 1];
        const double c = lattice[(y0 + 1) * n + x0], d = lattice[(y0 + 1) * n + x0 + 1];
        out.at(i, j) += amp * ((a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty);
      }
    }
    total += amp;
    amp *= 0.5;
    cell /= 2;
  }
  double lo = 1e300, hi = -1e300;
  for (double v : out.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double& v : out.values()) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
  (void)total;
  return out;
}

// Land-cover classes: water, vegetation, bare soil, built-up.
constexpr int kClasses = 4;
constexpr std::array<double, 3> kClassThresholds{0.3, 0.5, 0.72};

constexpr std::array<std::array<double, kOpticalBands>, kClasses> kSpectra{{
    {0.060, 0.050, 0.040, 0.030, 0.020, 0.015, 0.012, 0.010, 0.009, 0.005, 0.002, 0.005, 0.003},
    {0.040, 0.040, 0.070, 0.040, 0.100, 0.250, 0.300, 0.330, 0.340, 0.120, 0.010, 0.180, 0.090},
    {0.080, 0.090, 0.120, 0.150, 0.180, 0.200, 0.220, 0.240, 0.250, 0.100, 0.020, 0.300, 0.250},
    {0.120, 0.130, 0.140, 0.150, 0.160, 0.170, 0.180, 0.190, 0.190, 0.080, 0.020, 0.220, 0.200},
}};
// Mean backscatter per class (VV, VH) in dB.
constexpr std::array<std::array<double, 2>, kClasses> kBackscatter{{
    {-22.0, -28.0}, {-10.0, -16.0}, {-13.0, -20.0}, {-5.0, -12.0}}};
// Cloud reflectance relative to its visible brightness.
constexpr std::array<double, kOpticalBands> kCloudShape{1.0, 1.0, 1.0, 1.0, 1.0, 0.98, 0.97, 0.96,
                                                         0.95, 0.6, 0.3, 0.7, 0.6};

int landcover(double z) {
  int c = 0;
  while (c < 3 && z >= kClassThresholds[c]) ++c;
  return c;
}

double beta_draw(const BetaParams& p, Rng& rng) {
  std::gamma_distribution<double> ga(p.a, 1.0), gb(p.b, 1.0);
  const double x = ga(rng), y = gb(rng);
  return x + y > 0 ? x / (x + y) : 0.0;
}

}  // namespace

std::string synth_roi_id(int roi_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "roi%03d", roi_index);
  return buf;
}

std::string synth_patch_id(int roi_index, int patch_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "roi%03d_p%03d", roi_index, patch_index);
  return buf;
}

std::vector<std::string> check_config(const SynthConfig& c) {
  std::vector<std::string> out;
  if (c.n_rois < 1) out.push_back("n_rois must be >= 1");
  if (c.n_test_rois < 0 || c.n_test_rois > c.n_rois) out.push_back("n_test_rois must lie in [0, n_rois]");
  if (c.patches_per_roi < 1) out.push_back("patches_per_roi must be >= 1");
  if (c.T < 1) out.push_back("T must be >= 1");
  if (c.size < 8) out.push_back("size must be >= 8");
  if (c.clear_weight < 0 || c.overcast_weight < 0 || std::abs(c.clear_weight + c.overcast_weight - 1.0) > 1e-9) {
    out.push_back("mixture weights must be non-negative and sum to 1");
  }
  for (const auto* b : {&c.clear_beta, &c.overcast_beta})
    if (!(b->a > 0 && b->b > 0)) out.push_back("beta parameters must be positive");
  if (c.max_dt_days < 0 || c.max_dt_days > kMaxPairingDays) out.push_back("max_dt_days must lie in [0, 14]");
  if (c.revisit_days < 1) out.push_back("revisit_days must be >= 1");
  try {
    parse_date(c.start_date);
  } catch (const std::exception& e) {
    out.push_back(e.what());
  }
  return out;
}

double sample_coverage(const SynthConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool clear = u(rng) < config.clear_weight;
  return beta_draw(clear ? config.clear_beta : config.overcast_beta, rng);
}

PatchSeries generate_patch_series(const SynthConfig& config, std::uint64_t seed, int roi_index, int patch_index) {
  const int n = config.size;
  Rng terrain_rng(stream_seed(config.terrain_seed, 0x7e88a1, roi_index, patch_index));
  const Tensor coarse = value_noise(n, std::max(4, n / 4), 3, terrain_rng);
  const Tensor fine = value_noise(n, 4, 2, terrain_rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double phase = 2.0 * M_PI * u(terrain_rng);

  Rng rng(stream_seed(seed, 0x5eed, roi_index, patch_index));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::gamma_distribution<double> speckle(4.0, 0.25);
  std::uniform_int_distribution<int> dt_pick(0, config.max_dt_days);
  std::uniform_int_distribution<int> sign_pick(0, 1);

  const Date start = add_days(parse_date(config.start_date), 3 * roi_index);
  const std::string pid = synth_patch_id(roi_index, patch_index);

  PatchSeries series;
  series.roi_id = synth_roi_id(roi_index);
  for (int t = 0; t < config.T; ++t) {
    const double season = std::sin(2.0 * M_PI * t / std::max(config.T, 1) + phase);
    const double illum = 1.0 + 0.02 * gauss(rng);

    // Clouds: the top-k pixels of a smooth random field, k fixed by the drawn coverage.
    const double cov = sample_coverage(config, rng);
    const Tensor cloud_field = value_noise(n, std::max(4, n / 4), 3, rng);
    const Tensor cloud_texture = value_noise(n, 4, 2, rng);
    const int k = static_cast<int>(std::lround(cov * n * n));
    std::vector<int> order(static_cast<std::size_t>(n) * n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return cloud_field[a] > cloud_field[b]; });
    Tensor mask({n, n}, 0.0);
    for (int i = 0; i < k; ++i) mask[order[i]] = 1.0;

    Tensor optical({kOpticalBands, n, n});
    Tensor sar({kSarChannels, n, n});
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int cls = landcover(coarse.at(i, j));
        const double texture = 1.0 + 0.15 * (fine.at(i, j) - 0.5);
        for (int b = 0; b < kOpticalBands; ++b) {
          double rho = kSpectra[cls][b] * texture * illum;
          if (cls == 1 && b >= 5 && b <= 8) rho *= 1.0 + 0.25 * season;
          rho += 0.002 * gauss(rng);
          if (mask.at(i, j) == 1.0) rho = (0.6 + 0.2 * cloud_texture.at(i, j)) * kCloudShape[b];
          optical.at(b, i, j) = quantize(std::clamp(rho, 0.0, 1.0) * 10000.0, NpyDtype::U16);
        }
        for (int c = 0; c < kSarChannels; ++c) {
          double db = kBackscatter[cls][c] + 3.0 * (fine.at(i, j) - 0.5);
          if (cls == 1) db += 1.5 * season;
          const double linear = std::pow(10.0, db / 10.0) * speckle(rng);
          db = 10.0 * std::log10(std::max(linear, 1e-6));
          db = std::clamp(db, c == 0 ? -25.0 : -32.5, 0.0);
          sar.at(c, i, j) = quantize(db, NpyDtype::F32);
        }
      }
    }

    TimeStep step;
    step.t_index = t;
    step.optical.data = std::move(optical);
    step.optical.range = OpticalRange::RawDn;
    step.optical.timestamp = add_days(start, t * config.revisit_days);
    step.optical.patch_id = pid;
    const int dt = dt_pick(rng) * (sign_pick(rng) ? 1 : -1);
    step.sar.data = std::move(sar);
    step.sar.range = SarRange::RawDb;
    step.sar.timestamp = add_days(step.optical.timestamp, dt);
    step.sar.patch_id = pid;
    step.mask = make_mask(std::move(mask));
    series.steps.push_back(std::move(step));
  }
  return series;
}

DatasetManifest synth_generate(const SynthConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  const auto problems = check_config(config);
  if (!problems.empty()) {
    std::string msg = "invalid synthetic config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DatasetError(msg);
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw DatasetError("cannot create output directory '" + out_dir.string() + "'");

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.dataset_id = "synth-" + std::to_string(seed);
  for (int r = 0; r < config.n_rois; ++r) {
    RoiRecord roi;
    roi.roi_id = synth_roi_id(r);
    roi.split = r >= config.n_rois - config.n_test_rois ? Split::Test : Split::Train;
    roi.T = config.T;
    for (int p = 0; p < config.patches_per_roi; ++p) {
      const PatchSeries series = generate_patch_series(config, seed, r, p);
      PatchRecord rec;
      rec.patch_id = synth_patch_id(r, p);
      const fs::path rel_dir = fs::path(roi.roi_id) / rec.patch_id;
      fs::create_directories(out_dir / rel_dir, ec);
      if (ec) throw DatasetError("cannot create '" + (out_dir / rel_dir).string() + "'");
      for (const auto& step : series.steps) {
        char stem[16];
        std::snprintf(stem, sizeof stem, "t%02d", step.t_index);
        StepRecord s;
        s.t = step.t_index;
        s.s1_date = step.sar.timestamp;
        s.s2_date = step.optical.timestamp;
        s.s1_file = (rel_dir / (std::string(stem) + "_s1.npy")).generic_string();
        s.s2_file = (rel_dir / (std::string(stem) + "_s2.npy")).generic_string();
        s.mask_file = (rel_dir / (std::string(stem) + "_mask.npy")).generic_string();
        try {
          write_npy(out_dir / s.s1_file, step.sar.data, NpyDtype::F32);
          write_npy(out_dir / s.s2_file, step.optical.data, NpyDtype::U16);
          write_npy(out_dir / s.mask_file, step.mask.data, NpyDtype::F32);
        } catch (const RasterIoError& e) {
          throw DatasetError(e.what());
        }
        rec.steps.push_back(std::move(s));
      }
      roi.patches.push_back(std::move(rec));
    }
    manifest.rois.push_back(std::move(roi));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace seqcr
