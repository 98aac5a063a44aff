#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqcr/cloudmask.hpp"
#include "seqcr/core_types.hpp"
#include "seqcr/npy.hpp"

namespace seqcr {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

enum class Split { Train, Test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

inline constexpr int kManifestSchema = 1;

struct StepRecord {
  int t = 0;
  Date s1_date{};
  Date s2_date{};
  std::string s1_file;    // relative to the manifest root
  std::string s2_file;
  std::string mask_file;  // empty: masks are computed by a detector at load time
};

struct PatchRecord {
  std::string patch_id;
  std::vector<StepRecord> steps;
};

struct RoiRecord {
  std::string roi_id;
  Split split = Split::Train;
  int T = 0;
  std::vector<PatchRecord> patches;
};

struct DatasetManifest {
  int schema = kManifestSchema;
  std::string dataset_id;
  std::filesystem::path root;
  std::vector<RoiRecord> rois;

  const RoiRecord& roi(const std::string& roi_id) const;
  const PatchRecord& patch(const std::string& roi_id, const std::string& patch_id) const;
  /// (roi_id, patch_id) of every patch in a split, in manifest order.
  std::vector<std::pair<std::string, std::string>> patches_in(Split split) const;
};

/// Structural problems: schema, split overlap, duplicate ids, missing files.
std::vector<std::string> check_manifest(const DatasetManifest& manifest);

/// Parses `<root>/manifest.json` (or a direct path to the JSON file) and
/// refuses manifests that fail check_manifest.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Raster access seam for load_series.
class RasterReader {
 public:
  virtual ~RasterReader() = default;
  virtual NpyArray read(const std::filesystem::path& path) const = 0;
};

class FileRasterReader final : public RasterReader {
 public:
  NpyArray read(const std::filesystem::path& path) const override { return read_npy(path); }
};

/// Forwards to another reader and logs every requested path.
class RecordingRasterReader final : public RasterReader {
 public:
  explicit RecordingRasterReader(const RasterReader& inner) : inner_(inner) {}
  NpyArray read(const std::filesystem::path& path) const override;
  std::vector<std::filesystem::path> paths() const;

 private:
  const RasterReader& inner_;
  mutable std::mutex mu_;
  mutable std::vector<std::filesystem::path> log_;
};

/// Loads and validates one patch series. Steps without a mask file get a
/// mask from `detector` (the default threshold detector when null).
PatchSeries load_series(const DatasetManifest& manifest, const std::string& roi_id, const std::string& patch_id,
                        const RasterReader& reader = FileRasterReader{}, const CloudDetector* detector = nullptr);

// --- synthetic data --------------------------------------------------------

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

struct SynthConfig {
  int n_rois = 8;
  int n_test_rois = 2;
  int patches_per_roi = 4;
  int T = 8;
  int size = 32;  // H = W
  double clear_weight = 0.5;
  double overcast_weight = 0.5;
  BetaParams clear_beta{0.3, 12.0};
  BetaParams overcast_beta{12.0, 0.3};
  int max_dt_days = 5;  // pairing offset ~ U{0..max_dt_days}, random sign
  int revisit_days = 12;
  std::uint64_t terrain_seed = 0;
  std::string start_date = "2018-01-01";
};

/// Empty iff the configuration is usable.
std::vector<std::string> check_config(const SynthConfig& config);

/// In-memory series exactly as synth_generate writes it (values already
/// quantized to the on-disk dtypes). Masks are the ground-truth masks.
PatchSeries generate_patch_series(const SynthConfig& config, std::uint64_t seed, int roi_index, int patch_index);

std::string synth_roi_id(int roi_index);
std::string synth_patch_id(int roi_index, int patch_index);

/// Writes a full synthetic dataset and its manifest under `out_dir`.
/// Deterministic for fixed (config, seed).
DatasetManifest synth_generate(const SynthConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir);

/// Draw from the configured bimodal coverage mixture.
double sample_coverage(const SynthConfig& config, Rng& rng);

// --- samplers --------------------------------------------------------------

struct TrainingTuple {
  std::vector<int> input_indices;  // temporal order
  int target_index = 0;
  std::vector<TimeStep> inputs;
  OpticalImage target;
  CloudMask target_mask;
};

/// Step with the minimum cloud coverage; ties break to the earliest step.
int min_coverage_index(const PatchSeries& series);

/// n distinct non-target inputs with coverage <= max_cov, uniform without replacement.
TrainingTuple sample_training_tuple(const PatchSeries& series, int n, double max_cov, Rng& rng);

/// n distinct non-target inputs with coverage in [lo, hi); hi >= 1 closes the bin.
TrainingTuple sample_binned_tuple(const PatchSeries& series, int n, double lo, double hi, Rng& rng);

struct PairingStats {
  std::size_t pairs = 0;
  double mean_days = 0.0;
  double std_days = 0.0;          // population
  std::vector<int> histogram;     // index = |dt| in whole days
};

PairingStats pairing_stats(const DatasetManifest& manifest);

}  // namespace seqcr
