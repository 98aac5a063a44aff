#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqcr/baselines.hpp"
#include "seqcr/dataset_io.hpp"
#include "seqcr/metrics.hpp"
#include "seqcr/seq2point.hpp"
#include "seqcr/seq2seq.hpp"

namespace seqcr {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportRow {
  std::string label;
  std::optional<EvalRecord> record;  // absent: nothing could be scored
  std::size_t samples = 0;
};

struct ReportTable {
  std::string name;
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> metadata;

  /// Throws on a duplicate label.
  void add_row(ReportRow row);
};

/// Maps n RAW input steps to a UNIT-range cloud-free estimate.
class Seq2PointPredictor {
 public:
  virtual ~Seq2PointPredictor() = default;
  virtual std::string name() const = 0;
  virtual OpticalImage predict(std::span<const TimeStep> inputs) const = 0;
};

class LeastCloudyPredictor final : public Seq2PointPredictor {
 public:
  std::string name() const override { return "least cloudy"; }
  OpticalImage predict(std::span<const TimeStep> inputs) const override;
};

class MosaicPredictor final : public Seq2PointPredictor {
 public:
  std::string name() const override { return "mosaicing"; }
  OpticalImage predict(std::span<const TimeStep> inputs) const override;
};

class ModelPredictor final : public Seq2PointPredictor {
 public:
  explicit ModelPredictor(const Seq2PointModel& model, std::string label = "");
  std::string name() const override { return label_; }
  OpticalImage predict(std::span<const TimeStep> inputs) const override;

 private:
  const Seq2PointModel& model_;
  std::string label_;
};

/// Standalone branch on the least-cloudy input.
class BranchPredictor final : public Seq2PointPredictor {
 public:
  explicit BranchPredictor(const Seq2PointModel& model) : model_(model) {}
  std::string name() const override { return "ResNet"; }
  OpticalImage predict(std::span<const TimeStep> inputs) const override;

 private:
  const Seq2PointModel& model_;
};

std::unique_ptr<Seq2PointPredictor> make_baseline(const std::string& method);

/// Pixels cloudy in every input (1) versus visible in at least one (0).
CloudMask joint_cloud_mask(std::span<const TimeStep> inputs);

/// Unweighted mean; optional fields average over the records that have them.
EvalRecord average_records(std::span<const EvalRecord> records);

struct EvalOptions {
  ChannelScope scope = ChannelScope::Rgb3;
  int workers = 1;
};

/// One tuple per series without a coverage filter; the target is the series'
/// minimum-coverage step.
ReportTable eval_seq2point(const Seq2PointPredictor& predictor, std::span<const PatchSeries> test_series, int n,
                           Rng& rng, EvalOptions options = {});
ReportTable eval_seq2point(const Seq2PointPredictor& predictor, const DatasetManifest& manifest, int n, Rng& rng,
                           EvalOptions options = {});

/// Rows "lo-hi %" per coverage bin; every input of a tuple lies in the bin.
/// Metadata carries the Spearman correlation of bin midpoint and NRMSE(all).
ReportTable eval_by_coverage(const Seq2PointPredictor& predictor, std::span<const PatchSeries> series, int n,
                             Rng& rng, int bins = 10, EvalOptions options = {});

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct BlendResult {
  OpticalImage blended;  // composite placed at the target step
  OpticalImage target;   // original least-cloudy observation
  OpticalImage source;   // most cloudy observation
  CloudMask blend_mask;  // source cloud mask
  int target_index = 0;
  int source_index = 0;
  bool degenerate = false;  // all coverages equal
  PatchSeries series;       // input series with the target step replaced
};

/// Composites the cloudiest frame's cloud pixels onto the clearest frame.
/// feather > 0 softens the mask with a box filter of that radius.
BlendResult blend_protocol(const PatchSeries& series, int feather = 0);

/// Scores the prediction at the blended step against the original target.
ReportTable eval_seq2seq(const Seq2SeqFit& fit, const BlendResult& blend, const std::string& label,
                         ChannelScope scope = ChannelScope::Rgb3);
ReportTable eval_seq2seq(std::span<const OpticalImage> predictions, const BlendResult& blend,
                         const std::string& label, ChannelScope scope = ChannelScope::Rgb3);

// --- rendering -------------------------------------------------------------

std::string format_cell(const std::optional<double>& v, int precision = 3);
std::string table_csv(const ReportTable& table);
std::string table_markdown(const ReportTable& table);
ReportTable parse_table_csv(const std::string& name, const std::string& text);

struct Histogram {
  std::string name;
  std::vector<std::string> bin_labels;
  std::vector<int> counts;
};

Histogram to_histogram(const std::string& name, const CoverageHistogram& h);
Histogram to_histogram(const std::string& name, const PairingStats& s);

/// Bar chart as an 8-bit grayscale PNG.
void write_histogram_png(const std::filesystem::path& path, const Histogram& h, int width = 320, int height = 200);

/// Writes <out>/report/tables/<run>_<name>.{csv,md}, a <run>_summary pair
/// covering every table, and <out>/report/plots/<run>_<hist>.png with a CSV
/// of the counts. Returns the written paths.
std::vector<std::filesystem::path> report(const std::filesystem::path& out_dir, const std::string& run_id,
                                          std::span<const ReportTable> tables, std::span<const Histogram> histograms);

}  // namespace seqcr
