#include "seqcr/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "seqcr/preprocess.hpp"

namespace seqcr {

void ReportTable::add_row(ReportRow row) {
  for (const auto& r : rows)
    if (r.label == row.label) throw ProtocolError("duplicate row label '" + row.label + "' in table '" + name + "'");
  rows.push_back(std::move(row));
}

namespace {

std::vector<MaskedImage> unit_inputs(std::span<const TimeStep> inputs) {
  std::vector<MaskedImage> out;
  for (const auto& s : inputs) out.push_back({to_eval_range(s.optical), s.mask});
  return out;
}

std::vector<TimeStep> resnet_inputs(std::span<const TimeStep> inputs) {
  std::vector<TimeStep> out;
  for (const auto& s : inputs) {
    const bool raw = s.optical.range == OpticalRange::RawDn;
    out.push_back(raw ? prepare_resnet_step(s) : s);
  }
  return out;
}

template <typename F>
void parallel_for(std::size_t n, int workers, F&& body) {
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (int k = 0; k < w; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct ScoredTuple {
  std::vector<TimeStep> inputs;
  OpticalImage target;
};

std::vector<EvalRecord> score(const Seq2PointPredictor& predictor, const std::vector<ScoredTuple>& tuples,
                              const EvalOptions& options) {
  std::vector<EvalRecord> records(tuples.size());
  parallel_for(tuples.size(), options.workers, [&](std::size_t i) {
    const auto& t = tuples[i];
    const OpticalImage pred = predictor.predict(t.inputs);
    records[i] = evaluate(pred, to_eval_range(t.target), joint_cloud_mask(t.inputs), options.scope);
  });
  return records;
}

}  // namespace

OpticalImage LeastCloudyPredictor::predict(std::span<const TimeStep> inputs) const {
  const auto u = unit_inputs(inputs);
  return least_cloudy(u);
}

OpticalImage MosaicPredictor::predict(std::span<const TimeStep> inputs) const {
  const auto u = unit_inputs(inputs);
  return mosaic(u);
}

ModelPredictor::ModelPredictor(const Seq2PointModel& model, std::string label)
    : model_(model), label_(label.empty() ? "ours (n=" + std::to_string(model.config().n) + ")" : std::move(label)) {}

OpticalImage ModelPredictor::predict(std::span<const TimeStep> inputs) const {
  return to_eval_range(forward(model_, resnet_inputs(inputs)));
}

OpticalImage BranchPredictor::predict(std::span<const TimeStep> inputs) const {
  if (inputs.empty()) throw ProtocolError("no inputs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < inputs.size(); ++i)
    if (inputs[i].mask.coverage < inputs[best].mask.coverage) best = i;
  const auto prepared = resnet_inputs(inputs.subspan(best, 1));
  return to_eval_range(forward_branch(model_, prepared[0]));
}

std::unique_ptr<Seq2PointPredictor> make_baseline(const std::string& method) {
  if (method == "least-cloudy") return std::make_unique<LeastCloudyPredictor>();
  if (method == "mosaic") return std::make_unique<MosaicPredictor>();
  throw ProtocolError("unknown baseline '" + method + "' (expected least-cloudy or mosaic)");
}

CloudMask joint_cloud_mask(std::span<const TimeStep> inputs) {
  if (inputs.empty()) throw ProtocolError("joint mask needs inputs");
  Tensor m = inputs[0].mask.data;
  for (const auto& s : inputs.subspan(1)) {
    if (!s.mask.data.same_shape(m)) throw ProtocolError("input masks differ in shape");
    for (std::size_t i = 0; i < m.numel(); ++i) m[i] = (m[i] == 1.0 && s.mask.data[i] == 1.0) ? 1.0 : 0.0;
  }
  return make_mask(std::move(m));
}

EvalRecord average_records(std::span<const EvalRecord> records) {
  if (records.empty()) throw ProtocolError("nothing to average");
  EvalRecord out;
  out.channel_scope = records[0].channel_scope;
  double cloudy = 0, clear = 0, sam_sum = 0;
  int n_cloudy = 0, n_clear = 0, n_sam = 0;
  for (const auto& r : records) {
    out.nrmse_all += r.nrmse_all;
    out.psnr += r.psnr;
    out.ssim += r.ssim;
    if (r.nrmse_cloudy) cloudy += *r.nrmse_cloudy, ++n_cloudy;
    if (r.nrmse_clear) clear += *r.nrmse_clear, ++n_clear;
    if (r.sam) sam_sum += *r.sam, ++n_sam;
  }
  const double n = static_cast<double>(records.size());
  out.nrmse_all /= n;
  out.psnr /= n;
  out.ssim /= n;
  if (n_cloudy) out.nrmse_cloudy = cloudy / n_cloudy;
  if (n_clear) out.nrmse_clear = clear / n_clear;
  if (n_sam) out.sam = sam_sum / n_sam;
  return out;
}

ReportTable eval_seq2point(const Seq2PointPredictor& predictor, std::span<const PatchSeries> test_series, int n,
                           Rng& rng, EvalOptions options) {
  if (test_series.empty()) throw ProtocolError("test split is empty");
  std::vector<ScoredTuple> tuples;
  for (const auto& s : test_series) {
    try {
      TrainingTuple t = sample_training_tuple(s, n, 1.0, rng);
      tuples.push_back({std::move(t.inputs), std::move(t.target)});
    } catch (const DatasetError&) {
      // series shorter than n + 1
    }
  }
  if (tuples.empty()) throw ProtocolError("no test series holds n + 1 steps");
  const auto records = score(predictor, tuples, options);
  ReportTable table;
  table.name = "seq2point";
  table.add_row({predictor.name(), average_records(records), records.size()});
  table.metadata["n"] = std::to_string(n);
  table.metadata["scope"] = to_string(options.scope);
  table.metadata["series"] = std::to_string(test_series.size());
  return table;
}

ReportTable eval_seq2point(const Seq2PointPredictor& predictor, const DatasetManifest& manifest, int n, Rng& rng,
                           EvalOptions options) {
  std::vector<PatchSeries> series;
  for (const auto& [roi, patch] : manifest.patches_in(Split::Test)) series.push_back(load_series(manifest, roi, patch));
  ReportTable t = eval_seq2point(predictor, std::span<const PatchSeries>(series), n, rng, options);
  t.metadata["dataset_id"] = manifest.dataset_id;
  return t;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ProtocolError("spearman needs two equal-length samples of size >= 2");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

ReportTable eval_by_coverage(const Seq2PointPredictor& predictor, std::span<const PatchSeries> series, int n,
                             Rng& rng, int bins, EvalOptions options) {
  if (bins < 1) throw ProtocolError("bins must be >= 1");
  ReportTable table;
  table.name = "by_coverage";
  table.metadata["model"] = predictor.name();
  table.metadata["n"] = std::to_string(n);
  std::vector<double> mids, scores;
  std::string empty_bins;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
    std::vector<ScoredTuple> tuples;
    for (const auto& s : series) {
      try {
        TrainingTuple t = sample_binned_tuple(s, n, lo, hi, rng);
        tuples.push_back({std::move(t.inputs), std::move(t.target)});
      } catch (const DatasetError&) {
      }
    }
    std::ostringstream label;
    label << std::lround(lo * 100) << "-" << std::lround(hi * 100) << " %";
    if (tuples.empty()) {
      table.add_row({label.str(), std::nullopt, 0});
      empty_bins += (empty_bins.empty() ? "" : ",") + label.str();
      continue;
    }
    const auto records = score(predictor, tuples, options);
    const EvalRecord avg = average_records(records);
    mids.push_back((lo + hi) / 2.0);
    scores.push_back(avg.nrmse_all);
    table.add_row({label.str(), avg, records.size()});
  }
  if (!empty_bins.empty()) table.metadata["warning_empty_bins"] = empty_bins;
  if (mids.size() >= 2) {
    std::ostringstream s;
    s.precision(6);
    s << spearman(mids, scores);
    table.metadata["spearman_midpoint_vs_nrmse_all"] = s.str();
  }
  return table;
}

BlendResult blend_protocol(const PatchSeries& series, int feather) {
  const int T = static_cast<int>(series.steps.size());
  if (T < 2) throw ProtocolError("blend protocol needs at least two steps");
  BlendResult r;
  r.target_index = min_coverage_index(series);
  int source = 0;
  for (int i = 0; i < T; ++i)
    if (series.steps[i].mask.coverage >= series.steps[source].mask.coverage) source = i;
  r.source_index = source;
  if (series.steps[r.target_index].mask.coverage == series.steps[source].mask.coverage) {
    r.degenerate = true;
    r.target_index = 0;
    r.source_index = T - 1;
  }
  const TimeStep& tgt = series.steps[r.target_index];
  const TimeStep& src = series.steps[r.source_index];
  if (tgt.optical.range != src.optical.range) throw ProtocolError("source and target range modes differ");
  r.target = tgt.optical;
  r.source = src.optical;
  r.blend_mask = src.mask;

  const int h = tgt.optical.height(), w = tgt.optical.width();
  Tensor alpha = src.mask.data;
  if (feather > 0) {
    Tensor soft({h, w});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double s = 0;
        int c = 0;
        for (int di = -feather; di <= feather; ++di)
          for (int dj = -feather; dj <= feather; ++dj) {
            const int y = i + di, x = j + dj;
            if (y < 0 || y >= h || x < 0 || x >= w) continue;
            s += src.mask.data.at(y, x);
            ++c;
          }
        soft.at(i, j) = s / c;
      }
    alpha = std::move(soft);
  }
  r.blended = tgt.optical;
  for (int b = 0; b < tgt.optical.data.dim(0); ++b)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double a = alpha.at(i, j);
        double& v = r.blended.data.at(b, i, j);
        if (a == 1.0) v = src.optical.data.at(b, i, j);
        else if (a > 0.0) v = a * src.optical.data.at(b, i, j) + (1.0 - a) * tgt.optical.data.at(b, i, j);
      }
  if (r.blended.range == OpticalRange::RawDn) {
    for (double& v : r.blended.data.values()) v = std::round(v);
  }
  r.series = series;
  r.series.steps[r.target_index].optical = r.blended;
  r.series.steps[r.target_index].mask = r.blend_mask;
  return r;
}

ReportTable eval_seq2seq(std::span<const OpticalImage> predictions, const BlendResult& blend, const std::string& label,
                         ChannelScope scope) {
  if (blend.target_index < 0 || blend.target_index >= static_cast<int>(predictions.size())) {
    throw ProtocolError("predictions do not cover the target step");
  }
  ReportTable table;
  table.name = "seq2seq";
  const OpticalImage target = to_eval_range(blend.target);
  table.add_row({label, evaluate(to_eval_range(predictions[blend.target_index]), target, blend.blend_mask, scope), 1});
  double all = 0;
  for (std::size_t t = 0; t < predictions.size() && t < blend.series.steps.size(); ++t) {
    const OpticalImage ref = static_cast<int>(t) == blend.target_index ? target : to_eval_range(blend.series.steps[t].optical);
    all += *nrmse(to_eval_range(predictions[t]), ref, scope);
  }
  std::ostringstream s;
  s.precision(6);
  s << all / static_cast<double>(predictions.size());
  table.metadata["all_step_mean_nrmse"] = s.str();
  table.metadata["target_index"] = std::to_string(blend.target_index);
  table.metadata["source_index"] = std::to_string(blend.source_index);
  if (blend.degenerate) table.metadata["warning"] = "all coverages equal; earliest/latest tie-break";
  return table;
}

ReportTable eval_seq2seq(const Seq2SeqFit& fit, const BlendResult& blend, const std::string& label, ChannelScope scope) {
  return eval_seq2seq(std::span<const OpticalImage>(fit.predictions), blend, label, scope);
}

}  // namespace seqcr
