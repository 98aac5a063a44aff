#include "seqcr/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace seqcr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw DatasetError("unknown split '" + s + "'");
}

const RoiRecord& DatasetManifest::roi(const std::string& roi_id) const {
  for (const auto& r : rois)
    if (r.roi_id == roi_id) return r;
  throw DatasetError("roi '" + roi_id + "' not in manifest");
}

const PatchRecord& DatasetManifest::patch(const std::string& roi_id, const std::string& patch_id) const {
  for (const auto& p : roi(roi_id).patches)
    if (p.patch_id == patch_id) return p;
  throw DatasetError("patch '" + patch_id + "' not in roi '" + roi_id + "'");
}

std::vector<std::pair<std::string, std::string>> DatasetManifest::patches_in(Split split) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& r : rois)
    if (r.split == split)
      for (const auto& p : r.patches) out.emplace_back(r.roi_id, p.patch_id);
  return out;
}

std::vector<std::string> check_manifest(const DatasetManifest& manifest) {
  std::vector<std::string> out;
  if (manifest.schema != kManifestSchema) {
    out.push_back("unsupported manifest schema " + std::to_string(manifest.schema));
  }
  std::map<std::string, std::set<Split>> splits;
  std::set<std::string> patch_ids;
  std::map<std::string, int> roi_count;
  for (const auto& r : manifest.rois) {
    if (++roi_count[r.roi_id] == 2) out.push_back("duplicate roi id '" + r.roi_id + "'");
    splits[r.roi_id].insert(r.split);
    for (const auto& p : r.patches) {
      if (!patch_ids.insert(r.roi_id + "/" + p.patch_id).second) {
        out.push_back("duplicate patch '" + p.patch_id + "' in roi '" + r.roi_id + "'");
      }
      if (static_cast<int>(p.steps.size()) != r.T) {
        out.push_back("patch '" + p.patch_id + "' has " + std::to_string(p.steps.size()) + " steps, roi declares T=" +
                      std::to_string(r.T));
      }
      for (const auto& s : p.steps) {
        for (const auto* f : {&s.s1_file, &s.s2_file, &s.mask_file}) {
          if (f->empty()) continue;
          if (!fs::exists(manifest.root / *f)) out.push_back("missing file '" + (manifest.root / *f).string() + "'");
        }
      }
    }
  }
  for (const auto& [id, s] : splits) {
    if (s.size() > 1) out.push_back("roi '" + id + "' appears in both train and test splits");
  }
  return out;
}

namespace {

json to_json(const DatasetManifest& m) {
  json rois = json::array();
  for (const auto& r : m.rois) {
    json patches = json::array();
    for (const auto& p : r.patches) {
      json steps = json::array();
      for (const auto& s : p.steps) {
        steps.push_back({{"t", s.t},
                         {"s1_date", format_date(s.s1_date)},
                         {"s2_date", format_date(s.s2_date)},
                         {"s1", s.s1_file},
                         {"s2", s.s2_file},
                         {"mask", s.mask_file.empty() ? json(nullptr) : json(s.mask_file)}});
      }
      patches.push_back({{"patch_id", p.patch_id}, {"steps", steps}});
    }
    rois.push_back({{"roi_id", r.roi_id}, {"split", to_string(r.split)}, {"T", r.T}, {"patches", patches}});
  }
  return {{"schema", m.schema}, {"dataset_id", m.dataset_id}, {"rois", rois}};
}

DatasetManifest from_json(const json& j, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  m.schema = j.at("schema").get<int>();
  m.dataset_id = j.value("dataset_id", "");
  for (const auto& jr : j.at("rois")) {
    RoiRecord r;
    r.roi_id = jr.at("roi_id").get<std::string>();
    r.split = parse_split(jr.at("split").get<std::string>());
    r.T = jr.at("T").get<int>();
    for (const auto& jp : jr.at("patches")) {
      PatchRecord p;
      p.patch_id = jp.at("patch_id").get<std::string>();
      for (const auto& js : jp.at("steps")) {
        StepRecord s;
        s.t = js.at("t").get<int>();
        s.s1_date = parse_date(js.at("s1_date").get<std::string>());
        s.s2_date = parse_date(js.at("s2_date").get<std::string>());
        s.s1_file = js.at("s1").get<std::string>();
        s.s2_file = js.at("s2").get<std::string>();
        if (js.contains("mask") && !js.at("mask").is_null()) s.mask_file = js.at("mask").get<std::string>();
        p.steps.push_back(std::move(s));
      }
      r.patches.push_back(std::move(p));
    }
    m.rois.push_back(std::move(r));
  }
  return m;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw DatasetError("cannot open manifest '" + file.string() + "'");
  DatasetManifest m;
  try {
    m = from_json(json::parse(in), file.parent_path());
  } catch (const DatasetError&) {
    throw;
  } catch (const std::exception& e) {
    throw DatasetError("corrupt manifest '" + file.string() + "': " + e.what());
  }
  const auto problems = check_manifest(m);
  if (!problems.empty()) {
    std::string msg = "manifest '" + file.string() + "' refused:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DatasetError(msg);
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DatasetError("cannot write manifest '" + path.string() + "'");
  out << to_json(manifest).dump(2) << "\n";
  if (!out) throw DatasetError("failed writing manifest '" + path.string() + "'");
}

NpyArray RecordingRasterReader::read(const fs::path& path) const {
  {
    std::lock_guard lock(mu_);
    log_.push_back(path);
  }
  return inner_.read(path);
}

std::vector<fs::path> RecordingRasterReader::paths() const {
  std::lock_guard lock(mu_);
  return log_;
}

PatchSeries load_series(const DatasetManifest& manifest, const std::string& roi_id, const std::string& patch_id,
                        const RasterReader& reader, const CloudDetector* detector) {
  const PatchRecord& rec = manifest.patch(roi_id, patch_id);
  const ThresholdDetector fallback;
  const CloudDetector& det = detector ? *detector : static_cast<const CloudDetector&>(fallback);

  auto read = [&](const std::string& rel, std::size_t ndim) {
    const fs::path p = manifest.root / rel;
    NpyArray a;
    try {
      a = reader.read(p);
    } catch (const std::exception& e) {
      throw DatasetError("failed to load raster '" + p.string() + "': " + e.what());
    }
    if (a.tensor.ndim() != ndim) throw DatasetError("raster '" + p.string() + "' has unexpected rank");
    return a.tensor;
  };

  PatchSeries series;
  series.roi_id = roi_id;
  for (const auto& s : rec.steps) {
    TimeStep step;
    step.t_index = s.t;
    step.optical.data = read(s.s2_file, 3);
    step.optical.range = OpticalRange::RawDn;
    step.optical.timestamp = s.s2_date;
    step.optical.patch_id = patch_id;
    step.sar.data = read(s.s1_file, 3);
    step.sar.range = SarRange::RawDb;
    step.sar.timestamp = s.s1_date;
    step.sar.patch_id = patch_id;
    if (s.mask_file.empty()) {
      step.mask = detect_clouds(step.optical, det);
    } else {
      step.mask = make_mask(read(s.mask_file, 2));
    }
    series.steps.push_back(std::move(step));
  }
  const auto violations = validate(series);
  if (!violations.empty()) {
    std::string msg = "series " + roi_id + "/" + patch_id + " violates invariants:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw DatasetError(msg);
  }
  return series;
}

// --- samplers --------------------------------------------------------------

int min_coverage_index(const PatchSeries& series) {
  if (series.steps.empty()) throw DatasetError("empty series has no target");
  int best = 0;
  for (int i = 1; i < static_cast<int>(series.steps.size()); ++i)
    if (series.steps[i].mask.coverage < series.steps[best].mask.coverage) best = i;
  return best;
}

namespace {

template <typename Pred>
TrainingTuple draw_tuple(const PatchSeries& series, int n, Pred eligible, const std::string& what, Rng& rng) {
  if (n < 1) throw DatasetError("tuple size must be at least 1");
  const int target = min_coverage_index(series);
  std::vector<int> pool;
  for (int i = 0; i < static_cast<int>(series.steps.size()); ++i)
    if (i != target && eligible(series.steps[i].mask.coverage)) pool.push_back(i);
  if (static_cast<int>(pool.size()) < n) {
    throw DatasetError("insufficient eligible steps " + what + ": need " + std::to_string(n) + ", have " +
                       std::to_string(pool.size()));
  }
  // Partial Fisher-Yates.
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());

  TrainingTuple tuple;
  tuple.input_indices = pool;
  tuple.target_index = target;
  for (int i : pool) tuple.inputs.push_back(series.steps[i]);
  tuple.target = series.steps[target].optical;
  tuple.target_mask = series.steps[target].mask;
  return tuple;
}

}  // namespace

TrainingTuple sample_training_tuple(const PatchSeries& series, int n, double max_cov, Rng& rng) {
  return draw_tuple(
      series, n, [max_cov](double c) { return c <= max_cov; }, "with coverage <= " + std::to_string(max_cov), rng);
}

TrainingTuple sample_binned_tuple(const PatchSeries& series, int n, double lo, double hi, Rng& rng) {
  const bool closed = hi >= 1.0;
  return draw_tuple(
      series, n, [=](double c) { return c >= lo && (closed ? c <= hi : c < hi); },
      "in coverage bin [" + std::to_string(lo) + ", " + std::to_string(hi) + (closed ? "]" : ")"), rng);
}

PairingStats pairing_stats(const DatasetManifest& manifest) {
  std::vector<int> dts;
  for (const auto& r : manifest.rois)
    for (const auto& p : r.patches)
      for (const auto& s : p.steps) dts.push_back(std::abs(days_between(s.s1_date, s.s2_date)));
  PairingStats st;
  st.pairs = dts.size();
  if (dts.empty()) return st;
  double sum = 0.0;
  int max_dt = 0;
  for (int d : dts) {
    sum += d;
    max_dt = std::max(max_dt, d);
  }
  st.mean_days = sum / static_cast<double>(dts.size());
  double ss = 0.0;
  for (int d : dts) ss += (d - st.mean_days) * (d - st.mean_days);
  st.std_days = std::sqrt(ss / static_cast<double>(dts.size()));
  st.histogram.assign(max_dt + 1, 0);
  for (int d : dts) ++st.histogram[d];
  return st;
}

}  // namespace seqcr
