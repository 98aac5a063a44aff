#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <memory>

#include "seqcr/baselines.hpp"
#include "seqcr/cloudmask.hpp"
#include "seqcr/dataset_io.hpp"
#include "seqcr/metrics.hpp"
#include "seqcr/preprocess.hpp"
#include "seqcr/protocol.hpp"
#include "seqcr/seq2point.hpp"
#include "seqcr/seq2seq.hpp"

namespace py = pybind11;
using namespace seqcr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a, std::size_t ndim, const char* what) {
  if (static_cast<std::size_t>(a.ndim()) != ndim) {
    throw py::value_error(std::string(what) + " must have " + std::to_string(ndim) + " dimensions");
  }
  std::vector<int> shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
  return out;
}

OpticalImage optical(const Array& a, OpticalRange range = OpticalRange::Unit) {
  OpticalImage img;
  img.data = to_tensor(a, 3, "optical image");
  img.range = range;
  return img;
}

SarImage sar(const Array& a, SarRange range = SarRange::RawDb) {
  SarImage img;
  img.data = to_tensor(a, 3, "SAR image");
  img.range = range;
  return img;
}

CloudMask mask(const Array& a) { return make_mask(to_tensor(a, 2, "mask")); }

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "all") return MaskMode::All;
  if (s == "cloudy") return MaskMode::Cloudy;
  if (s == "clear") return MaskMode::Clear;
  throw py::value_error("mode must be all, cloudy or clear");
}

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict record_dict(const EvalRecord& r) {
  py::dict d;
  d["nrmse_all"] = r.nrmse_all;
  d["nrmse_cloudy"] = opt(r.nrmse_cloudy);
  d["nrmse_clear"] = opt(r.nrmse_clear);
  d["psnr"] = r.psnr;
  d["ssim"] = r.ssim;
  d["sam"] = opt(r.sam);
  return d;
}

std::vector<MaskedImage> stack(const std::vector<Array>& images, const std::vector<Array>& masks) {
  if (images.size() != masks.size()) throw py::value_error("need one mask per image");
  std::vector<MaskedImage> out;
  for (std::size_t k = 0; k < images.size(); ++k) out.push_back({optical(images[k]), mask(masks[k])});
  return out;
}

Tensor stack_series(const PatchSeries& s, int which) {
  const int T = static_cast<int>(s.size());
  std::vector<Tensor> parts;
  for (const auto& st : s.steps) parts.push_back(which == 0 ? st.optical.data : which == 1 ? st.sar.data : st.mask.data);
  std::vector<int> shape{T};
  shape.insert(shape.end(), parts[0].shape().begin(), parts[0].shape().end());
  Tensor out(shape);
  for (int t = 0; t < T; ++t) std::copy(parts[t].data(), parts[t].data() + parts[t].numel(), out.data() + t * parts[t].numel());
  return out;
}

py::dict series_dict(const PatchSeries& s) {
  py::dict d;
  d["roi_id"] = s.roi_id;
  d["patch_id"] = s.steps.empty() ? "" : s.steps[0].optical.patch_id;
  d["optical"] = to_array(stack_series(s, 0));
  d["sar"] = to_array(stack_series(s, 1));
  d["masks"] = to_array(stack_series(s, 2));
  std::vector<double> cov;
  for (const auto& st : s.steps) cov.push_back(st.mask.coverage);
  d["coverage"] = cov;
  d["optical_range"] = s.steps.empty() ? "" : to_string(s.steps[0].optical.range);
  return d;
}

Tensor slice(const Array& a, py::ssize_t k) {
  std::vector<int> shape(a.shape() + 1, a.shape() + a.ndim());
  const std::size_t n = shape_numel(shape);
  return Tensor(shape, std::vector<double>(a.data() + k * n, a.data() + (k + 1) * n));
}

// Python-facing model handle; the C++ model holds shared parameter nodes.
struct Seq2Point {
  std::shared_ptr<Seq2PointModel> model;

  py::array forward(const Array& optical_raw, const Array& sar_raw) const {
    if (optical_raw.ndim() != 4 || sar_raw.ndim() != 4 || optical_raw.shape(0) != sar_raw.shape(0)) {
      throw py::value_error("expected (n, 13, H, W) optical and (n, 2, H, W) SAR stacks");
    }
    std::vector<TimeStep> steps;
    for (py::ssize_t k = 0; k < optical_raw.shape(0); ++k) {
      TimeStep st;
      st.optical.data = slice(optical_raw, k);
      st.sar.data = slice(sar_raw, k);
      st.mask = make_mask(Tensor({st.optical.height(), st.optical.width()}));
      st.t_index = static_cast<int>(k);
      steps.push_back(prepare_resnet_step(st));
    }
    return to_array(to_eval_range(::seqcr::forward(*model, steps)).data);
  }
};

}  // namespace

PYBIND11_MODULE(_seqcr, m) {
  m.doc() = "Multi-temporal cloud removal: metrics, baselines, data and models";

  py::register_exception<MetricError>(m, "MetricError", PyExc_ValueError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);
  py::register_exception<PreprocessError>(m, "PreprocessError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<BaselineError>(m, "BaselineError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);

  m.def(
      "nrmse",
      [](const Array& x, const Array& y, const std::string& scope, const std::optional<Array>& m,
         const std::string& mode) {
        const CloudMask cm = m ? mask(*m) : CloudMask{};
        return opt(nrmse(optical(x), optical(y), parse_channel_scope(scope), parse_mask_mode(mode), m ? &cm : nullptr));
      },
      py::arg("x"), py::arg("y"), py::arg("scope") = "rgb3", py::arg("mask") = py::none(), py::arg("mode") = "all");
  m.def("psnr", [](const Array& x, const Array& y, const std::string& scope) {
    return psnr(optical(x), optical(y), parse_channel_scope(scope));
  }, py::arg("x"), py::arg("y"), py::arg("scope") = "rgb3");
  m.def("ssim", [](const Array& x, const Array& y, const std::string& scope) {
    return ssim(optical(x), optical(y), parse_channel_scope(scope));
  }, py::arg("x"), py::arg("y"), py::arg("scope") = "rgb3");
  m.def("sam", [](const Array& x, const Array& y, const std::string& scope, bool degrees) {
    return opt(sam(optical(x), optical(y), parse_channel_scope(scope), degrees));
  }, py::arg("x"), py::arg("y"), py::arg("scope") = "rgb3", py::arg("degrees") = false);
  m.def("evaluate", [](const Array& pred, const Array& target, const Array& m, const std::string& scope) {
    return record_dict(evaluate(optical(pred), optical(target), mask(m), parse_channel_scope(scope)));
  }, py::arg("pred"), py::arg("target"), py::arg("mask"), py::arg("scope") = "rgb3");

  m.def("mosaic", [](const std::vector<Array>& images, const std::vector<Array>& masks) {
    return to_array(mosaic(stack(images, masks)).data);
  }, py::arg("images"), py::arg("masks"));
  m.def("least_cloudy", [](const std::vector<Array>& images, const std::vector<Array>& masks) {
    return to_array(least_cloudy(stack(images, masks)).data);
  }, py::arg("images"), py::arg("masks"));

  m.def("clip_rescale_optical", [](const Array& raw, const std::string& target) {
    if (target != "resnet" && target != "unit") throw py::value_error("target must be resnet or unit");
    return to_array(clip_rescale(optical(raw, OpticalRange::RawDn),
                                 target == "resnet" ? optical_resnet_spec() : optical_unit_spec()).data);
  }, py::arg("raw"), py::arg("target") = "unit");
  m.def("clip_rescale_sar", [](const Array& raw_db, const std::string& target) {
    if (target != "resnet" && target != "unit") throw py::value_error("target must be resnet or unit");
    return to_array(clip_rescale(sar(raw_db), target == "resnet" ? sar_resnet_spec() : sar_unit_spec()).data);
  }, py::arg("raw_db"), py::arg("target") = "unit");
  m.def("detect_clouds", [](const Array& unit_image, const std::string& detector) {
    return to_array(detect_clouds(optical(unit_image), *make_detector(detector)).data);
  }, py::arg("unit_image"), py::arg("detector") = "threshold");
  m.def("detector_names", &detector_names);

  m.def(
      "synth_generate",
      [](const std::string& out_dir, std::uint64_t seed, int n_rois, int n_test_rois, int patches_per_roi, int T,
         int size) {
        SynthConfig c;
        c.n_rois = n_rois;
        c.n_test_rois = n_test_rois;
        c.patches_per_roi = patches_per_roi;
        c.T = T;
        c.size = size;
        if (const auto errs = check_config(c); !errs.empty()) throw py::value_error(errs.front());
        return synth_generate(c, seed, out_dir).dataset_id;
      },
      py::arg("out_dir"), py::arg("seed"), py::arg("n_rois") = 8, py::arg("n_test_rois") = 2,
      py::arg("patches_per_roi") = 4, py::arg("T") = 8, py::arg("size") = 32);
  m.def("list_patches", [](const std::string& data, const std::string& split) {
    return load_manifest(data).patches_in(parse_split(split));
  }, py::arg("data"), py::arg("split") = "test");
  m.def("load_series", [](const std::string& data, const std::string& roi, const std::string& patch) {
    return series_dict(load_series(load_manifest(data), roi, patch));
  }, py::arg("data"), py::arg("roi"), py::arg("patch"));
  m.def("pairing_stats", [](const std::string& data) {
    const PairingStats s = pairing_stats(load_manifest(data));
    py::dict d;
    d["pairs"] = s.pairs;
    d["mean_days"] = s.mean_days;
    d["std_days"] = s.std_days;
    d["histogram"] = s.histogram;
    return d;
  }, py::arg("data"));

  py::class_<Seq2Point>(m, "Seq2Point")
      .def_static(
          "build",
          [](int n, bool use_sar, int branch_depth, int feature_width, int n_3d_blocks, std::uint64_t seed) {
            Seq2PointConfig c;
            c.n = n;
            c.use_sar = use_sar;
            c.branch_depth = branch_depth;
            c.feature_width = feature_width;
            c.n_3d_blocks = n_3d_blocks;
            c.init_seed = seed;
            if (const auto errs = check_config(c); !errs.empty()) throw py::value_error(errs.front());
            return Seq2Point{std::make_shared<Seq2PointModel>(build_seq2point(c))};
          },
          py::arg("n") = 3, py::arg("use_sar") = true, py::arg("branch_depth") = 16, py::arg("feature_width") = 256,
          py::arg("n_3d_blocks") = 2, py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) {
        return Seq2Point{std::make_shared<Seq2PointModel>(load_seq2point_checkpoint(path))};
      })
      .def("save", [](const Seq2Point& s, const std::string& path) { save_checkpoint(*s.model, path); })
      .def_property_readonly("n", [](const Seq2Point& s) { return s.model->config().n; })
      .def_property_readonly("use_sar", [](const Seq2Point& s) { return s.model->config().use_sar; })
      .def_property_readonly("checksum", [](const Seq2Point& s) { return nn::checksum(s.model->parameters()); })
      .def("forward", &Seq2Point::forward, py::arg("optical_raw"), py::arg("sar_raw"),
           "n RAW steps -> (13, H, W) estimate in [0, 1]")
      .def(
          "train",
          [](Seq2Point& s, const std::string& data, std::uint64_t seed, long max_steps, double lr, double max_cov,
             long freeze_steps) {
            Seq2PointConfig c = s.model->config();
            c.max_steps = max_steps;
            c.lr = lr;
            c.max_cov = max_cov;
            c.freeze_steps = freeze_steps;
            c.epochs = std::max<long>(c.epochs, max_steps);
            Seq2PointModel trained(c);
            nn::load_values(trained.parameters(), s.model->parameters());
            Rng rng(seed);
            const auto r = train_seq2point(trained, load_manifest(data), rng);
            s.model = std::make_shared<Seq2PointModel>(std::move(trained));
            return r.loss_trace;
          },
          py::arg("data"), py::arg("seed"), py::arg("max_steps") = 100, py::arg("lr") = 2e-4, py::arg("max_cov") = 0.5,
          py::arg("freeze_steps") = 0);

  m.def(
      "fit_seq2seq",
      [](const std::string& data, const std::string& roi, const std::string& patch, std::uint64_t seed,
         const std::string& input, int passes, int iters_per_pass, int batch_n, double lr, int depth, int width,
         bool blend) {
        const PatchSeries s = load_series(load_manifest(data), roi, patch);
        Seq2SeqConfig c;
        c.input_source = parse_input_source(input);
        c.passes = passes;
        c.iters_per_pass = iters_per_pass;
        c.batch_n = batch_n;
        c.lr = lr;
        c.depth = depth;
        c.width = width;
        if (const auto errs = check_config(c); !errs.empty()) throw py::value_error(errs.front());
        ConvPyramidExtractor fx;
        Rng rng(seed);
        py::dict out;
        Seq2SeqFit fit;
        if (blend) {
          const BlendResult b = blend_protocol(s);
          fit = fit_seq2seq(b.series, c, fx, rng);
          out["score"] = record_dict(*eval_seq2seq(fit, b, config_name(c)).rows.at(0).record);
          out["target_index"] = b.target_index;
          out["source_index"] = b.source_index;
        } else {
          fit = fit_seq2seq(s, c, fx, rng);
        }
        PatchSeries preds;
        for (const auto& p : fit.predictions) preds.steps.push_back({SarImage{}, p, CloudMask{}, 0});
        out["predictions"] = to_array(stack_series(preds, 0));
        out["loss_trace"] = fit.loss_trace;
        return out;
      },
      py::arg("data"), py::arg("roi"), py::arg("patch"), py::arg("seed"), py::arg("input") = "sar",
      py::arg("passes") = 20, py::arg("iters_per_pass") = 100, py::arg("batch_n") = 5, py::arg("lr") = 0.01,
      py::arg("depth") = 4, py::arg("width") = 32, py::arg("blend") = true);
}
