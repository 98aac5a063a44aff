#include "seqcr/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <thread>

#include "seqcr/npy.hpp"
#include "seqcr/protocol.hpp"

namespace seqcr {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::string run_id;
  std::string detector = "threshold";
  int workers = 1;
  std::string scope = "rgb3";
};

bool inside(const fs::path& child, const fs::path& parent) {
  const auto c = fs::weakly_canonical(child), p = fs::weakly_canonical(parent);
  auto ci = c.begin();
  for (auto pi = p.begin(); pi != p.end(); ++pi, ++ci) {
    if (pi->empty()) continue;
    if (ci == c.end() || *ci != *pi) return false;
  }
  return true;
}

void prepare_out(const Common& c) {
  if (c.out.empty()) throw CliError("--out is required");
  if (!c.data.empty() && inside(c.out, c.data)) {
    throw CliError("output directory '" + c.out + "' lies inside the input dataset '" + c.data + "'");
  }
  fs::create_directories(c.out);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw CliError("cannot write " + p.string());
  f << text;
}

void snapshot(const CLI::App& sub, const Common& c) {
  write_file(fs::path(c.out) / "resolved_config.toml",
             "[" + sub.get_name() + "]\n" + sub.config_to_str(true, false));
}

std::string run_id(const CLI::App& sub, const Common& c) {
  if (!c.run_id.empty()) return c.run_id;
  if (sub.get_option_no_throw("--seed") == nullptr) return sub.get_name();
  return sub.get_name() + "-s" + std::to_string(c.seed);
}

std::vector<PatchSeries> load_split(const DatasetManifest& m, Split split, const Common& c) {
  const auto ids = m.patches_in(split);
  if (ids.empty()) throw CliError("split '" + to_string(split) + "' is empty");
  const auto detector = make_detector(c.detector);
  std::vector<PatchSeries> out(ids.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        out[i] = load_series(m, ids[i].first, ids[i].second, FileRasterReader{}, detector.get());
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min<int>(c.workers, static_cast<int>(ids.size())); ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

void add_common(CLI::App* sub, Common& c, bool data, bool seed) {
  if (data) sub->add_option("--data", c.data, "Dataset directory or manifest.json")->required();
  sub->add_option("--out", c.out, "Output directory")->required();
  if (seed) sub->add_option("--seed", c.seed, "Random seed")->required();
  sub->add_option("--run-id", c.run_id, "Prefix for report file names");
  sub->add_option("--detector", c.detector, "Cloud detector for steps without masks")
      ->check(CLI::IsMember(detector_names()));
  sub->add_option("--workers", c.workers, "Loading and evaluation threads")->check(CLI::Range(1, 256));
  sub->add_option("--scope", c.scope, "Metric channel scope")->check(CLI::IsMember({"rgb3", "all13"}));
}

ChannelScope scope_of(const Common& c) { return parse_channel_scope(c.scope); }

void print_table(const ReportTable& t) { std::cout << table_markdown(t) << std::flush; }

void add_seq2point_options(CLI::App* sub, Seq2PointConfig& m) {
  sub->add_option("--n", m.n, "Input time points")->check(CLI::Range(1, 64));
  sub->add_option("--use-sar", m.use_sar, "Feed S1 channels to the branch");
  sub->add_option("--branch-depth", m.branch_depth, "Residual blocks in the branch");
  sub->add_option("--feature-width", m.feature_width, "Branch feature channels");
  sub->add_option("--n-3d-blocks", m.n_3d_blocks, "3-D convolution layers");
  sub->add_option("--freeze-steps", m.freeze_steps, "Updates with the branch frozen");
  sub->add_option("--lr", m.lr, "Adam learning rate");
  sub->add_option("--beta1", m.beta1);
  sub->add_option("--beta2", m.beta2);
  sub->add_option("--epochs", m.epochs);
  sub->add_option("--max-steps", m.max_steps, "Update cap (0: epochs only)");
  sub->add_option("--lambda-l1", m.lambda_l1);
  sub->add_option("--lambda-perc", m.lambda_perc);
  sub->add_option("--max-cov", m.max_cov, "Coverage ceiling for training targets");
  sub->add_option("--extractor", m.extractor)->check(CLI::IsMember({"conv-pyramid", "identity"}));
  sub->add_option("--extractor-seed", m.extractor_seed);
}

void add_seq2seq_options(CLI::App* sub, Seq2SeqConfig& m, std::string& source) {
  sub->add_option("--input", source, "Network input")->check(CLI::IsMember({"sar", "noise"}));
  sub->add_option("--passes", m.passes);
  sub->add_option("--iters-per-pass", m.iters_per_pass);
  sub->add_option("--batch-n", m.batch_n, "Adjacent steps per window");
  sub->add_option("--lr", m.lr);
  sub->add_option("--depth", m.depth, "Encoder stages");
  sub->add_option("--width", m.width, "Base channel width");
  sub->add_option("--skip", m.skip_connections, "U-Net skip connections");
  sub->add_option("--noise-seed", m.noise_seed);
  sub->add_option("--noise-sigma", m.noise_sigma);
  sub->add_option("--lambda-l2", m.lambda_l2);
  sub->add_option("--lambda-perc", m.lambda_perc);
}

void fail_on(const std::vector<std::string>& problems, const std::string& what) {
  if (problems.empty()) return;
  std::string msg = "invalid " + what + ":";
  for (const auto& p : problems) msg += "\n  " + p;
  throw CliError(msg);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-temporal cloud removal for Sentinel-2 with Sentinel-1 guidance"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML file with [subcommand] sections; flags take precedence");
  Common c;

  // synth
  SynthConfig synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(s_synth, c, false, true);
  s_synth->add_option("--n-rois", synth.n_rois);
  s_synth->add_option("--n-test-rois", synth.n_test_rois);
  s_synth->add_option("--patches-per-roi", synth.patches_per_roi);
  s_synth->add_option("--T", synth.T, "Time steps per patch");
  s_synth->add_option("--size", synth.size, "Patch height and width");
  s_synth->add_option("--clear-weight", synth.clear_weight);
  s_synth->add_option("--overcast-weight", synth.overcast_weight);
  s_synth->add_option("--max-dt-days", synth.max_dt_days);
  s_synth->add_option("--revisit-days", synth.revisit_days);
  s_synth->add_option("--terrain-seed", synth.terrain_seed);
  s_synth->add_option("--start-date", synth.start_date);

  // validate
  auto* s_validate = app.add_subcommand("validate", "Check a dataset manifest and every series");
  std::string validate_data;
  s_validate->add_option("--data", validate_data, "Dataset directory or manifest.json")->required();
  std::string validate_detector = "threshold";
  s_validate->add_option("--detector", validate_detector)->check(CLI::IsMember(detector_names()));

  // mask-stats
  int bins = 10;
  std::string split_name = "all";
  auto* s_mask = app.add_subcommand("mask-stats", "Cloud coverage histogram");
  add_common(s_mask, c, true, false);
  s_mask->add_option("--bins", bins)->check(CLI::Range(1, 1000));
  s_mask->add_option("--split", split_name)->check(CLI::IsMember({"all", "train", "test"}));

  // pairing-stats
  auto* s_pair = app.add_subcommand("pairing-stats", "S1/S2 acquisition offset statistics");
  add_common(s_pair, c, true, false);

  // baseline
  std::string method = "both";
  int n_inputs = 3;
  auto* s_base = app.add_subcommand("baseline", "Score least-cloudy and mosaicing on the test split");
  add_common(s_base, c, true, true);
  s_base->add_option("--method", method)->check(CLI::IsMember({"least-cloudy", "mosaic", "both"}));
  s_base->add_option("--n", n_inputs)->check(CLI::Range(1, 64));

  // train-seq2point
  Seq2PointConfig s2p;
  long pretrain_steps = 0;
  std::string branch_ckpt;
  auto* s_train = app.add_subcommand("train-seq2point", "Train the fusion network on the train split");
  add_common(s_train, c, true, true);
  add_seq2point_options(s_train, s2p);
  s_train->add_option("--pretrain-steps", pretrain_steps, "Standalone branch updates before fusion training");
  s_train->add_option("--branch-checkpoint", branch_ckpt, "Initialise the branch from this checkpoint")
      ->check(CLI::ExistingFile);

  // eval-seq2point
  std::string checkpoint;
  bool with_baselines = true;
  auto* s_eval = app.add_subcommand("eval-seq2point", "Score a trained model on the test split");
  add_common(s_eval, c, true, true);
  s_eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  s_eval->add_option("--baselines", with_baselines, "Add least-cloudy, mosaicing and branch rows");

  // eval-by-coverage
  std::string cov_split = "test";
  auto* s_cov = app.add_subcommand("eval-by-coverage", "Scores binned by input cloud coverage");
  add_common(s_cov, c, true, true);
  s_cov->add_option("--checkpoint", checkpoint)->check(CLI::ExistingFile);
  s_cov->add_option("--method", method, "Baseline used when no checkpoint is given")
      ->check(CLI::IsMember({"least-cloudy", "mosaic", "both"}));
  s_cov->add_option("--n", n_inputs)->check(CLI::Range(1, 64));
  s_cov->add_option("--bins", bins)->check(CLI::Range(1, 100));
  s_cov->add_option("--split", cov_split)->check(CLI::IsMember({"train", "test"}));

  // fit-seq2seq
  Seq2SeqConfig s2s;
  std::string source = "sar";
  std::string roi, patch;
  bool blend = true;
  int feather = 0;
  std::string fx_name = "conv-pyramid";
  std::uint64_t fx_seed = 1234;
  auto* s_fit = app.add_subcommand("fit-seq2seq", "Fit the internal-learning network to one series");
  add_common(s_fit, c, true, true);
  add_seq2seq_options(s_fit, s2s, source);
  s_fit->add_option("--roi", roi, "ROI id (default: first test patch)");
  s_fit->add_option("--patch", patch, "Patch id");
  s_fit->add_option("--blend", blend, "Occlude the clearest step with the cloudiest step's clouds");
  s_fit->add_option("--feather", feather, "Blend mask box-filter radius")->check(CLI::Range(0, 64));
  s_fit->add_option("--extractor", fx_name)->check(CLI::IsMember({"conv-pyramid", "identity"}));
  s_fit->add_option("--extractor-seed", fx_seed);

  // eval-seq2seq
  std::string fit_dir;
  auto* s_eval2 = app.add_subcommand("eval-seq2seq", "Score a fit-seq2seq run against the original target");
  add_common(s_eval2, c, true, false);
  s_eval2->add_option("--fit", fit_dir, "Output directory of fit-seq2seq")->required()->check(CLI::ExistingDirectory);

  // report
  std::vector<std::string> inputs;
  auto* s_report = app.add_subcommand("report", "Merge report tables from earlier runs");
  add_common(s_report, c, false, false);
  s_report->add_option("--from", inputs, "Output directories of earlier runs")->required()->check(CLI::ExistingDirectory);

  try {
    // --config may follow the subcommand name; the file is read by the top-level app.
    std::vector<std::string> args{argv[0]};
    std::vector<std::string> config_args;
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--config" && i + 1 < argc) {
        config_args.insert(config_args.end(), {a, argv[++i]});
      } else if (a.starts_with("--config=")) {
        config_args.push_back(a);
      } else {
        args.push_back(a);
      }
    }
    args.insert(args.begin() + 1, config_args.begin(), config_args.end());
    std::reverse(args.begin() + 1, args.end());
    args.erase(args.begin());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    if (name == "validate") {
      DatasetManifest m;
      try {
        m = load_manifest(validate_data);
      } catch (const DatasetError& e) {
        std::cerr << e.what() << "\n";
        return 1;
      }
      const auto detector = make_detector(validate_detector);
      int bad = 0, total = 0;
      for (const auto& r : m.rois)
        for (const auto& p : r.patches) {
          ++total;
          try {
            load_series(m, r.roi_id, p.patch_id, FileRasterReader{}, detector.get());
          } catch (const std::exception& e) {
            ++bad;
            std::cerr << e.what() << "\n";
          }
        }
      std::cout << total - bad << "/" << total << " series valid\n";
      return bad == 0 ? 0 : 1;
    }

    prepare_out(c);
    snapshot(*sub, c);
    const std::string rid = run_id(*sub, c);
    Rng rng(c.seed);
    EvalOptions eo{scope_of(c), c.workers};

    if (name == "synth") {
      fail_on(check_config(synth), "synthetic configuration");
      const auto m = synth_generate(synth, c.seed, c.out);
      std::cout << "wrote " << m.rois.size() << " ROIs to " << c.out << " (" << m.dataset_id << ")\n";
    } else if (name == "mask-stats") {
      const auto m = load_manifest(c.data);
      std::vector<CloudMask> masks;
      for (const Split sp : {Split::Train, Split::Test}) {
        if (split_name != "all" && parse_split(split_name) != sp) continue;
        if (m.patches_in(sp).empty()) continue;
        for (auto& s : load_split(m, sp, c))
          for (auto& st : s.steps) masks.push_back(std::move(st.mask));
      }
      const auto h = coverage_histogram(masks, bins);
      std::cout << "images " << masks.size() << ", mean coverage " << h.mean << ", std " << h.stddev << "\n";
      const std::vector<Histogram> hs{to_histogram("coverage", h)};
      for (const auto& p : report(c.out, rid, {}, hs)) std::cout << p.string() << "\n";
    } else if (name == "pairing-stats") {
      const auto m = load_manifest(c.data);
      const auto ps = pairing_stats(m);
      std::cout << "pairs " << ps.pairs << ", mean |dt| " << ps.mean_days << " d, std " << ps.std_days << " d\n";
      const std::vector<Histogram> hs{to_histogram("pairing", ps)};
      for (const auto& p : report(c.out, rid, {}, hs)) std::cout << p.string() << "\n";
    } else if (name == "baseline") {
      const auto m = load_manifest(c.data);
      const auto test = load_split(m, Split::Test, c);
      ReportTable table;
      table.name = "baselines";
      for (const std::string meth : {"least-cloudy", "mosaic"}) {
        if (method != "both" && method != meth) continue;
        Rng r(c.seed);
        const auto t = eval_seq2point(*make_baseline(meth), test, n_inputs, r, eo);
        for (const auto& row : t.rows) table.add_row(row);
        table.metadata = t.metadata;
      }
      table.metadata["dataset_id"] = m.dataset_id;
      print_table(table);
      const std::vector<ReportTable> ts{table};
      report(c.out, rid, ts, {});
    } else if (name == "train-seq2point") {
      s2p.init_seed = c.seed;
      fail_on(check_config(s2p), "seq2point configuration");
      const auto m = load_manifest(c.data);
      const auto train = load_split(m, Split::Train, c);
      Seq2PointModel model = build_seq2point(s2p);
      if (!branch_ckpt.empty()) load_branch_checkpoint(model, branch_ckpt);
      std::vector<double> pre;
      if (pretrain_steps > 0) pre = pretrain_branch(model, train, pretrain_steps, rng);
      std::string log = "step,loss,branch_frozen\n";
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = train_seq2point(model, train, rng, [&](const Seq2PointTrainStep& st, const Seq2PointModel&) {
        log += std::to_string(st.step) + "," + std::to_string(st.loss) + "," + (st.branch_frozen ? "1" : "0") + "\n";
        if (st.step % 100 == 0) std::cerr << "step " << st.step << " loss " << st.loss << "\n";
      });
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_checkpoint(model, (fs::path(c.out) / "seq2point.ckpt").string());
      write_file(fs::path(c.out) / "train_log.csv", log);
      json summary{{"steps", result.steps},
                   {"skipped_series", result.skipped_series},
                   {"pretrain_steps", pre.size()},
                   {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()},
                   {"checksum", nn::checksum(model.parameters())},
                   {"dataset_id", m.dataset_id}};
      write_file(fs::path(c.out) / "train_summary.json", summary.dump(2) + "\n");
      std::cout << "trained " << result.steps << " steps in " << secs << " s\n";
    } else if (name == "eval-seq2point") {
      const auto m = load_manifest(c.data);
      const auto test = load_split(m, Split::Test, c);
      const Seq2PointModel model = load_seq2point_checkpoint(checkpoint);
      const int n = model.config().n;
      std::vector<std::unique_ptr<Seq2PointPredictor>> preds;
      if (with_baselines) {
        preds.push_back(std::make_unique<LeastCloudyPredictor>());
        preds.push_back(std::make_unique<MosaicPredictor>());
        preds.push_back(std::make_unique<BranchPredictor>(model));
      }
      preds.push_back(std::make_unique<ModelPredictor>(model));
      ReportTable table;
      table.name = "seq2point";
      for (const auto& p : preds) {
        Rng r(c.seed);
        const auto t = eval_seq2point(*p, test, n, r, eo);
        table.add_row(t.rows.front());
        table.metadata = t.metadata;
      }
      table.metadata["dataset_id"] = m.dataset_id;
      table.metadata["checkpoint"] = fs::path(checkpoint).filename().string();
      print_table(table);
      const std::vector<ReportTable> ts{table};
      report(c.out, rid, ts, {});
    } else if (name == "eval-by-coverage") {
      const auto m = load_manifest(c.data);
      const auto series = load_split(m, parse_split(cov_split), c);
      std::vector<std::pair<std::string, std::unique_ptr<Seq2PointPredictor>>> preds;
      std::optional<Seq2PointModel> model;
      if (!checkpoint.empty()) {
        model = load_seq2point_checkpoint(checkpoint);
        n_inputs = model->config().n;
        preds.emplace_back("model", std::make_unique<ModelPredictor>(*model));
      } else {
        for (const std::string meth : {"least-cloudy", "mosaic"})
          if (method == "both" || method == meth) preds.emplace_back(meth, make_baseline(meth));
      }
      std::vector<ReportTable> ts;
      for (const auto& [slug, p] : preds) {
        Rng r(c.seed);
        auto t = eval_by_coverage(*p, series, n_inputs, r, bins, eo);
        t.name = "by_coverage_" + slug;
        t.metadata["dataset_id"] = m.dataset_id;
        print_table(t);
        ts.push_back(std::move(t));
      }
      report(c.out, rid, ts, {});
    } else if (name == "fit-seq2seq") {
      s2s.input_source = parse_input_source(source);
      fail_on(check_config(s2s), "seq2seq configuration");
      const auto m = load_manifest(c.data);
      if (roi.empty() != patch.empty()) throw CliError("--roi and --patch go together");
      if (roi.empty()) {
        const auto ids = m.patches_in(Split::Test);
        if (ids.empty()) throw CliError("no test patches");
        std::tie(roi, patch) = ids.front();
      }
      const auto detector = make_detector(c.detector);
      const PatchSeries raw = load_series(m, roi, patch, FileRasterReader{}, detector.get());
      std::optional<BlendResult> b;
      if (blend) b = blend_protocol(raw, feather);
      const auto fx = make_feature_extractor(fx_name, fx_seed);
      const auto fit = fit_seq2seq(b ? b->series : raw, s2s, *fx, rng,
                                   [](int pass, double loss, const auto&) {
                                     std::cerr << "pass " << pass << " loss " << loss << "\n";
                                     return true;
                                   });
      const fs::path pred_dir = fs::path(c.out) / "predictions";
      fs::create_directories(pred_dir);
      for (std::size_t t = 0; t < fit.predictions.size(); ++t) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "t%02zu.npy", t);
        write_npy(pred_dir / buf, fit.predictions[t].data, NpyDtype::F32);
      }
      json meta{{"roi", roi},
                {"patch", patch},
                {"blend", blend},
                {"feather", feather},
                {"model", config_name(s2s)},
                {"input", source},
                {"passes_run", fit.passes_run},
                {"pass_losses", fit.pass_losses},
                {"dataset_id", m.dataset_id},
                {"config", json::parse(to_json(s2s))}};
      if (b) meta["target_index"] = b->target_index, meta["source_index"] = b->source_index;
      write_file(fs::path(c.out) / "fit.json", meta.dump(2) + "\n");
      std::cout << "fitted " << roi << "/" << patch << " for " << fit.passes_run << " passes\n";
    } else if (name == "eval-seq2seq") {
      std::ifstream in(fs::path(fit_dir) / "fit.json");
      if (!in) throw CliError("no fit.json in " + fit_dir);
      const json meta = json::parse(in);
      if (!meta.at("blend").get<bool>()) throw CliError("fit was run without --blend; nothing to score against");
      const auto m = load_manifest(c.data);
      if (meta.at("dataset_id").get<std::string>() != m.dataset_id) throw CliError("fit belongs to another dataset");
      const auto detector = make_detector(c.detector);
      const PatchSeries raw = load_series(m, meta.at("roi"), meta.at("patch"), FileRasterReader{}, detector.get());
      const BlendResult b = blend_protocol(raw, meta.at("feather").get<int>());
      std::vector<OpticalImage> preds;
      for (int t = 0; t < static_cast<int>(raw.steps.size()); ++t) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "t%02d.npy", t);
        OpticalImage img;
        img.data = read_npy(fs::path(fit_dir) / "predictions" / buf).tensor;
        img.range = OpticalRange::Unit;
        preds.push_back(std::move(img));
      }
      std::string label = meta.at("model").get<std::string>() + " (" + meta.at("input").get<std::string>() + ")";
      auto t = eval_seq2seq(std::span<const OpticalImage>(preds), b, label, scope_of(c));
      t.metadata["roi"] = meta.at("roi");
      t.metadata["patch"] = meta.at("patch");
      print_table(t);
      const std::vector<ReportTable> ts{t};
      report(c.out, rid, ts, {});
    } else if (name == "report") {
      std::vector<ReportTable> tables;
      std::vector<Histogram> hists;
      for (const auto& dir : inputs) {
        const fs::path tdir = fs::path(dir) / "report" / "tables";
        std::vector<fs::path> files;
        if (fs::is_directory(tdir))
          for (const auto& e : fs::directory_iterator(tdir))
            if (e.path().extension() == ".csv" && e.path().stem().string().ends_with("_summary") == false)
              files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          std::ifstream in(f);
          std::stringstream ss;
          ss << in.rdbuf();
          const std::string stem = f.stem().string();
          const auto us = stem.find('_');
          std::string tname = us == std::string::npos ? stem : stem.substr(us + 1);
          for (const auto& t : tables)
            if (t.name == tname) tname = stem;
          tables.push_back(parse_table_csv(tname, ss.str()));
        }
        const fs::path pdir = fs::path(dir) / "report" / "plots";
        std::vector<fs::path> pfiles;
        if (fs::is_directory(pdir))
          for (const auto& e : fs::directory_iterator(pdir))
            if (e.path().extension() == ".csv") pfiles.push_back(e.path());
        std::sort(pfiles.begin(), pfiles.end());
        for (const auto& f : pfiles) {
          std::ifstream in(f);
          std::string line;
          Histogram h;
          const std::string stem = f.stem().string();
          const auto us = stem.find('_');
          h.name = us == std::string::npos ? stem : stem.substr(us + 1);
          std::getline(in, line);
          while (std::getline(in, line)) {
            const auto comma = line.rfind(',');
            if (comma == std::string::npos) continue;
            h.bin_labels.push_back(line.substr(0, comma));
            h.counts.push_back(std::stoi(line.substr(comma + 1)));
          }
          hists.push_back(std::move(h));
        }
      }
      for (const auto& p : report(c.out, rid, tables, hists)) std::cout << p.string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace seqcr
