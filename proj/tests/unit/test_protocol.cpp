#include <doctest.h>

#include "fixtures.hpp"
#include "seqcr/preprocess.hpp"
#include "seqcr/protocol.hpp"

using namespace seqcr;
namespace fs = std::filesystem;

namespace {

PatchSeries synth_series(std::uint64_t seed, int T = 6, int size = 8, int roi = 0) {
  SynthConfig sc;
  sc.T = T;
  sc.size = size;
  return generate_patch_series(sc, seed, roi, 0);
}

void set_mask(TimeStep& s, double p, fixtures::Gen& g) {
  s.mask = p >= 1.0 ? make_mask(Tensor({s.mask.height(), s.mask.width()}, 1.0))
                    : fixtures::random_mask(s.mask.height(), s.mask.width(), p, g);
}

class OraclePredictor final : public Seq2PointPredictor {
 public:
  explicit OraclePredictor(OpticalImage answer) : answer_(std::move(answer)) {}
  std::string name() const override { return "oracle"; }
  OpticalImage predict(std::span<const TimeStep>) const override { return answer_; }

 private:
  OpticalImage answer_;
};

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("hard blend composite identities") {
    fixtures::Gen g(1);
    for (int trial = 0; trial < 10; ++trial) {
      PatchSeries s = synth_series(trial);
      for (int t = 0; t < 6; ++t) set_mask(s.steps[t], 0.1 + 0.15 * ((t + trial) % 6), g);
      const BlendResult b = blend_protocol(s);
      CHECK_FALSE(b.degenerate);
      CHECK(b.target_index == min_coverage_index(s));
      CHECK(b.blend_mask.data == s.steps[b.source_index].mask.data);
      for (int c = 0; c < 13; ++c)
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            const double m = b.blend_mask.data.at(i, j);
            CHECK(b.blended.data.at(c, i, j) * (1 - m) == b.target.data.at(c, i, j) * (1 - m));
            CHECK(b.blended.data.at(c, i, j) * m == b.source.data.at(c, i, j) * m);
          }
      CHECK(b.series.steps[b.target_index].optical.data == b.blended.data);
      CHECK(b.series.steps[b.target_index].mask.data == b.blend_mask.data);
      CHECK(validate(b.series).empty());
    }
  }

  TEST_CASE("feathered and degenerate blends") {
    fixtures::Gen g(2);
    PatchSeries s = synth_series(3);
    for (auto& st : s.steps) st.mask = make_mask(Tensor({8, 8}, 0.0));
    s.steps[4].mask.data.at(3, 3) = 1.0;
    s.steps[4].mask = make_mask(s.steps[4].mask.data);
    const BlendResult f = blend_protocol(s, 1);
    CHECK(f.source_index == 4);
    for (int c = 0; c < 13; ++c) {
      const double lo = std::min(f.target.data.at(c, 2, 3), f.source.data.at(c, 2, 3));
      const double hi = std::max(f.target.data.at(c, 2, 3), f.source.data.at(c, 2, 3));
      CHECK(f.blended.data.at(c, 2, 3) >= lo - 0.5);
      CHECK(f.blended.data.at(c, 2, 3) <= hi + 0.5);
      CHECK(f.blended.data.at(c, 0, 0) == f.target.data.at(c, 0, 0));
    }
    for (auto& st : s.steps) st.mask = make_mask(Tensor({8, 8}, 0.0));
    const BlendResult d = blend_protocol(s);
    CHECK(d.degenerate);
    CHECK(d.target_index == 0);
    CHECK(d.source_index == 5);
    s.steps.resize(1);
    CHECK_THROWS_AS(blend_protocol(s), ProtocolError);
  }

  TEST_CASE("oracle predictions score perfectly") {
    PatchSeries s = synth_series(4);
    const BlendResult b = blend_protocol(s);
    std::vector<OpticalImage> preds;
    for (const auto& st : s.steps) preds.push_back(to_eval_range(st.optical));
    const ReportTable t = eval_seq2seq(preds, b, "oracle");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].record->nrmse_all == 0.0);
    CHECK(t.rows[0].record->psnr == kPsnrCap);
    CHECK(t.metadata.count("all_step_mean_nrmse") == 1);
    preds.resize(b.target_index);
    CHECK_THROWS_AS(eval_seq2seq(preds, b, "short"), ProtocolError);
  }

  TEST_CASE("joint mask and averaging") {
    fixtures::Gen g(5);
    PatchSeries s = synth_series(5);
    const std::vector<TimeStep> in(s.steps.begin(), s.steps.begin() + 3);
    const CloudMask j = joint_cloud_mask(in);
    for (int i = 0; i < 8; ++i)
      for (int k = 0; k < 8; ++k)
        CHECK(j.data.at(i, k) == (in[0].mask.data.at(i, k) * in[1].mask.data.at(i, k) * in[2].mask.data.at(i, k)));

    EvalRecord a, b;
    a.nrmse_all = 0.2, b.nrmse_all = 0.4;
    a.nrmse_clear = 0.1;
    const std::vector<EvalRecord> rs{a, b};
    const EvalRecord m = average_records(rs);
    CHECK(m.nrmse_all == doctest::Approx(0.3));
    CHECK(*m.nrmse_clear == doctest::Approx(0.1));
    CHECK_FALSE(m.nrmse_cloudy.has_value());
  }

  TEST_CASE("seq2point evaluation is deterministic across worker counts") {
    std::vector<PatchSeries> test;
    for (int r = 0; r < 4; ++r) test.push_back(synth_series(6, 6, 8, r));
    MosaicPredictor mosaic;
    Rng r1(9), r2(9);
    const ReportTable a = eval_seq2point(mosaic, test, 3, r1, {ChannelScope::Rgb3, 1});
    const ReportTable b = eval_seq2point(mosaic, test, 3, r2, {ChannelScope::Rgb3, 3});
    CHECK(table_csv(a) == table_csv(b));
    CHECK(a.rows[0].label == "mosaicing");
    CHECK(a.rows[0].samples == 4);
    CHECK_THROWS_AS(make_baseline("median"), ProtocolError);
    CHECK(make_baseline("least-cloudy")->name() == "least cloudy");
  }

  TEST_CASE("coverage bins render dashes for empty clear sets") {
    fixtures::Gen g(7);
    std::vector<PatchSeries> series;
    for (int r = 0; r < 3; ++r) {
      PatchSeries s = synth_series(7, 6, 8, r);
      set_mask(s.steps[0], 0.0, g);
      for (int t = 1; t < 6; ++t) set_mask(s.steps[t], 1.0, g);
      series.push_back(s);
    }
    const OpticalImage answer = to_eval_range(series[0].steps[0].optical);
    OraclePredictor oracle(answer);
    Rng rng(1);
    const ReportTable t = eval_by_coverage(oracle, series, 3, rng, 10);
    REQUIRE(t.rows.size() == 10);
    CHECK(t.rows[0].label == "0-10 %");
    CHECK(t.rows[9].label == "90-100 %");
    CHECK_FALSE(t.rows[0].record.has_value());
    REQUIRE(t.rows[9].record.has_value());
    CHECK_FALSE(t.rows[9].record->nrmse_clear.has_value());
    CHECK(t.metadata.count("warning_empty_bins") == 1);
    const std::string md = table_markdown(t);
    CHECK(md.find("| 90-100 % |") != std::string::npos);
    CHECK(md.find("---") != std::string::npos);
  }

  TEST_CASE("spearman") {
    const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 40}, r{4, 3, 2, 1}, tx{1, 2, 2, 3};
    CHECK(spearman(x, y) == doctest::Approx(1.0));
    CHECK(spearman(x, r) == doctest::Approx(-1.0));
    CHECK(spearman(tx, x) == doctest::Approx(4.5 / std::sqrt(22.5)));
    CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), ProtocolError);
  }

  TEST_CASE("csv round trip and cell formatting") {
    CHECK(format_cell(std::nullopt) == "---");
    CHECK(format_cell(0.12345) == "0.123");
    ReportTable t;
    t.name = "t";
    EvalRecord r;
    r.nrmse_all = 0.25;
    r.nrmse_cloudy = 0.5;
    r.psnr = 12.0;
    r.ssim = 0.75;
    t.add_row({"ours, n=3", r, 7});
    t.add_row({"empty", std::nullopt, 0});
    t.metadata["seed"] = "3";
    CHECK_THROWS_AS(t.add_row({"empty", std::nullopt, 0}), ProtocolError);
    const ReportTable back = parse_table_csv("t", table_csv(t));
    CHECK(table_csv(back) == table_csv(t));
    CHECK(back.rows[0].label == "ours, n=3");
    CHECK_FALSE(back.rows[0].record->nrmse_clear.has_value());
    CHECK_FALSE(back.rows[1].record.has_value());
    CHECK(back.metadata.at("seed") == "3");
  }

  TEST_CASE("report files") {
    fixtures::TempDir d("report");
    const auto empty = report(d.path(), "run1", {}, {});
    REQUIRE(empty.size() == 2);
    CHECK(fixtures::slurp(d.path() / "report/tables/run1_summary.csv") ==
          "method,nrmse_all,nrmse_cloudy,nrmse_clear,psnr,ssim,sam,samples\n");

    const std::vector<double> cov{0.0, 0.2, 0.2, 0.9, 1.0};
    const std::vector<Histogram> hs{to_histogram("coverage", coverage_histogram(cov, 5))};
    ReportTable t;
    t.name = "seq2point";
    t.add_row({"x", std::nullopt, 0});
    const std::vector<ReportTable> ts{t};
    const auto files = report(d.path(), "run2", ts, hs);
    CHECK(files.size() == 6);
    for (const auto& f : files) CHECK(fs::exists(f));
    const std::string png = fixtures::slurp(d.path() / "report/plots/run2_coverage.png");
    CHECK(png.substr(1, 3) == "PNG");
    const std::string csv = fixtures::slurp(d.path() / "report/plots/run2_coverage.csv");
    int total = 0;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) total += std::stoi(line.substr(line.rfind(',') + 1));
    CHECK(total == 5);

    // identical inputs give identical bytes
    fixtures::TempDir d2("report2");
    report(d2.path(), "run2", ts, hs);
    CHECK(fixtures::slurp(d2.path() / "report/plots/run2_coverage.png") == png);

    std::ofstream(d.path() / "blocker") << "x";
    CHECK_THROWS_AS(report(d.path() / "blocker", "r", ts, hs), ProtocolError);
    CHECK_THROWS_AS(report(d.path(), "a/b", ts, hs), ProtocolError);
  }
}
