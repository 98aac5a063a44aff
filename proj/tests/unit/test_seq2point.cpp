#include <doctest.h>

#include "fixtures.hpp"
#include "seqcr/preprocess.hpp"
#include "seqcr/seq2point.hpp"

using namespace seqcr;

namespace {

Seq2PointConfig tiny_config(int n = 3, bool sar = true) {
  Seq2PointConfig c;
  c.n = n;
  c.use_sar = sar;
  c.branch_depth = 1;
  c.feature_width = 4;
  c.n_3d_blocks = 1;
  c.freeze_steps = 10;
  c.max_steps = 20;
  c.max_cov = 1.0;
  c.epochs = 100;
  c.lr = 1e-3;
  c.init_seed = 2;
  return c;
}

std::vector<PatchSeries> tiny_series(int count, int size = 8) {
  SynthConfig sc;
  sc.size = size;
  sc.T = 6;
  std::vector<PatchSeries> out;
  for (int k = 0; k < count; ++k) out.push_back(generate_patch_series(sc, 4, k, 0));
  return out;
}

std::vector<TimeStep> resnet_steps(const PatchSeries& s, int n) {
  std::vector<TimeStep> out;
  for (int i = 0; i < n; ++i) out.push_back(prepare_resnet_step(s.steps[i]));
  return out;
}

}  // namespace

TEST_SUITE("seq2point") {
  TEST_CASE("output shapes for every configuration") {
    const auto series = tiny_series(1, 12);
    for (int n : {1, 3, 4, 5})
      for (bool sar : {true, false}) {
        const Seq2PointModel m = build_seq2point(tiny_config(n, sar));
        CHECK(m.branch_input_channels() == (sar ? 15 : 13));
        const OpticalImage out = forward(m, resnet_steps(series[0], n));
        CHECK(out.data.shape() == std::vector<int>{13, 12, 12});
        CHECK(out.range == OpticalRange::ResNet);
        for (double v : out.data.values()) {
          CHECK(v >= 0.0);
          CHECK(v <= 5.0);
        }
        CHECK_THROWS_AS(forward(m, resnet_steps(series[0], n + 1)), ModelError);
      }
  }

  TEST_CASE("one branch is shared by every time point") {
    const Seq2PointModel m3 = build_seq2point(tiny_config(3)), m5 = build_seq2point(tiny_config(5));
    CHECK(m3.branch_parameters().size() == m5.branch_parameters().size());
    CHECK(nn::checksum(m3.branch_parameters()) == nn::checksum(m5.branch_parameters()));
    for (const auto& p : m3.branch_parameters()) CHECK(p.name.rfind("branch.", 0) == 0);
    for (const auto& p : m3.head_parameters()) CHECK(p.name.rfind("head.", 0) == 0);
  }

  TEST_CASE("frame order matters") {
    const auto series = tiny_series(1);
    const Seq2PointModel m = build_seq2point(tiny_config(3));
    auto steps = resnet_steps(series[0], 3);
    const OpticalImage a = forward(m, steps);
    std::swap(steps[0], steps[2]);
    const OpticalImage b = forward(m, steps);
    CHECK(a.data != b.data);
  }

  TEST_CASE("range checks") {
    const auto series = tiny_series(1);
    const Seq2PointModel m = build_seq2point(tiny_config(1));
    CHECK_THROWS_AS(branch_input(series[0].steps[0], true), ModelError);  // RAW input
    CHECK_NOTHROW(branch_input(prepare_resnet_step(series[0].steps[0]), true));
  }

  TEST_CASE("freeze contract") {
    const auto series = tiny_series(4);
    Seq2PointModel m = build_seq2point(tiny_config(3));
    const auto initial = nn::checksum(m.branch_parameters());
    const auto head_initial = nn::checksum(m.head_parameters());
    std::vector<std::uint64_t> branch_sums, head_sums;
    std::vector<bool> frozen;
    Rng rng(5);
    const auto result = train_seq2point(m, series, rng, [&](const Seq2PointTrainStep& st, const Seq2PointModel& mm) {
      branch_sums.push_back(nn::checksum(mm.branch_parameters()));
      head_sums.push_back(nn::checksum(mm.head_parameters()));
      frozen.push_back(st.branch_frozen);
    });
    REQUIRE(result.steps == 20);
    for (int s = 0; s < 10; ++s) {
      CHECK(branch_sums[s] == initial);
      CHECK(frozen[s]);
    }
    CHECK(branch_sums[19] != initial);
    CHECK_FALSE(frozen[10]);
    CHECK(head_sums[0] != head_initial);
    for (const auto& p : m.parameters()) CHECK(p.var.requires_grad());
  }

  TEST_CASE("training is reproducible") {
    const auto series = tiny_series(3);
    auto run = [&] {
      Seq2PointModel m = build_seq2point(tiny_config(3));
      Rng rng(8);
      train_seq2point(m, series, rng);
      return nn::checksum(m.parameters());
    };
    CHECK(run() == run());
  }

  TEST_CASE("series without a valid tuple are skipped") {
    auto series = tiny_series(2);
    series[1].steps.resize(2);
    Seq2PointConfig c = tiny_config(3);
    c.max_steps = 4;
    Seq2PointModel m = build_seq2point(c);
    Rng rng(1);
    const auto r = train_seq2point(m, series, rng);
    CHECK(r.steps == 4);
    CHECK(r.skipped_series >= 1);
    std::vector<PatchSeries> none{series[1]};
    Seq2PointModel m2 = build_seq2point(c);
    CHECK(train_seq2point(m2, none, rng).steps == 0);
  }

  TEST_CASE("checkpoints restore the model") {
    fixtures::TempDir d("s2p_ckpt");
    const auto series = tiny_series(2);
    Seq2PointModel m = build_seq2point(tiny_config(3));
    Rng rng(3);
    train_seq2point(m, series, rng);
    const auto path = (d.path() / "m.ckpt").string();
    save_checkpoint(m, path);
    const Seq2PointModel r = load_seq2point_checkpoint(path);
    CHECK(r.config().n == 3);
    CHECK(nn::checksum(r.parameters()) == nn::checksum(m.parameters()));
    CHECK(forward(r, resnet_steps(series[0], 3)).data == forward(m, resnet_steps(series[0], 3)).data);

    Seq2PointModel fresh = build_seq2point(tiny_config(5));
    load_branch_checkpoint(fresh, path);
    CHECK(nn::checksum(fresh.branch_parameters()) == nn::checksum(m.branch_parameters()));
  }

  TEST_CASE("pretraining updates only the branch") {
    const auto series = tiny_series(2);
    Seq2PointModel m = build_seq2point(tiny_config(3));
    const auto head = nn::checksum(m.head_parameters());
    const auto branch = nn::checksum(m.branch_parameters());
    Rng rng(4);
    CHECK(pretrain_branch(m, series, 3, rng).size() == 3);
    CHECK(nn::checksum(m.head_parameters()) == head);
    CHECK(nn::checksum(m.branch_parameters()) != branch);
    const OpticalImage out = forward_branch(m, prepare_resnet_step(series[0].steps[0]));
    CHECK(out.data.shape() == std::vector<int>{13, 8, 8});
  }

  TEST_CASE("config serialisation and checks") {
    Seq2PointConfig c = tiny_config(4, false);
    const Seq2PointConfig r = seq2point_config_from_json(to_json(c));
    CHECK(r.n == 4);
    CHECK_FALSE(r.use_sar);
    CHECK(r.feature_width == 4);
    CHECK(check_config(c).empty());
    c.n = 0;
    c.lr = -1;
    CHECK(check_config(c).size() >= 2);
    CHECK_THROWS(build_seq2point(c));
  }
}
