#include <doctest.h>

#include "fixtures.hpp"
#include "seqcr/preprocess.hpp"

using namespace seqcr;

namespace {

OpticalImage raw_optical(int h, int w, fixtures::Gen& g) {
  OpticalImage img;
  img.data = fixtures::uniform({kOpticalBands, h, w}, g, -500, 12000);
  for (double& v : img.data.values()) v = std::round(std::max(v, 0.0));
  img.patch_id = "scene";
  return img;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("clip and rescale values") {
    CHECK(clip_rescale_value(10000, 0, 10000, 0, 5) == 5.0);
    CHECK(clip_rescale_value(12000, 0, 10000, 0, 5) == 5.0);
    CHECK(clip_rescale_value(5000, 0, 10000, 0, 5) == 2.5);
    CHECK(clip_rescale_value(-12.5, -25, 0, 0, 2) == 1.0);
    CHECK(clip_rescale_value(-40, -25, 0, 0, 1) == 0.0);
  }

  TEST_CASE("sar resnet spec clips per channel") {
    SarImage s;
    s.data = Tensor({2, 1, 2}, std::vector<double>{-30, -12.5, -32.5, -16.25});
    const SarImage r = clip_rescale(s, sar_resnet_spec());
    CHECK(r.range == SarRange::ResNet);
    CHECK(r.data[0] == 0.0);
    CHECK(r.data[1] == doctest::Approx(1.0));
    CHECK(r.data[2] == 0.0);
    CHECK(r.data[3] == doctest::Approx(1.0));
  }

  TEST_CASE("refuses to preprocess twice") {
    fixtures::Gen g(1);
    const OpticalImage once = clip_rescale(raw_optical(4, 4, g), optical_resnet_spec());
    CHECK(once.range == OpticalRange::ResNet);
    CHECK_THROWS_AS(clip_rescale(once, optical_resnet_spec()), PreprocessError);
  }

  TEST_CASE("outputs stay in range") {
    fixtures::Gen g(2);
    for (int trial = 0; trial < 25; ++trial) {
      const OpticalImage raw = raw_optical(3, 5, g);
      for (const auto& [spec, hi] : {std::pair{optical_resnet_spec(), 5.0}, std::pair{optical_unit_spec(), 1.0}}) {
        const OpticalImage out = clip_rescale(raw, spec);
        for (double v : out.data.values()) {
          CHECK(v >= 0.0);
          CHECK(v <= hi);
        }
      }
    }
  }

  TEST_CASE("eval range conversions agree") {
    fixtures::Gen g(3);
    const OpticalImage raw = raw_optical(4, 4, g);
    const OpticalImage unit = to_eval_range(raw);
    const OpticalImage via_resnet = to_eval_range(clip_rescale(raw, optical_resnet_spec()));
    CHECK(unit.range == OpticalRange::Unit);
    for (std::size_t i = 0; i < unit.data.numel(); ++i) CHECK(unit.data[i] == doctest::Approx(via_resnet.data[i]));
    const OpticalImage back = to_resnet_range(unit);
    for (std::size_t i = 0; i < unit.data.numel(); ++i) CHECK(back.data[i] == doctest::Approx(unit.data[i] * 5));
  }

  TEST_CASE("4000 px scene tiles into 225 patches") {
    OpticalImage scene;
    scene.data = Tensor({kOpticalBands, 4000, 4000});
    scene.patch_id = "s";
    const auto tiles = slice_patches(scene, 256);
    CHECK(tiles.size() == 225);
    CHECK(tiles.front().patch_id == "s_r0_c0");
    CHECK(tiles.back().patch_id == "s_r14_c14");
    CHECK(tiles.back().height() == 256);
  }

  TEST_CASE("tiles reproduce the scene crop") {
    fixtures::Gen g(4);
    OpticalImage scene = raw_optical(10, 13, g);
    const auto tiles = slice_patches(scene, 4);
    REQUIRE(tiles.size() == 6);
    const OpticalImage& t = tiles[4];  // row 1, col 1
    CHECK(t.patch_id == "scene_r1_c1");
    for (int b = 0; b < kOpticalBands; ++b)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(t.data.at(b, i, j) == scene.data.at(b, 4 + i, 4 + j));
    CHECK_THROWS_AS(slice_patches(scene, 16), PreprocessError);
  }

  TEST_CASE("mask tiles keep coverage") {
    fixtures::Gen g(5);
    const CloudMask m = fixtures::random_mask(8, 8, 0.5, g);
    double total = 0;
    for (const auto& t : slice_patches(m, 4)) {
      CHECK(t.coverage == doctest::Approx(count_coverage(t.data)));
      total += t.coverage;
    }
    CHECK(total / 4 == doctest::Approx(m.coverage));
  }
}
