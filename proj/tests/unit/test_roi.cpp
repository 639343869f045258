#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mtqa/roi.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mtqa;

namespace {

RawMask synthetic_raw(long area, double row, double col, double radius) {
  RawMask m;
  m.area = area;
  m.centroid = Point{row, col};
  m.radius = radius;
  return m;
}

std::vector<RawMask> stats_of(const std::vector<Mask>& masks) {
  std::vector<RawMask> out;
  for (const auto& m : masks) out.push_back(mask_stats(m));
  return out;
}

long count_set(const Mask& m) {
  long n = 0;
  for (auto v : m.values()) n += v;
  return n;
}

}  // namespace

TEST_SUITE("roi") {

TEST_CASE("mask_stats on a single pixel") {
  Mask m(64, 64);
  m(10, 20) = 1;
  const RawMask s = mask_stats(m);
  CHECK(s.area == 1);
  REQUIRE(s.centroid);
  CHECK(s.centroid->row == 10.0);
  CHECK(s.centroid->col == 20.0);
  CHECK(*s.radius == 0.0);
}

TEST_CASE("mask_stats on a 3x3 square") {
  Mask m(16, 16);
  for (int r = 4; r <= 6; ++r)
    for (int c = 4; c <= 6; ++c) m(r, c) = 1;
  const RawMask s = mask_stats(m);
  CHECK(s.area == 9);
  CHECK(s.centroid->row == doctest::Approx(5.0));
  CHECK(s.centroid->col == doctest::Approx(5.0));
  CHECK(*s.radius == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("mask_stats on an empty mask flags undefined values") {
  const RawMask s = mask_stats(Mask(8, 8));
  CHECK(s.area == 0);
  CHECK(s.empty());
  CHECK_FALSE(s.centroid.has_value());
  CHECK_FALSE(s.radius.has_value());
}

TEST_CASE("mask_stats agrees with the integer-sum oracle") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t)
    for (const auto& m : oracle::random_mask_stack(rng, 32, 4)) {
      const RawMask s = mask_stats(m);
      const auto o = oracle::summarize(m);
      CHECK(s.area == o.area);
      if (o.area == 0) continue;
      CHECK(s.centroid->row == doctest::Approx(o.row).epsilon(1e-12));
      CHECK(s.centroid->col == doctest::Approx(o.col).epsilon(1e-12));
      CHECK(*s.radius == doctest::Approx(o.radius).epsilon(1e-12));
      // centroid inside the bounding box of the set pixels
      int r0 = 1 << 20, r1 = -1, c0 = 1 << 20, c1 = -1;
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
          if (m(r, c)) r0 = std::min(r0, r), r1 = std::max(r1, r), c0 = std::min(c0, c), c1 = std::max(c1, c);
      CHECK(s.centroid->row >= r0);
      CHECK(s.centroid->row <= r1);
      CHECK(s.centroid->col >= c0);
      CHECK(s.centroid->col <= c1);
    }
}

TEST_CASE("aggregate of a single mask") {
  const std::vector<RawMask> masks{synthetic_raw(100, 32, 32, 10)};
  const RoiCircle c = aggregate_stack_roi(masks, RoiConfig{});
  CHECK(c.center.row == 32.0);
  CHECK(c.center.col == 32.0);
  CHECK(c.spread == 0.0);
  CHECK(c.radius == 10.0);
}

TEST_CASE("aggregate of two equal-area masks") {
  const std::vector<RawMask> masks{synthetic_raw(50, 30, 30, 8), synthetic_raw(50, 34, 34, 10)};
  const RoiCircle c = aggregate_stack_roi(masks, RoiConfig{});
  CHECK(c.center.row == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(c.center.col == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(c.spread == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  CHECK(c.radius == doctest::Approx(10.0 + std::sqrt(8.0)).epsilon(1e-12));
}

TEST_CASE("all masks below area_min is an error") {
  RoiConfig cfg;
  cfg.area_min = 200;
  const std::vector<RawMask> masks{synthetic_raw(50, 30, 30, 8), synthetic_raw(199, 34, 34, 10)};
  CHECK_THROWS_WITH_AS(aggregate_stack_roi(masks, cfg), "no reliable masks in stack", DataError);
  CHECK_THROWS_AS(aggregate_stack_roi(std::vector<RawMask>{}, RoiConfig{}), DataError);
  CHECK_THROWS_AS(aggregate_stack_roi(std::vector<RawMask>{mask_stats(Mask(4, 4))}, RoiConfig{}), DataError);
}

TEST_CASE("area_min below 1 is rejected") {
  RoiConfig cfg;
  cfg.area_min = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(RoiConfig::from_fraction(0.01, 64).area_min == 41);
  CHECK(RoiConfig::from_fraction(0.0, 64).area_min == 1);
}

TEST_CASE("literal weighting matches its oracle") {
  std::mt19937_64 rng(23);
  RoiConfig cfg;
  cfg.weighting = RoiWeighting::Literal;
  cfg.area_min = 5;
  for (int t = 0; t < 100; ++t) {
    const auto masks = oracle::random_mask_stack(rng, 24, 6);
    const auto expected = oracle::stack_circle(masks, cfg.area_min, true);
    const auto stats = stats_of(masks);
    if (!expected) {
      CHECK_THROWS_AS(aggregate_stack_roi(stats, cfg), DataError);
      continue;
    }
    const RoiCircle got = aggregate_stack_roi(stats, cfg);
    CHECK(std::abs(got.center.row - expected->center.row) <= 1e-9);
    CHECK(std::abs(got.spread - expected->spread) <= 1e-9);
    CHECK(std::abs(got.radius - expected->radius) <= 1e-9);
  }
}

TEST_CASE("aggregation properties on random stacks") {
  std::mt19937_64 rng(29);
  RoiConfig cfg;
  cfg.area_min = 20;
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    auto stats = stats_of(oracle::random_mask_stack(rng, 32, 8));
    const bool any = std::any_of(stats.begin(), stats.end(), [&](const RawMask& m) { return m.area >= cfg.area_min; });
    if (!any) continue;
    ++checked;
    const RoiCircle base = aggregate_stack_roi(stats, cfg);

    double max_r = 0;
    for (const auto& m : stats)
      if (m.area >= cfg.area_min) max_r = std::max(max_r, *m.radius);
    CHECK(base.radius >= base.spread);
    CHECK(base.spread >= 0);
    CHECK(base.radius >= max_r);

    auto shuffled = stats;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const RoiCircle perm = aggregate_stack_roi(shuffled, cfg);
    CHECK(perm.center.row == doctest::Approx(base.center.row).epsilon(1e-12));
    CHECK(perm.center.col == doctest::Approx(base.center.col).epsilon(1e-12));
    CHECK(perm.radius == doctest::Approx(base.radius).epsilon(1e-12));

    std::vector<RawMask> reliable;
    for (const auto& m : stats)
      if (m.area >= cfg.area_min) reliable.push_back(m);
    const RoiCircle pruned = aggregate_stack_roi(reliable, cfg);
    CHECK(pruned.center.row == base.center.row);
    CHECK(pruned.center.col == base.center.col);
    CHECK(pruned.radius == base.radius);

    auto scaled = stats;
    for (auto& m : scaled) m.area *= 3;
    RoiConfig scaled_cfg = cfg;
    scaled_cfg.area_min *= 3;
    const RoiCircle sc = aggregate_stack_roi(scaled, scaled_cfg);
    CHECK(sc.center.row == doctest::Approx(base.center.row).epsilon(1e-12));
    CHECK(sc.spread == doctest::Approx(base.spread).epsilon(1e-9));
    CHECK(sc.radius == doctest::Approx(base.radius).epsilon(1e-12));
  }
  CHECK(checked > 50);
}

TEST_CASE("rasterize point circle and saturation") {
  const Mask point = rasterize_circle(RoiCircle{{5, 7}, 0, 0}, 16, 16);
  CHECK(count_set(point) == 1);
  CHECK(point(5, 7) == 1);
  const Mask all = rasterize_circle(RoiCircle{{8, 8}, 0, 100}, 16, 16);
  CHECK(count_set(all) == 256);
  const Mask none = rasterize_circle(RoiCircle{{-50, -50}, 0, 3}, 16, 16);
  CHECK(count_set(none) == 0);
}

TEST_CASE("r=5 circle at the center matches the per-pixel oracle") {
  const RoiCircle c{{32, 32}, 0, 5};
  const Mask m = rasterize_circle(c, 64, 64);
  CHECK(m == oracle::disk(c, 64, 64));
  CHECK(count_set(m) == 81);
}

TEST_CASE("rasterization matches the oracle on random circles, including clipped ones") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-20, 84), rad(0, 40);
  for (int t = 0; t < 500; ++t) {
    RoiCircle c{{pos(rng), pos(rng)}, 0, rad(rng)};
    if (t % 5 == 0) c = RoiCircle{{std::round(pos(rng)), std::round(pos(rng))}, 0, std::round(rad(rng))};
    REQUIRE(rasterize_circle(c, 64, 48) == oracle::disk(c, 64, 48));
  }
}

TEST_CASE("apply_mask") {
  std::mt19937_64 rng(2);
  Slice s{mtqa::testing::random_image(8, rng), "s", 0};
  CHECK(apply_mask(s, Mask(8, 8, 1)) == s);
  const Slice zero = apply_mask(s, Mask(8, 8, 0));
  for (float v : zero.pixels.values()) CHECK(v == 0.f);
  Mask half(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 4; ++c) half(r, c) = 1;
  const Slice h = apply_mask(s, half);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) CHECK(h.pixels(r, c) == (c < 4 ? s.pixels(r, c) : 0.f));
  CHECK_THROWS_AS(apply_mask(s, Mask(8, 7, 1)), ShapeError);
}

TEST_CASE("threshold segmenter basics") {
  CHECK(count_set(threshold_segmenter(Image(16, 16, 0.f), 0.5f)) == 0);
  std::mt19937_64 rng(4);
  Image img = mtqa::testing::random_image(16, rng);
  for (auto& v : img.values()) v *= 0.9f;
  CHECK(count_set(threshold_segmenter(img, 0.999f)) == 0);

  Image two(10, 10, 0.f);
  for (int c = 0; c < 3; ++c) two(1, c) = 1.f;
  for (int r = 5; r < 9; ++r)
    for (int c = 5; c < 9; ++c) two(r, c) = 1.f;
  const Mask m = threshold_segmenter(two, 0.5f);
  CHECK(count_set(m) == 16);
  CHECK(m(1, 0) == 0);
  CHECK(m(6, 6) == 1);
}

TEST_CASE("segmenter recovers most of the generated brain on D slices") {
  auto cfg = mtqa::testing::small_synth(6, 4, 12, 64);
  cfg.label_fractions = {1.0, 0.0, 0.0};
  for (const auto& it : generate_synthetic_detailed(cfg)) {
    REQUIRE(it.brain);
    const Mask truth = it.brain->rasterize(64);
    const Mask seg = threshold_segmenter(it.item.slice.pixels);
    long inter = 0, total = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      total += truth.values()[i];
      inter += truth.values()[i] & seg.values()[i];
    }
    CHECK(static_cast<double>(inter) >= 0.8 * static_cast<double>(total));
  }
}

TEST_CASE("stack ROIs cover every stack and fall back to the full image") {
  auto cfg = mtqa::testing::small_synth(7, 3, 10, 32);
  Dataset ds = generate_synthetic(cfg);
  const auto rois = compute_stack_rois(ds, RoiConfig::from_fraction(0.01, 32));
  CHECK(rois.size() == 3);
  for (const auto& [id, roi] : rois) {
    CHECK(roi.circle.has_value());
    CHECK(roi.mask.rows() == 32);
  }
  Dataset blank;
  blank.unlabeled.push_back(Slice{Image(8, 8, 0.f), "empty", 0});
  const auto fallback = compute_stack_rois(blank, RoiConfig{});
  CHECK_FALSE(fallback.at("empty").circle.has_value());
  CHECK(count_set(fallback.at("empty").mask) == 64);
}

}  // TEST_SUITE
