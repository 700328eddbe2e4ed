#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "perturb_checks.hpp"
#include "vrh/common.hpp"
#include "vrh/perturb.hpp"

using namespace vrh;

TEST_CASE("perturbation invariants on seeded clips") {
  for (int i = 0; i < 20; ++i) {
    const auto clip = fixtures::random_clip("clip" + std::to_string(i), 1000 + i);
    const auto errors = checks::perturbation_invariants(clip);
    INFO("clip ", i);
    for (const auto& e : errors) INFO(e);
    CHECK(errors.empty());
  }
}

TEST_CASE("corruption reference behaviour") {
  const auto clip = fixtures::random_clip("c", 5);

  SUBCASE("brightness shifts a constant grey clip uniformly") {
    VideoClip grey("g", 0, 4, 8, 8, 128);
    const auto out = apply_corruption(grey, Corruption::Brightness, 1, 1);
    const auto v = out.data.front();
    CHECK(v != 128);
    CHECK(v == static_cast<std::uint8_t>(std::lround((128 / 255.0 + brightness_shift(1)) * 255)));
    for (auto x : out.data) CHECK(x == v);
  }
  SUBCASE("impulse noise alters the reference fraction of values") {
    const auto out = apply_corruption(clip, Corruption::ImpulseNoise, 5, 3);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < clip.data.size(); ++i) changed += out.data[i] != clip.data[i];
    const double frac = static_cast<double>(changed) / clip.data.size();
    CHECK(std::abs(frac - impulse_noise_amount(5)) < 0.01);
  }
  SUBCASE("pixelate is constant on its cell grid") {
    const auto out = apply_corruption(clip, Corruption::Pixelate, 3, 3);
    const int cy = pixelate_cells(clip.height, 3);
    const int cx = pixelate_cells(clip.width, 3);
    for (int t = 0; t < clip.frames; ++t) {
      for (int y = 0; y < clip.height; ++y) {
        for (int x = 0; x < clip.width; ++x) {
          // Compare with the first pixel of the same cell, found by scanning.
          int y0 = y, x0 = x;
          while (y0 > 0 && pixelate_cell_of(y0 - 1, clip.height, cy) == pixelate_cell_of(y, clip.height, cy)) --y0;
          while (x0 > 0 && pixelate_cell_of(x0 - 1, clip.width, cx) == pixelate_cell_of(x, clip.width, cx)) --x0;
          for (int c = 0; c < 3; ++c) REQUIRE(out.at(t, y, x, c) == out.at(t, y0, x0, c));
        }
      }
    }
  }
  SUBCASE("unknown corruption") { CHECK_THROWS(parse_corruption("fog")); }
  SUBCASE("severity outside the reference table") {
    CHECK_THROWS(apply_corruption(clip, Corruption::Snow, 0, 1));
    CHECK_THROWS(apply_corruption(clip, Corruption::Snow, 6, 1));
  }
}

TEST_CASE("occlusion grid arithmetic") {
  VideoClip big("big", 0, 16, 224, 224);
  const auto grid = cuboid_grid(big, {}, false);
  CHECK(grid.count() == 1568);
  CHECK(patch_dropout_selection(grid, 0.5, 1).size() == 784);

  VideoClip odd("odd", 0, 15, 64, 64);
  CHECK_THROWS_AS(cuboid_grid(odd, {}, false), DataError);
  CHECK(cuboid_grid(odd, {}, true).nt == 8);

  const auto clip = fixtures::random_clip("d", 9);
  const auto block = temporal_dropout_block(16, 0.625, clip_seed(3, "d"));
  CHECK(block.length == 10);
  const auto out = apply_temporal_dropout(clip, 0.625, 3);
  const int recovery = block.start + block.length;
  REQUIRE(recovery < 16);
  CHECK(fixtures::frame_digest(out, recovery) == fixtures::frame_digest(clip, recovery));
  CHECK(temporal_dropout_block(16, 0.125, 1).length == 2);
}

TEST_CASE("temporal orders") {
  CHECK(interleave_order(16, 2) == std::vector<int>{0, 4, 8, 12, 2, 6, 10, 14, 1, 5, 9, 13, 3, 7, 11, 15});
  CHECK(interleave_order(8, 1) == std::vector<int>{0, 2, 4, 6, 1, 3, 5, 7});

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto order = segment_shuffle_order(16, 4, seed);
    for (std::size_t i = 0; i < 16; i += 4) {
      CHECK(order[i] % 4 == 0);
      for (std::size_t j = 1; j < 4; ++j) CHECK(order[i + j] == order[i] + static_cast<int>(j));
    }
  }

  std::vector<int> identity(16);
  std::iota(identity.begin(), identity.end(), 0);
  const auto clip = fixtures::random_clip("s", 2);
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
    if (segment_shuffle_order(16, 4, clip_seed(seed, "s")) != identity) continue;
    found = true;
    CHECK(apply_temporal_condition(clip, TemporalCondition::SegmentShuffle, seed) == clip);
  }
  CHECK(found);
  CHECK_THROWS(parse_temporal_condition("wobble"));
}

TEST_CASE("perturbation keys") {
  std::vector<PerturbationSpec> all = corruption_grid(42);
  for (const auto& s : occlusion_grid(42)) all.push_back(s);
  for (const auto& s : temporal_grid(42)) all.push_back(s);
  all.push_back(PerturbationSpec::clean());
  all.push_back(PerturbationSpec::patch_dropout(0.3, 42, {4, 8}, true));
  std::set<std::string> keys;
  for (const auto& s : all) {
    CHECK(PerturbationSpec::parse_key(s.key()) == s);
    keys.insert(s.key());
  }
  CHECK(keys.size() == all.size());
  CHECK(PerturbationSpec::moving_block(0.1, 42).key() == "occlusion:moving_block:0.1:42");
}
