#include <gtest/gtest.h>

#include <set>

#include "otoc/annotate.hpp"
#include "otoc/error.hpp"
#include "otoc/features.hpp"
#include "otoc/synth.hpp"
#include "test_util.hpp"

using namespace otoc;

namespace {

// Instance k owns points [k * per, (k + 1) * per); category = k % 2.
Scene striped(int instances, int per) {
  Scene s;
  s.num_categories = 2;
  for (int k = 0; k < instances; ++k)
    for (int i = 0; i < per; ++i) {
      s.points.emplace_back(k, i, 0);
      s.colors.emplace_back(0, 0, 0);
      s.gt_semantic.emplace_back(k % 2);
      s.gt_instance.emplace_back(k);
    }
  return s;
}

}  // namespace

TEST(Clicks, OnePerInstance) {
  const Scene s = striped(3, 5);
  const ClickSet cs = simulate_clicks(s, 1);
  ASSERT_EQ(cs.clicks.size(), 3u);
  std::set<int> inst;
  for (const auto& c : cs.clicks) {
    inst.insert(*s.gt_instance[c.point]);
    EXPECT_EQ(c.category, *s.gt_semantic[c.point]);
  }
  EXPECT_EQ(inst.size(), 3u);
}

TEST(Clicks, HalfTheThingsRoundsUp) {
  const Scene s = striped(7, 4);
  EXPECT_EQ(simulate_clicks(s, 3, 1, 0.5).clicks.size(), 4u);
  EXPECT_EQ(simulate_clicks(s, 3, 1, 0.25).clicks.size(), 2u);
}

TEST(Clicks, SeveralPerThingAreDistinctAndCapped) {
  const Scene s = striped(2, 3);
  const ClickSet cs = simulate_clicks(s, 5, 5);
  EXPECT_EQ(cs.clicks.size(), 6u);
  std::set<int> pts;
  for (const auto& c : cs.clicks) pts.insert(c.point);
  EXPECT_EQ(pts.size(), 6u);
  const ClickSet two = simulate_clicks(s, 5, 2);
  EXPECT_EQ(two.clicks.size(), 4u);
}

TEST(Clicks, SinglePointSceneAlwaysClicked) {
  const Scene s = striped(1, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ClickSet cs = simulate_clicks(s, seed);
    ASSERT_EQ(cs.clicks.size(), 1u);
    EXPECT_EQ(cs.clicks[0].point, 0);
  }
}

TEST(Clicks, FairOverSeeds) {
  const Scene s = striped(1, 2);
  int first = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) first += simulate_clicks(s, seed).clicks[0].point == 0;
  EXPECT_NEAR(first / 10000.0, 0.5, 0.02);
}

TEST(Clicks, Deterministic) {
  SynthSpec spec;
  spec.seed = 4;
  const Scene s = generate_scene(spec);
  EXPECT_EQ(simulate_clicks(s, 99, 2, 0.5).clicks, simulate_clicks(s, 99, 2, 0.5).clicks);
  EXPECT_NE(simulate_clicks(s, 99).clicks, simulate_clicks(s, 100).clicks);
}

TEST(Clicks, InvalidArguments) {
  const Scene s = striped(2, 2);
  EXPECT_THROW(simulate_clicks(s, 1, 0), ValidationError);
  EXPECT_THROW(simulate_clicks(s, 1, 1, 0.0), ValidationError);
  EXPECT_THROW(simulate_clicks(s, 1, 1, 1.5), ValidationError);
  Scene none = striped(1, 2);
  none.gt_instance = {Label{}, Label{}};
  EXPECT_THROW(simulate_clicks(none, 1), ValidationError);
}

TEST(Expand, OneClickOneSeed) {
  const SuperVoxelPartition part(std::vector<int>{0, 1, 2, 3, 3, 4});
  ClickSet cs;
  cs.clicks = {{4, 1}};
  const PseudoLabels pl = expand_clicks(cs, part);
  ASSERT_EQ(pl.size(), 5u);
  for (int j = 0; j < 5; ++j) {
    if (j == 3) {
      EXPECT_EQ(pl.entries[j].label, Label{1});
      EXPECT_EQ(pl.entries[j].provenance, Provenance::kSeed);
      EXPECT_EQ(pl.entries[j].confidence, 1.0f);
    } else {
      EXPECT_FALSE(pl.entries[j].label.has_value());
      EXPECT_EQ(pl.entries[j].provenance, Provenance::kAbsent);
    }
  }
  EXPECT_DOUBLE_EQ(pl.coverage(), 0.2);
}

TEST(Expand, SameCategoryTwiceIsNoConflict) {
  const SuperVoxelPartition part(std::vector<int>{0, 0, 1});
  ClickSet cs;
  cs.clicks = {{0, 1}, {1, 1}};
  const PseudoLabels pl = expand_clicks(cs, part);
  EXPECT_EQ(pl.conflicts, 0);
  EXPECT_EQ(pl.entries[0].label, Label{1});
}

TEST(Expand, ConflictingCategoriesDropTheSuperVoxel) {
  const SuperVoxelPartition part(std::vector<int>{0, 0, 0, 1});
  ClickSet cs;
  cs.clicks = {{0, 1}, {1, 0}, {2, 1}, {3, 0}};
  const PseudoLabels pl = expand_clicks(cs, part);
  EXPECT_EQ(pl.conflicts, 1);
  EXPECT_FALSE(pl.entries[0].label.has_value());
  EXPECT_EQ(pl.entries[0].provenance, Provenance::kAbsent);
  EXPECT_EQ(pl.entries[1].label, Label{0});
}

TEST(Expand, OnlyClickedSuperVoxelsLabeled) {
  SynthSpec spec;
  spec.seed = 6;
  const Scene s = generate_scene(spec);
  const auto part = SuperVoxelPartition::compacted([&] {
    std::vector<std::uint32_t> ids(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ids[i] = static_cast<std::uint32_t>(i / 50);
    return ids;
  }());
  const ClickSet cs = simulate_clicks(s, 2);
  const PseudoLabels pl = expand_clicks(cs, part);
  std::set<int> clicked;
  for (const auto& c : cs.clicks) clicked.insert(part.id_of(c.point));
  for (std::size_t j = 0; j < pl.size(); ++j)
    if (pl.entries[j].label) EXPECT_TRUE(clicked.count(static_cast<int>(j)));
  EXPECT_LT(pl.coverage(), 0.2);
}

TEST(PseudoLabelFile, RoundTrip) {
  PseudoLabels pl;
  pl.entries = {{Label{2}, 1.0f, Provenance::kSeed}, {Label{}, 0.0f, Provenance::kAbsent}, {Label{0}, 0.93f, Provenance::kPropagated}};
  test::TempDir dir("otpl");
  save_pseudo_labels(pl, dir / "l.otpl");
  EXPECT_EQ(std::filesystem::file_size(dir / "l.otpl"), 12u + 3u * 9u);
  const PseudoLabels back = load_pseudo_labels(dir / "l.otpl");
  EXPECT_EQ(back.entries, pl.entries);
}

TEST(PseudoLabelFile, InvariantsChecked) {
  PseudoLabels pl;
  pl.entries = {{Label{2}, 0.5f, Provenance::kSeed}};
  EXPECT_THROW(pl.validate(), ValidationError);
  pl.entries = {{Label{}, 0.5f, Provenance::kPropagated}};
  EXPECT_THROW(pl.validate(), ValidationError);
}
