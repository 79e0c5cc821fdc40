#include <gtest/gtest.h>

#include <map>
#include <set>

#include "otoc/error.hpp"
#include "otoc/features.hpp"
#include "otoc/scene.hpp"
#include "otoc/supervoxel.hpp"
#include "otoc/synth.hpp"
#include "otoc/unary.hpp"
#include "test_util.hpp"

using namespace otoc;

namespace {

Scene default_scene(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  return generate_scene(spec);
}

// Every instance owns a super-voxel in which it holds at least 95% of the points.
bool separable(const Scene& s) {
  const auto part = partition_region_growing(s, extract_features(s, 10), PartitionParams{});
  std::set<int> covered;
  for (std::size_t j = 0; j < part.num_supervoxels(); ++j) {
    std::map<int, int> count;
    for (int i : part.members(j)) ++count[*s.gt_instance[i]];
    for (auto [inst, c] : count)
      if (c >= 0.95 * static_cast<double>(part.members(j).size())) covered.insert(inst);
  }
  std::set<int> all;
  for (const auto& l : s.gt_instance) all.insert(*l);
  return covered == all;
}

}  // namespace

TEST(Synth, DeterministicBySeed) {
  EXPECT_EQ(encode_scene(default_scene(8)), encode_scene(default_scene(8)));
  EXPECT_NE(encode_scene(default_scene(8)), encode_scene(default_scene(9)));
}

TEST(Synth, SingleFloorIsPlanar) {
  SynthSpec spec;
  spec.seed = 1;
  spec.objects = {{{1, 1}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}}};
  const Scene s = generate_scene(spec);
  for (std::size_t i = 0; i < s.size(); ++i) {
    ASSERT_EQ(s.gt_instance[i], Label{0});
    ASSERT_EQ(s.gt_semantic[i], Label{category::kFloor});
    ASSERT_LT(std::abs(s.points[i].z()), 0.03);
  }
}

TEST(Synth, DefaultSpecRanges) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = default_scene(seed);
    ASSERT_NO_THROW(s.validate());
    std::set<int> inst;
    for (const auto& l : s.gt_instance) inst.insert(*l);
    EXPECT_GE(inst.size(), 8u) << seed;
    EXPECT_LE(inst.size(), 30u) << seed;
    // Instance ids are dense from zero.
    EXPECT_EQ(*inst.rbegin(), static_cast<int>(inst.size()) - 1);
    EXPECT_GE(s.size(), 5000u) << seed;
    EXPECT_LE(s.size(), 40000u) << seed;
    for (const auto& c : s.colors) ASSERT_TRUE((c.array() >= 0).all() && (c.array() <= 1).all());
  }
}

TEST(Synth, InstancesSeparableByRegionGrowing) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) ok += separable(default_scene(seed));
  EXPECT_GE(ok, 45);
}

TEST(Synth, ClassBalance) {
  std::vector<int> present(category::kCount, 0);
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    std::set<int> cats;
    for (const auto& l : default_scene(seed).gt_semantic) cats.insert(*l);
    for (int c : cats) ++present[c];
  }
  for (int c = 0; c < category::kCount; ++c) EXPECT_GE(present[c], 16) << "category " << c;
}

TEST(Synth, ColorAloneIsNotEnough) {
  RowMatrix rgb;
  LabeledScene data{&rgb, {}};
  std::vector<Scene> scenes;
  std::size_t n = 0;
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    scenes.push_back(default_scene(seed));
    n += scenes.back().size();
  }
  rgb.resize(static_cast<Eigen::Index>(n), 3);
  Eigen::Index r = 0;
  for (const auto& s : scenes)
    for (std::size_t i = 0; i < s.size(); ++i) {
      rgb.row(r++) = s.colors[i].transpose();
      data.labels.push_back(s.gt_semantic[i]);
    }
  TrainConfig cfg;
  cfg.unary_hidden = {};
  cfg.epochs = 200;
  cfg.learning_rate = 0.05;
  const auto res = train_unary(std::span<const LabeledScene>(&data, 1), category::kCount, cfg, 3);
  const auto probs = predict_unary(res.model, rgb).probs;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < rgb.rows(); ++i) {
    Eigen::Index arg;
    probs.row(i).maxCoeff(&arg);
    correct += arg == *data.labels[static_cast<std::size_t>(i)];
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(n);
  EXPECT_LE(acc, 0.80);
  EXPECT_GT(acc, 0.3);  // the fit itself did something
}

TEST(Synth, CorpusFiles) {
  test::TempDir dir("corpus");
  SynthSpec spec;
  spec.seed = 40;
  EXPECT_TRUE(generate_corpus(spec, 0, dir.path()).empty());
  const auto files = generate_corpus(spec, 3, dir.path());
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[1].filename(), "scene_0001.otoc");
  spec.seed = 41;
  EXPECT_EQ(encode_scene(load_scene(files[1])), encode_scene(generate_scene(spec)));
}

TEST(Synth, SpecValidated) {
  SynthSpec spec;
  spec.objects[category::kChair] = {3, 2};
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = SynthSpec{};
  spec.point_density = 0;
  EXPECT_THROW(generate_scene(spec), ValidationError);
}
