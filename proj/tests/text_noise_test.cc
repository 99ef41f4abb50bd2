// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "noisyvos/errors.h"
#include "noisyvos/text_noise.h"

namespace noisyvos {
namespace {

ClassMapping KitchenMapping() {
  ClassMapping m;
  m.classes[1] = {"container", "food container", "cheese container"};
  m.classes[2] = {"fridge"};
  m.classes[3] = {"knife", "blade"};
  return m;
}

// In-memory dataset; text corruption never touches files.
Dataset PromptDataset(const std::vector<std::pair<std::string, int>>& prompts,
                      int per_clip = 10) {
  Dataset d;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (i % per_clip == 0) {
      Clip clip;
      clip.clip_id = "clip" + std::to_string(i / per_clip);
      clip.frames.push_back({"f00", "frames/x.ppm", "masks/x.pgm"});
      d.clips.push_back(clip);
    }
    Clip& clip = d.clips.back();
    PromptRecord r;
    r.clip_id = clip.clip_id;
    r.object_id = static_cast<int>(clip.objects.size()) + 1;
    r.category = prompts[i].first;
    r.class_id = prompts[i].second;
    r.narration = "open " + r.category;
    r.active = i % 3 != 0;
    clip.objects.push_back(r);
  }
  return d;
}

TEST(CorruptCategoryTest, FlipIntoSingletonClassGivesItsName) {
  // Two-class mapping: a forced flip out of "container" can only land on
  // the fridge class, whose single name is "fridge".
  ClassMapping m;
  m.classes[1] = {"container", "food container"};
  m.classes[2] = {"fridge"};
  Pcg32 rng(1);
  const CategoryCorruption c = CorruptCategory("container", 1, 1.0, m, rng);
  EXPECT_EQ(c.category, "fridge");
  EXPECT_EQ(c.branch, TextNoiseBranch::kFlipped);
  EXPECT_EQ(c.flipped_class_id, 2);
}

TEST(CorruptCategoryTest, SynonymBranchStaysInClass) {
  const ClassMapping m = KitchenMapping();
  std::set<std::string> seen;
  Pcg32 rng = RngSubstream(4, "synonyms");
  for (int i = 0; i < 300; ++i) {
    const CategoryCorruption c = CorruptCategory("container", 1, 0.0, m, rng);
    EXPECT_EQ(c.branch, TextNoiseBranch::kSynonym);
    EXPECT_EQ(c.class_id, 1);
    EXPECT_FALSE(c.flipped_class_id.has_value());
    seen.insert(c.category);
  }
  // Uniform over the whole list, original included.
  EXPECT_EQ(seen, (std::set<std::string>{"container", "food container", "cheese container"}));
}

TEST(CorruptCategoryTest, ZeroRateSingletonIsUnchanged) {
  const ClassMapping m = KitchenMapping();
  Pcg32 rng(9);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(CorruptCategory("fridge", 2, 0.0, m, rng).category, "fridge");
}

TEST(CorruptCategoryTest, RateOneAlwaysChangesClass) {
  const ClassMapping m = KitchenMapping();
  Pcg32 rng = RngSubstream(5, "always-flip");
  for (int i = 0; i < 500; ++i) {
    const CategoryCorruption c = CorruptCategory("blade", 3, 1.0, m, rng);
    ASSERT_NE(c.class_id, 3);
    ASSERT_EQ(m.ClassOf(c.category), c.class_id);
  }
}

TEST(CorruptCategoryTest, FollowsDocumentedDrawOrder) {
  const ClassMapping m = KitchenMapping();
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Pcg32 rng(seed), mirror(seed);
    const CategoryCorruption c = CorruptCategory("knife", 3, 0.5, m, rng);
    if (mirror.NextUniform01() < 0.5) {
      const int flip = std::vector<int>{1, 2}[mirror.NextIndex(2)];
      const auto& names = m.Categories(flip);
      ASSERT_EQ(c.category, names[mirror.NextIndex(static_cast<uint32_t>(names.size()))]);
    } else {
      ASSERT_EQ(c.category, m.Categories(3)[mirror.NextIndex(2)]);
    }
    ASSERT_EQ(rng.NextU32(), mirror.NextU32()) << "draw count differs, seed " << seed;
  }
}

TEST(CorruptCategoryTest, RejectsUnknownInputs) {
  const ClassMapping m = KitchenMapping();
  Pcg32 rng(1);
  EXPECT_THROW(CorruptCategory("knife", 7, 0.5, m, rng), ArgumentError);
  EXPECT_THROW(CorruptCategory("spoon", 3, 0.5, m, rng), ArgumentError);
}

TEST(CorruptDatasetTextTest, FlipFractionConverges) {
  const ClassMapping m = KitchenMapping();
  std::vector<std::pair<std::string, int>> prompts;
  for (int i = 0; i < 100000; ++i) {
    prompts.push_back(i % 2 ? std::pair<std::string, int>{"knife", 3} : std::pair<std::string, int>{"fridge", 2});
  }
  const Dataset d = PromptDataset(prompts, 50);
  for (double rate : {0.2, 0.4, 0.6}) {
    const TextNoiseResult r = CorruptDatasetText(d, rate, m, 17);
    std::size_t flipped = 0;
    for (const auto& p : r.provenance) {
      const bool flip = p.branch == TextNoiseBranch::kFlipped;
      flipped += flip;
      // Class-change soundness, both directions.
      ASSERT_EQ(flip, p.emitted_class_id != p.original_class_id);
      ASSERT_EQ(m.ClassOf(p.emitted_category), p.emitted_class_id);
    }
    const double fraction = static_cast<double>(flipped) / 100000.0;
    EXPECT_NEAR(fraction, rate, 0.005) << "rate " << rate;
  }
}

TEST(CorruptDatasetTextTest, OnlyCategoriesChange) {
  const ClassMapping m = KitchenMapping();
  const Dataset d = PromptDataset({{"container", 1}, {"fridge", 2}, {"knife", 3}, {"blade", 3}}, 2);
  const TextNoiseResult r = CorruptDatasetText(d, 0.6, m, 3);
  ASSERT_EQ(r.provenance.size(), 4u);
  for (std::size_t c = 0; c < d.clips.size(); ++c) {
    EXPECT_EQ(r.dataset.clips[c].frames, d.clips[c].frames);
    for (std::size_t o = 0; o < d.clips[c].objects.size(); ++o) {
      const PromptRecord& a = d.clips[c].objects[o];
      const PromptRecord& b = r.dataset.clips[c].objects[o];
      EXPECT_EQ(a.active, b.active);
      EXPECT_EQ(a.narration, b.narration);
      EXPECT_EQ(a.object_id, b.object_id);
      EXPECT_EQ(b.RenderPrompt(), b.category + " used in the action of " + b.narration);
    }
  }
}

TEST(CorruptDatasetTextTest, PerPromptSubstreamsIgnoreOrder) {
  // Corrupting a subset must give the same result for the prompts it keeps.
  const ClassMapping m = KitchenMapping();
  const Dataset full = PromptDataset({{"container", 1}, {"fridge", 2}, {"knife", 3}, {"blade", 3}}, 4);
  Dataset subset = full;
  subset.clips[0].objects.erase(subset.clips[0].objects.begin());
  const auto a = CorruptDatasetText(full, 0.5, m, 8);
  const auto b = CorruptDatasetText(subset, 0.5, m, 8);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.dataset.clips[0].objects[i + 1].category, b.dataset.clips[0].objects[i].category);
  }
}

TEST(CorruptDatasetTextTest, SameSeedIsDeterministic) {
  const ClassMapping m = KitchenMapping();
  const Dataset d = PromptDataset({{"container", 1}, {"fridge", 2}, {"knife", 3}}, 3);
  const auto a = CorruptDatasetText(d, 0.4, m, 21);
  const auto b = CorruptDatasetText(d, 0.4, m, 21);
  EXPECT_EQ(ManifestJson(a.dataset), ManifestJson(b.dataset));
  EXPECT_EQ(ProvenanceJsonLines(a.provenance), ProvenanceJsonLines(b.provenance));
}

TEST(CorruptDatasetTextTest, ActiveOnlySkipsInactivePrompts) {
  const ClassMapping m = KitchenMapping();
  const Dataset d = PromptDataset({{"container", 1}, {"fridge", 2}, {"knife", 3}}, 3);
  const auto r = CorruptDatasetText(d, 1.0, m, 2, /*active_only=*/true);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& p = r.provenance[i];
    if (d.clips[0].objects[i].active) {
      EXPECT_EQ(p.branch, TextNoiseBranch::kFlipped);
    } else {
      EXPECT_EQ(p.branch, TextNoiseBranch::kSkipped);
      EXPECT_EQ(p.emitted_category, p.original_category);
    }
  }
}

TEST(CorruptDatasetTextTest, ErrorsCarryPromptCoordinates) {
  const ClassMapping m = KitchenMapping();
  const Dataset d = PromptDataset({{"container", 1}, {"spoon", 1}}, 2);
  try {
    CorruptDatasetText(d, 0.2, m, 1);
    FAIL() << "expected an argument error";
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("clip0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("object 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(CorruptDatasetText(d, 1.5, m, 1), ArgumentError);
}

TEST(CategoryHistogramTest, Counting) {
  auto h = ComputeCategoryHistogram(PromptDataset({{"a", 1}, {"a", 1}}));
  EXPECT_EQ(h, (CategoryHistogram{{"a", 1.0}}));
  h = ComputeCategoryHistogram(PromptDataset({{"a", 1}, {"a", 1}, {"b", 1}, {"c", 1}}));
  EXPECT_EQ(h, (CategoryHistogram{{"a", 0.5}, {"b", 0.25}, {"c", 0.25}}));
  EXPECT_THROW(ComputeCategoryHistogram(Dataset{}), ArgumentError);
}

TEST(ShiftReportTest, IdenticalHistogramsHaveZeroDeltas) {
  const CategoryHistogram h{{"a", 0.6}, {"b", 0.395}, {"c", 0.005}};
  for (const auto& row : ShiftReport(h, h)) EXPECT_EQ(row.delta(), 0.0);
}

TEST(ShiftReportTest, MajorRowsThenOthers) {
  const auto rows = ShiftReport({{"a", 0.9}, {"b", 0.1}}, {{"a", 0.5}, {"b", 0.5}});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].category, "a");
  EXPECT_DOUBLE_EQ(rows[0].clean, 0.9);
  EXPECT_DOUBLE_EQ(rows[0].noisy, 0.5);
  EXPECT_EQ(rows[1].category, "b");
  EXPECT_DOUBLE_EQ(rows[1].noisy, 0.5);
  EXPECT_EQ(rows[2].category, kOthersCategory);
  EXPECT_EQ(rows[2].clean, 0.0);
}

TEST(ShiftReportTest, FlippingDilutesDominantCategoriesIntoOthers) {
  // Five frequent classes plus a long tail of rare ones, each class with a
  // single name.
  ClassMapping m;
  for (int id = 1; id <= 200; ++id) m.classes[id] = {"cat" + std::to_string(id)};
  std::vector<std::pair<std::string, int>> prompts;
  for (int i = 0; i < 20000; ++i) {
    const int id = i % 4 != 3 ? 1 + i % 5 : 6 + (i / 4) % 195;
    prompts.push_back({"cat" + std::to_string(id), id});
  }
  const Dataset clean = PromptDataset(prompts, 20);
  const Dataset noisy = CorruptDatasetText(clean, 0.6, m, 5).dataset;
  const auto clean_h = ComputeCategoryHistogram(clean);
  const auto noisy_h = ComputeCategoryHistogram(noisy);
  double sum = 0.0;
  for (const auto& [name, share] : noisy_h) sum += share;
  EXPECT_NEAR(sum, 1.0, 1e-12);

  const auto rows = ShiftReport(clean_h, noisy_h);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    EXPECT_LT(rows[i].noisy, rows[i].clean) << rows[i].category;
  }
  EXPECT_EQ(rows.back().category, kOthersCategory);
  EXPECT_GT(rows.back().noisy, rows.back().clean);
}

}  // namespace
}  // namespace noisyvos
