// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.h"
#include "noisyvos/model.h"
#include "oracles.h"

namespace noisyvos {
namespace {

FrameFeatures RandomFeatures(Pcg32& rng, int w, int h) {
  RgbImage image(w, h);
  for (auto& v : image.rgb) v = static_cast<uint8_t>(rng.NextIndex(256));
  return MakeFeatures(image);
}

ToyModel SmallModel(uint64_t seed) {
  ToyModel m({"cup", "knife", "plate"}, {"cut", "open"});
  m.Initialize(seed);
  return m;
}

TEST(FeaturesTest, ScalingAndCoordinates) {
  RgbImage image(3, 2);
  image.pixel(2, 1)[0] = 255;
  image.pixel(2, 1)[1] = 0;
  image.pixel(2, 1)[2] = 51;
  const FrameFeatures f = MakeFeatures(image);
  ASSERT_EQ(f.values.size(), 6u * FrameFeatures::kChannels);
  const double* px = &f.values[(1 * 3 + 2) * FrameFeatures::kChannels];
  EXPECT_DOUBLE_EQ(px[0], 4.0);
  EXPECT_DOUBLE_EQ(px[1], -4.0);
  EXPECT_DOUBLE_EQ(px[2], 8.0 * (0.2 - 0.5));
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    for (int c = 3; c < 5; ++c) {
      EXPECT_GE(f.values[i * 5 + c], -0.5);
      EXPECT_LE(f.values[i * 5 + c], 0.5);
    }
  }
}

TEST(FeaturesTest, PhotometricJitterIsDeterministicAndBounded) {
  Pcg32 rng(3);
  const FrameFeatures f = RandomFeatures(rng, 5, 4);
  const PhotometricJitter strong{0.2, 0.3, 0.05};
  Pcg32 a(9), b(9);
  const FrameFeatures x = ApplyPhotometric(f, strong, a);
  const FrameFeatures y = ApplyPhotometric(f, strong, b);
  EXPECT_EQ(x.values, y.values);
  EXPECT_NE(x.values, f.values);
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) EXPECT_LE(std::abs(x.values[i * 5 + c]), 4.0);
    // Coordinates never move.
    EXPECT_EQ(x.values[i * 5 + 3], f.values[i * 5 + 3]);
    EXPECT_EQ(x.values[i * 5 + 4], f.values[i * 5 + 4]);
  }
  Pcg32 c(9);
  const FrameFeatures none = ApplyPhotometric(f, {}, c);
  for (std::size_t i = 0; i < f.values.size(); ++i) EXPECT_NEAR(none.values[i], f.values[i], 1e-12);
}

TEST(ToyModelTest, ZeroWeightsGiveOneHalf) {
  ToyModel m = SmallModel(1);
  std::fill(m.parameters().begin(), m.parameters().end(), 0.0);
  Pcg32 rng(2);
  const auto pass = m.Forward(RandomFeatures(rng, 6, 5), {0, 0});
  ASSERT_EQ(pass.outputs.stages.size(), 3u);
  for (const auto& s : pass.outputs.stages)
    for (double v : s.values) EXPECT_EQ(v, 0.5);
  for (double v : pass.outputs.aux.values) EXPECT_EQ(v, 0.5);
}

TEST(ToyModelTest, InitialisationStartsNearForegroundPrior) {
  const ToyModel m = SmallModel(4);
  for (double v : m.parameters()) EXPECT_TRUE(std::isfinite(v));
  Pcg32 rng(5);
  const ProbabilityMap p = m.Predict(RandomFeatures(rng, 8, 8), {1, 0});
  double mean = 0.0;
  for (double v : p.values) mean += v / p.size();
  EXPECT_LT(mean, 0.5);
}

TEST(ToyModelTest, OutputShapesFollowFrames) {
  const ToyModel m = SmallModel(7);
  Pcg32 rng = RngSubstream(7, "shapes");
  for (int i = 0; i < 50; ++i) {
    const int w = 1 + rng.NextIndex(20), h = 1 + rng.NextIndex(20);
    const auto pass = m.Forward(RandomFeatures(rng, w, h), {static_cast<int>(rng.NextIndex(4)), 0});
    for (const auto& s : pass.outputs.stages) {
      ASSERT_EQ(s.width, w);
      ASSERT_EQ(s.height, h);
      for (double v : s.values) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
    ASSERT_TRUE(pass.outputs.aux.SameShape(w, h));
  }
}

TEST(ToyModelTest, PromptConditioningChangesMaps) {
  const ToyModel m = SmallModel(8);
  Pcg32 rng(8);
  const FrameFeatures f = RandomFeatures(rng, 6, 6);
  const ProbabilityMap a = m.Predict(f, m.Encode("cup", "cut"));
  const ProbabilityMap b = m.Predict(f, m.Encode("knife", "cut"));
  const ProbabilityMap c = m.Predict(f, m.Encode("knife", "open"));
  EXPECT_NE(a.values, b.values);
  EXPECT_NE(b.values, c.values);
}

TEST(ToyModelTest, UnknownWordsUseReservedRow) {
  const ToyModel m = SmallModel(9);
  EXPECT_EQ(m.Encode("spoon", "stir").category, 3);
  EXPECT_EQ(m.Encode("spoon", "stir").verb, 2);
  Pcg32 rng(9);
  const ProbabilityMap p = m.Predict(RandomFeatures(rng, 3, 3), m.Encode("spoon", "stir"));
  for (double v : p.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(ToyModelTest, InferenceIgnoresAuxiliaryHead) {
  ToyModel m = SmallModel(10);
  Pcg32 rng(10);
  const FrameFeatures f = RandomFeatures(rng, 7, 5);
  const PromptIds prompt{2, 1};
  const ProbabilityMap before = m.Predict(f, prompt);
  Pcg32 dropout(11);
  EXPECT_EQ(m.Forward(f, prompt, 0.1, &dropout).outputs.main().values, before.values);
  const auto [begin, end] = m.AuxParameterRange();
  ASSERT_LT(begin, end);
  for (std::size_t i = begin; i < end; ++i) m.parameters()[i] += 3.0;
  EXPECT_EQ(m.Predict(f, prompt).values, before.values);
  EXPECT_EQ(m.Forward(f, prompt).outputs.main().values, before.values);
}

TEST(ToyModelTest, DropoutTouchesOnlyAuxiliaryHead) {
  const ToyModel m = SmallModel(12);
  Pcg32 rng(12);
  const FrameFeatures f = RandomFeatures(rng, 5, 5);
  Pcg32 d(13);
  const auto with = m.Forward(f, {0, 0}, 0.5, &d);
  const auto without = m.Forward(f, {0, 0});
  for (int s = 0; s < 3; ++s) EXPECT_EQ(with.outputs.stages[s].values, without.outputs.stages[s].values);
  EXPECT_NE(with.outputs.aux.values, without.outputs.aux.values);
}

TEST(ToyModelTest, FullModelGradientMatchesFiniteDifferences) {
  for (uint64_t seed : {1u, 2u, 3u}) {
    const auto result = testing::ModelGradientCheck(seed);
    EXPECT_GT(result.checked, 1000u);
    EXPECT_LE(result.worst_relative, 1e-5)
        << "seed " << seed << " worst parameter " << result.worst_index;
  }
}

TEST(ToyModelTest, BackwardAccumulates) {
  const ToyModel m = SmallModel(14);
  Pcg32 rng(14);
  const FrameFeatures f = RandomFeatures(rng, 3, 3);
  const auto pass = m.Forward(f, {0, 0});
  ToyModel::OutputGradients g;
  g.stages = {ProbabilityMap(3, 3, 0.0), ProbabilityMap(3, 3, 0.0), ProbabilityMap(3, 3, 1.0)};
  std::vector<double> once(m.parameter_count(), 0.0), twice(m.parameter_count(), 0.0);
  m.Backward(pass, g, once);
  m.Backward(pass, g, twice);
  m.Backward(pass, g, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], 2.0 * once[i], 1e-15);
}

TEST(ToyModelTest, JsonRoundTripIsExact) {
  const ToyModel m = SmallModel(15);
  const ToyModel r = ToyModel::FromJson(m.ToJson());
  EXPECT_EQ(r.categories(), m.categories());
  EXPECT_EQ(r.verbs(), m.verbs());
  ASSERT_EQ(r.parameter_count(), m.parameter_count());
  for (std::size_t i = 0; i < m.parameter_count(); ++i) {
    ASSERT_EQ(r.parameters()[i], m.parameters()[i]);
  }
  EXPECT_EQ(r.ToJson(), m.ToJson());
}

TEST(ToyModelTest, SameSeedSameWeights) {
  const ToyModel a = SmallModel(16), b = SmallModel(16), c = SmallModel(17);
  EXPECT_EQ(a.ToJson(), b.ToJson());
  EXPECT_NE(a.ToJson(), c.ToJson());
}

}  // namespace
}  // namespace noisyvos
