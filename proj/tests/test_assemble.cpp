#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "bpr/assemble.hpp"
#include "oracles.hpp"

namespace bpr {
namespace {

RefinedPatch constant_patch(int id, SquareBox box, float value) {
  return {{id, 1, box, 0, 0}, ProbMap(box.size, box.size, value)};
}

TEST(Reassemble, MeanAboveHalfIsForeground) {
  const std::vector<RefinedPatch> patches{constant_patch(0, {0, 0, 2}, 0.4f),
                                          constant_patch(1, {1, 0, 2}, 0.8f)};
  const auto out = reassemble(BinaryMask(4, 2), patches);
  EXPECT_FALSE(out.at(0, 0));  // 0.4 alone
  EXPECT_TRUE(out.at(1, 0));   // mean 0.6
  EXPECT_TRUE(out.at(2, 0));   // 0.8 alone
  EXPECT_FALSE(out.at(3, 0));  // uncovered, copied
}

TEST(Reassemble, ExactHalfIsForeground) {
  const std::vector<RefinedPatch> patches{constant_patch(0, {0, 0, 2}, 0.4f),
                                          constant_patch(1, {0, 0, 2}, 0.6f)};
  const auto out = reassemble(BinaryMask(2, 2), patches);
  EXPECT_EQ(out.count(), 4);
}

TEST(Reassemble, UncoveredPixelsCopyOriginal) {
  std::mt19937 rng(4);
  const auto original = testing::random_mask(rng, 10, 10, 0.5);
  const std::vector<RefinedPatch> patches{constant_patch(0, {-2, -2, 4}, 1.0f)};
  const auto out = reassemble(original, patches);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) EXPECT_EQ(out.at(x, y), (x < 2 && y < 2) ? true : original.at(x, y));
  }
}

TEST(Reassemble, IdentityPatchesReproduceOriginal) {
  std::mt19937 rng(12);
  const auto original = testing::random_mask(rng, 20, 16, 0.4);
  std::vector<RefinedPatch> patches;
  for (int i = 0; i < 12; ++i) {
    const SquareBox box{int(rng() % 24) - 4, int(rng() % 20) - 4, 6};
    ProbMap probs(6, 6);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        const int gx = box.x + x, gy = box.y + y;
        probs.at(x, y) = original.contains(gx, gy) && original.at(gx, gy) ? 1.0f : 0.0f;
      }
    }
    patches.push_back({{i, 1, box, 0, 0}, probs});
  }
  EXPECT_EQ(reassemble(original, patches), original);
}

TEST(Reassemble, MatchesGatherOracleAndIgnoresInputOrder) {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> eighth(0, 8);
  std::uniform_int_distribution<int> pos(-5, 18);
  for (int trial = 0; trial < 50; ++trial) {
    const auto original = testing::random_mask(rng, 18, 14, 0.5);
    std::vector<RefinedPatch> patches;
    const int n = 1 + trial % 9;
    for (int i = 0; i < n; ++i) {
      const SquareBox box{pos(rng), pos(rng), 6};
      ProbMap probs(6, 6);
      // Multiples of 1/8 keep every partial sum exact in float.
      for (float& v : probs.values()) v = eighth(rng) / 8.0f;
      patches.push_back({{i, 1, box, 0, 0}, probs});
    }
    BinaryMask expected = original;
    for (int y = 0; y < 14; ++y) {
      for (int x = 0; x < 18; ++x) {
        std::vector<double> seen;
        for (const auto& p : patches) {
          const auto& b = p.spec.box;
          if (x >= b.x && x < b.x + b.size && y >= b.y && y < b.y + b.size) seen.push_back(p.probs.at(x - b.x, y - b.y));
        }
        if (seen.empty()) continue;
        double mean = 0.0;
        for (double v : seen) mean += v;
        expected.set(x, y, mean / seen.size() >= 0.5);
      }
    }
    ASSERT_EQ(reassemble(original, patches), expected);
    std::shuffle(patches.begin(), patches.end(), rng);
    ASSERT_EQ(reassemble(original, patches), expected);
  }
}

TEST(Reassemble, SizeMismatchRejected) {
  RefinedPatch bad{{0, 1, {0, 0, 4}, 0, 0}, ProbMap(3, 3)};
  EXPECT_THROW(reassemble(BinaryMask(8, 8), std::vector<RefinedPatch>{bad}), ValidationError);
  AccumulatorGrid grid(4, 4);
  EXPECT_THROW(grid.resolve(BinaryMask(5, 4)), ValidationError);
}

TEST(Reassemble, MixedInstancesRejected) {
  auto a = constant_patch(0, {0, 0, 2}, 1.0f);
  auto b = constant_patch(1, {0, 0, 2}, 1.0f);
  b.spec.instance_id = 2;
  EXPECT_THROW(reassemble(BinaryMask(4, 4), std::vector<RefinedPatch>{a, b}), ValidationError);
}

TEST(AccumulatorGrid, CountsCoverage) {
  AccumulatorGrid grid(5, 5);
  grid.add(constant_patch(0, {-1, -1, 3}, 0.25f));
  grid.add(constant_patch(1, {0, 0, 2}, 0.5f));
  EXPECT_EQ(grid.count(0, 0), 2);
  EXPECT_FLOAT_EQ(grid.sum(0, 0), 0.75f);
  EXPECT_EQ(grid.count(2, 2), 0);
}

}  // namespace
}  // namespace bpr
