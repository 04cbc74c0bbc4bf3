#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bpr/maskcore.hpp"
#include "oracles.hpp"

namespace bpr {
namespace {

using testing::brute_boundary;
using testing::brute_distance;
using testing::random_mask;

BinaryMask square(int w, int h, int x0, int y0, int side) {
  BinaryMask m(w, h);
  for (int y = y0; y < y0 + side; ++y) {
    for (int x = x0; x < x0 + side; ++x) m.set(x, y, true);
  }
  return m;
}

TEST(BoundaryPixels, EmptyMaskHasNoBoundary) {
  EXPECT_TRUE(boundary_pixels(BinaryMask(5, 5)).empty());
}

TEST(BoundaryPixels, SinglePixel) {
  BinaryMask m(5, 5);
  m.set(2, 2, true);
  const auto b = boundary_pixels(m);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], (PixelCoord{2, 2}));
}

TEST(BoundaryPixels, BlockRingExcludesCenter) {
  const auto b = boundary_pixels(square(5, 5, 1, 1, 3));
  EXPECT_EQ(b.size(), 8u);
  for (const auto& c : b) EXPECT_FALSE(c.x == 2 && c.y == 2);
}

TEST(BoundaryPixels, GridEdgeCountsAsBackground) {
  const auto b = boundary_pixels(BinaryMask(4, 4, true));
  EXPECT_EQ(b.size(), 12u);
}

TEST(BoundaryPixels, MatchesNeighborScanOnRandomMasks) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_mask(rng, 16, 16, 0.1 + 0.008 * trial);
    const auto b = boundary_pixels(m);
    EXPECT_EQ(b, brute_boundary(m));
    for (const auto& c : b) EXPECT_TRUE(m.at(c.x, c.y));
  }
}

TEST(DistanceToSet, ZeroAtSeedsAndPythagoreanTriple) {
  const std::vector<PixelCoord> seeds{{0, 0}};
  const auto d = distance_to_set(8, 8, seeds);
  EXPECT_EQ(d.at(0, 0), 0.0);
  EXPECT_EQ(d.at(3, 4), 5.0);
}

TEST(DistanceToSet, EmptySeedSetIsAnError) {
  EXPECT_THROW(distance_to_set(4, 4, {}), ValidationError);
}

TEST(DistanceToSet, OutOfBoundsSeedIsAnError) {
  const std::vector<PixelCoord> seeds{{4, 0}};
  EXPECT_THROW(distance_to_set(4, 4, seeds), ValidationError);
}

TEST(DistanceToSet, MatchesBruteForceOnRandomSeedSets) {
  std::mt19937 rng(123);
  std::uniform_int_distribution<int> count(1, 40);
  std::uniform_int_distribution<int> coord(0, 31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PixelCoord> seeds(count(rng));
    for (auto& s : seeds) s = {coord(rng), coord(rng)};
    const auto d = distance_to_set(32, 32, seeds);
    const auto sq = squared_distance_to_set(32, 32, seeds);
    const auto ref = brute_distance(32, 32, seeds);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ASSERT_EQ(static_cast<double>(sq[i]), std::round(ref[i] * ref[i])) << "trial " << trial << " pixel " << i;
      ASSERT_NEAR(d.values[i], ref[i], 1e-6) << "trial " << trial << " pixel " << i;
      ASSERT_GE(d.values[i], 0.0);
    }
    // Zero exactly at seeds and nowhere else.
    BinaryMask is_seed(32, 32);
    for (const auto& s : seeds) is_seed.set(s.x, s.y, true);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) ASSERT_EQ(d.at(x, y) == 0.0, is_seed.at(x, y));
    }
  }
}

TEST(DistanceToSet, NonSquareGridWithSparseColumns) {
  const std::vector<PixelCoord> seeds{{6, 0}, {0, 2}};
  const auto d = distance_to_set(7, 3, seeds);
  const auto ref = brute_distance(7, 3, seeds);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(d.values[i], ref[i], 1e-6);
}

TEST(MaskIou, Basics) {
  const auto a = square(8, 8, 0, 0, 3);
  EXPECT_FLOAT_EQ(mask_iou(a, a), 1.0f);
  EXPECT_FLOAT_EQ(mask_iou(a, square(8, 8, 5, 5, 3)), 0.0f);
  EXPECT_FLOAT_EQ(mask_iou(BinaryMask(8, 8), BinaryMask(8, 8)), 1.0f);
}

TEST(MaskIou, TwoSquaresSharingTwoPixels) {
  // 2×2 squares offset by one column share a 1×2 strip: 2 / 6.
  const auto a = square(6, 6, 1, 1, 2);
  const auto b = square(6, 6, 2, 1, 2);
  EXPECT_FLOAT_EQ(mask_iou(a, b), 2.0f / 6.0f);
}

TEST(MaskIou, DimensionMismatchThrows) {
  EXPECT_THROW(mask_iou(BinaryMask(4, 4), BinaryMask(4, 5)), ValidationError);
}

TEST(MaskIou, SymmetricAndBoundedOnRandomMasks) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_mask(rng, 20, 12, 0.3);
    const auto b = random_mask(rng, 20, 12, 0.3);
    const float ab = mask_iou(a, b);
    EXPECT_FLOAT_EQ(ab, mask_iou(b, a));
    EXPECT_GE(ab, 0.0f);
    EXPECT_LE(ab, 1.0f);
    EXPECT_NEAR(ab, testing::brute_iou(a, b), 1e-6);
  }
}

TEST(Morph, RadiusZeroIsIdentity) {
  std::mt19937 rng(1);
  const auto m = random_mask(rng, 10, 10, 0.4);
  EXPECT_EQ(morph(m, MorphOp::Dilate, 0), m);
  EXPECT_EQ(morph(m, MorphOp::Erode, 0), m);
}

TEST(Morph, DilatingOnePixelByOneGivesPlus) {
  BinaryMask m(7, 7);
  m.set(3, 3, true);
  const auto d = morph(m, MorphOp::Dilate, 1);
  EXPECT_EQ(d.count(), 5);
  for (auto [x, y] : {std::pair{3, 3}, {2, 3}, {4, 3}, {3, 2}, {3, 4}}) EXPECT_TRUE(d.at(x, y));
}

TEST(Morph, NegativeRadiusThrows) {
  EXPECT_THROW(morph(BinaryMask(3, 3), MorphOp::Dilate, -1), ValidationError);
}

TEST(Morph, MatchesBruteForceAndOrdering) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = random_mask(rng, 14, 11, 0.15 + 0.015 * trial);
    for (int r : {1, 2, 3}) {
      const auto d = morph(m, MorphOp::Dilate, r);
      const auto e = morph(m, MorphOp::Erode, r);
      ASSERT_EQ(d, testing::brute_morph(m, MorphOp::Dilate, r));
      ASSERT_EQ(e, testing::brute_morph(m, MorphOp::Erode, r));
      for (std::size_t i = 0; i < m.size(); ++i) {
        ASSERT_LE(e.bits()[i], m.bits()[i]);
        ASSERT_LE(m.bits()[i], d.bits()[i]);
      }
    }
  }
}

TEST(Morph, ClosingContainsSquare) {
  const auto sq = square(20, 20, 5, 5, 10);
  for (int r : {1, 2, 3, 4}) {
    const auto closed = morph(morph(sq, MorphOp::Dilate, r), MorphOp::Erode, r);
    EXPECT_EQ(closed, testing::brute_morph(testing::brute_morph(sq, MorphOp::Dilate, r), MorphOp::Erode, r));
    for (std::size_t i = 0; i < sq.size(); ++i) EXPECT_LE(sq.bits()[i], closed.bits()[i]);
  }
}

TEST(GreedyAssignment, BestIouFirstAndInjective) {
  const int w = 12;
  const auto gt = square(w, w, 2, 2, 6);
  Instance g{1, 1, 1.0, gt};
  BinaryMask near = gt;  // IoU 1
  BinaryMask off = square(w, w, 3, 2, 6);  // IoU 30/42
  std::vector<Instance> preds{{10, 1, 0.9, off}, {11, 1, 0.5, near}};
  std::vector<Instance> gts{g};
  const auto a = greedy_iou_assignment(preds, gts, 0.5f);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].pred_index, 1u);
  EXPECT_FLOAT_EQ(a[0].iou, 1.0f);
}

TEST(GreedyAssignment, CategoryMustAgree) {
  const auto m = square(8, 8, 1, 1, 4);
  std::vector<Instance> preds{{1, 2, 1.0, m}};
  std::vector<Instance> gts{{1, 1, 1.0, m}};
  EXPECT_TRUE(greedy_iou_assignment(preds, gts, 0.5f).empty());
}

TEST(SceneValidate, RejectsMismatchedMaskAndDuplicateIds) {
  Scene s;
  s.image = ImageRGB(4, 4);
  s.predictions.push_back({1, 1, 0.5, BinaryMask(4, 3)});
  EXPECT_THROW(s.validate(), ValidationError);
  s.predictions = {{1, 1, 0.5, BinaryMask(4, 4)}, {1, 1, 0.5, BinaryMask(4, 4)}};
  EXPECT_THROW(s.validate(), ValidationError);
  s.predictions.pop_back();
  EXPECT_NO_THROW(s.validate());
}

TEST(RasterTypes, ConstructorsCheckSizes) {
  EXPECT_THROW(ImageRGB(2, 2, std::vector<std::uint8_t>(11)), ValidationError);
  EXPECT_THROW(BinaryMask(0, 2), ValidationError);
  EXPECT_THROW(ProbMap(1, 1, std::vector<float>{1.5f}), ValidationError);
  EXPECT_THROW(ProbMap(1, 1, std::vector<float>{std::nanf("")}), ValidationError);
}

}  // namespace
}  // namespace bpr
