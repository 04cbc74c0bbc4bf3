#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpr/maskcore.hpp"
#include "bpr/refine.hpp"

namespace bpr {

// Per-pixel running sum and coverage count of refined probabilities.
class AccumulatorGrid {
 public:
  AccumulatorGrid(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  // Adds the patch's in-image pixels; off-image parts are dropped.
  void add(const RefinedPatch& patch);

  float sum(int x, int y) const { return sum_[index(x, y)]; }
  std::int32_t count(int x, int y) const { return count_[index(x, y)]; }

  // Covered pixels become sum/count >= 0.5; uncovered pixels copy `original`.
  BinaryMask resolve(const BinaryMask& original) const;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_;
  int height_;
  std::vector<float> sum_;
  std::vector<std::int32_t> count_;
};

// Accumulates in ascending patch_id order regardless of the order given.
BinaryMask reassemble(const BinaryMask& original, std::span<const RefinedPatch> patches);

}  // namespace bpr
