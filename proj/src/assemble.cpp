#include "bpr/assemble.hpp"

#include <algorithm>
#include <numeric>

namespace bpr {

AccumulatorGrid::AccumulatorGrid(int width, int height)
    : width_(width),
      height_(height),
      sum_(static_cast<std::size_t>(width) * height, 0.0f),
      count_(static_cast<std::size_t>(width) * height, 0) {
  if (width < 1 || height < 1) throw ValidationError("AccumulatorGrid: empty grid");
}

void AccumulatorGrid::add(const RefinedPatch& patch) {
  const SquareBox& box = patch.spec.box;
  if (patch.probs.width() != box.size || patch.probs.height() != box.size) {
    throw ValidationError("reassemble: patch " + std::to_string(patch.spec.patch_id) +
                          " has a " + std::to_string(patch.probs.width()) + "x" +
                          std::to_string(patch.probs.height()) + " map for a box of side " +
                          std::to_string(box.size));
  }
  const int x0 = std::max(box.x, 0);
  const int y0 = std::max(box.y, 0);
  const int x1 = std::min(box.x + box.size, width_);
  const int y1 = std::min(box.y + box.size, height_);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      sum_[index(x, y)] += patch.probs.at(x - box.x, y - box.y);
      ++count_[index(x, y)];
    }
  }
}

BinaryMask AccumulatorGrid::resolve(const BinaryMask& original) const {
  if (original.width() != width_ || original.height() != height_) {
    throw ValidationError("reassemble: original mask is " + std::to_string(original.width()) +
                          "x" + std::to_string(original.height()) + ", grid is " +
                          std::to_string(width_) + "x" + std::to_string(height_));
  }
  BinaryMask out = original;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t i = index(x, y);
      if (count_[i] == 0) continue;
      out.set(x, y, sum_[i] / static_cast<float>(count_[i]) >= 0.5f);
    }
  }
  return out;
}

BinaryMask reassemble(const BinaryMask& original, std::span<const RefinedPatch> patches) {
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return patches[a].spec.patch_id < patches[b].spec.patch_id;
  });
  if (!patches.empty()) {
    const auto id = patches.front().spec.instance_id;
    for (const auto& p : patches) {
      if (p.spec.instance_id != id) {
        throw ValidationError("reassemble: patches belong to different instances");
      }
    }
  }
  AccumulatorGrid grid(original.width(), original.height());
  for (std::size_t i : order) grid.add(patches[i]);
  return grid.resolve(original);
}

}  // namespace bpr
