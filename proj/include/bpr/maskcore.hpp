#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bpr/errors.hpp"

namespace bpr {

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const PixelCoord& a, const PixelCoord& b) {
    // Row-major ordering.
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// 8-bit interleaved RGB raster, row-major.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(int width, int height);
  ImageRGB(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t at(int x, int y, int channel) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + channel];
  }
  std::uint8_t& at(int x, int y, int channel) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + channel];
  }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Row-major boolean grid. Stored one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::int64_t count() const;
  bool any() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Foreground probability per pixel. Values are finite and within [0, 1].
class ProbMap {
 public:
  ProbMap() = default;
  ProbMap(int width, int height, float fill = 0.0f);
  ProbMap(int width, int height, std::vector<float> values);

  int width() const { return width_; }
  int height() const { return height_; }

  float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  float& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  friend bool operator==(const ProbMap&, const ProbMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

ProbMap to_prob_map(const BinaryMask& mask);

struct Instance {
  std::int64_t instance_id = 0;
  int category_id = 0;
  double score = 1.0;
  BinaryMask mask;
};

struct Scene {
  ImageRGB image;
  std::vector<Instance> predictions;
  std::optional<std::vector<Instance>> ground_truth;

  // Throws ValidationError when a mask size differs from the image or ids repeat.
  void validate() const;
};

// Foreground pixels with at least one 4-neighbor that is background or off-grid,
// in row-major order.
std::vector<PixelCoord> boundary_pixels(const BinaryMask& mask);

// Exact Euclidean distance field, one value per pixel. Double so that the
// square root of the exact integer distance is accurate to well below 1e-6.
struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Squared distances are integers on the pixel grid, so this is exact.
std::vector<std::int64_t> squared_distance_to_set(int width, int height,
                                                  std::span<const PixelCoord> seeds);

DistanceField distance_to_set(int width, int height, std::span<const PixelCoord> seeds);

// |a ∩ b| / |a ∪ b|, with 1.0 for two empty masks.
float mask_iou(const BinaryMask& a, const BinaryMask& b);

enum class MorphOp { Dilate, Erode };

// Morphology with the discrete Euclidean disk {d : |d| <= radius}. Off-grid
// pixels are background for dilation and are ignored by erosion, so the two
// operators are exact duals under complement.
BinaryMask morph(const BinaryMask& mask, MorphOp op, int radius);

struct PixelRect {
  int x0 = 0;  // inclusive
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

// Tight bounding box of the foreground; nullopt for an empty mask.
std::optional<PixelRect> tight_bbox(const BinaryMask& mask);

struct Assignment {
  std::size_t pred_index = 0;
  std::size_t gt_index = 0;
  float iou = 0.0f;
};

// Greedy one-to-one assignment between same-category predictions and ground
// truth: candidate pairs with IoU strictly above `min_iou` are taken in
// descending IoU order (ties by prediction index, then GT index).
std::vector<Assignment> greedy_iou_assignment(std::span<const Instance> preds,
                                              std::span<const Instance> gts, float min_iou);

}  // namespace bpr
