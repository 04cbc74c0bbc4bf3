#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpr/maskcore.hpp"

namespace bpr {

// Square window in image coordinates; may extend past the image edges.
struct SquareBox {
  int x = 0;
  int y = 0;
  int size = 0;

  friend bool operator==(const SquareBox&, const SquareBox&) = default;
};

double box_iou(const SquareBox& a, const SquareBox& b);

enum class Scheme { DenseNms, Grid, InstanceLevel };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);  // "dense-nms" | "grid" | "instance"

struct ExtractionConfig {
  Scheme scheme = Scheme::DenseNms;
  int patch_size = 64;
  int pad = 0;
  double nms_threshold = 0.25;
  double train_nms_threshold = 0.25;
  int grid_cell = 64;
  int instance_target = 64;

  void validate() const;
};

struct ScoredBox {
  SquareBox box;
  int score = 0;  // boundary pixels inside the box
};

struct PatchSpec {
  int patch_id = 0;
  std::int64_t instance_id = 0;
  SquareBox box;
  int pad = 0;
  int score = 0;

  int crop_side() const { return box.size + 2 * pad; }
};

struct Patch {
  PatchSpec spec;
  ImageRGB image_crop;
  BinaryMask mask_crop;
  std::optional<BinaryMask> gt_crop;
  // Part of the crop that lies inside the image, in crop coordinates.
  PixelRect in_image;
};

// One s×s box per boundary pixel, with that pixel at offset (s/2, s/2).
std::vector<SquareBox> candidate_boxes(const BinaryMask& mask, int patch_size);

// Attach the number of boundary pixels inside each box.
std::vector<ScoredBox> score_boxes(const BinaryMask& mask, std::span<const SquareBox> boxes);

// Greedy NMS. Boxes are visited by score descending, ties in input order; a box
// is kept when its IoU with every already-kept box is <= threshold.
std::vector<ScoredBox> nms_filter(std::span<const ScoredBox> boxes, double threshold);

// Tiles of a cell×cell grid anchored at the origin that hold both foreground
// and background pixels, row-major.
std::vector<SquareBox> grid_boxes(int width, int height, const BinaryMask& mask, int cell);

// Smallest even-sided square sharing the tight bbox center that contains it.
SquareBox instance_box(const Instance& instance);

// Runs the configured scheme end to end for one instance mask.
std::vector<ScoredBox> extract_boxes(const BinaryMask& mask, const ExtractionConfig& config,
                                     double nms_threshold);
inline std::vector<ScoredBox> extract_boxes(const BinaryMask& mask,
                                            const ExtractionConfig& config) {
  return extract_boxes(mask, config, config.nms_threshold);
}

// Crops image, instance mask, and (when gt_id is set) the ground-truth mask
// with that id over each padded box. Off-image pixels are zero.
std::vector<Patch> crop_patches(const Scene& scene, const Instance& instance,
                                std::span<const ScoredBox> boxes, int pad,
                                std::optional<std::int64_t> gt_id = std::nullopt);

}  // namespace bpr
