#include "bpr/extract.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace bpr {

double box_iou(const SquareBox& a, const SquareBox& b) {
  const std::int64_t ix = std::max(0, std::min(a.x + a.size, b.x + b.size) - std::max(a.x, b.x));
  const std::int64_t iy = std::max(0, std::min(a.y + a.size, b.y + b.size) - std::max(a.y, b.y));
  const std::int64_t inter = ix * iy;
  const std::int64_t uni =
      std::int64_t{a.size} * a.size + std::int64_t{b.size} * b.size - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::DenseNms: return "dense-nms";
    case Scheme::Grid: return "grid";
    case Scheme::InstanceLevel: return "instance";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "dense-nms") return Scheme::DenseNms;
  if (name == "grid") return Scheme::Grid;
  if (name == "instance") return Scheme::InstanceLevel;
  throw ValidationError("unknown extraction scheme '" + name + "'");
}

void ExtractionConfig::validate() const {
  if (patch_size < 2 || patch_size % 2 != 0) {
    throw ValidationError("patch size must be even and >= 2, got " + std::to_string(patch_size));
  }
  if (pad < 0) throw ValidationError("pad must be >= 0");
  for (double t : {nms_threshold, train_nms_threshold}) {
    if (!(t >= 0.0 && t < 1.0)) throw ValidationError("NMS threshold must lie in [0, 1)");
  }
  if (grid_cell < 2 || grid_cell % 2 != 0) {
    throw ValidationError("grid cell must be even and >= 2");
  }
  if (instance_target < 1) throw ValidationError("instance target must be >= 1");
}

std::vector<SquareBox> candidate_boxes(const BinaryMask& mask, int patch_size) {
  if (patch_size < 2 || patch_size % 2 != 0) {
    throw ValidationError("candidate_boxes: patch size must be even and >= 2");
  }
  const int half = patch_size / 2;
  std::vector<SquareBox> out;
  for (const auto& c : boundary_pixels(mask)) {
    out.push_back({c.x - half, c.y - half, patch_size});
  }
  return out;
}

std::vector<ScoredBox> score_boxes(const BinaryMask& mask, std::span<const SquareBox> boxes) {
  const int w = mask.width();
  const int h = mask.height();
  // Summed-area table of boundary pixels, (w+1)×(h+1).
  std::vector<int> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  BinaryMask boundary(w, h);
  for (const auto& c : boundary_pixels(mask)) boundary.set(c.x, c.y, true);
  for (int y = 0; y < h; ++y) {
    int row = 0;
    for (int x = 0; x < w; ++x) {
      row += boundary.at(x, y) ? 1 : 0;
      sat[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          sat[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
    }
  }
  auto sat_at = [&](int x, int y) { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };

  std::vector<ScoredBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    const int x0 = std::clamp(b.x, 0, w);
    const int y0 = std::clamp(b.y, 0, h);
    const int x1 = std::clamp(b.x + b.size, 0, w);
    const int y1 = std::clamp(b.y + b.size, 0, h);
    const int score = sat_at(x1, y1) - sat_at(x0, y1) - sat_at(x1, y0) + sat_at(x0, y0);
    out.push_back({b, score});
  }
  return out;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t bucket_key(std::int64_t bx, std::int64_t by) { return (bx << 32) ^ (by & 0xffffffff); }

}  // namespace

std::vector<ScoredBox> nms_filter(std::span<const ScoredBox> boxes, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw ValidationError("nms_filter: threshold must lie in [0, 1)");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });

  // Two boxes can only overlap when their origins differ by less than the
  // largest side in both axes, so kept boxes are bucketed on that pitch.
  int pitch = 1;
  for (const auto& b : boxes) pitch = std::max(pitch, b.box.size);
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets;

  std::vector<ScoredBox> kept;
  for (std::size_t idx : order) {
    const auto& cand = boxes[idx].box;
    const std::int64_t bx = floor_div(cand.x, pitch);
    const std::int64_t by = floor_div(cand.y, pitch);
    bool suppressed = false;
    for (std::int64_t dy = -1; dy <= 1 && !suppressed; ++dy) {
      for (std::int64_t dx = -1; dx <= 1 && !suppressed; ++dx) {
        auto it = buckets.find(bucket_key(bx + dx, by + dy));
        if (it == buckets.end()) continue;
        for (std::size_t k : it->second) {
          if (box_iou(kept[k].box, cand) > threshold) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    buckets[bucket_key(bx, by)].push_back(kept.size());
    kept.push_back(boxes[idx]);
  }
  return kept;
}

std::vector<SquareBox> grid_boxes(int width, int height, const BinaryMask& mask, int cell) {
  if (cell < 2 || cell % 2 != 0) throw ValidationError("grid_boxes: cell must be even and >= 2");
  if (mask.width() != width || mask.height() != height) {
    throw ValidationError("grid_boxes: mask dimensions differ from the image");
  }
  std::vector<SquareBox> out;
  for (int ty = 0; ty < height; ty += cell) {
    for (int tx = 0; tx < width; tx += cell) {
      const int x1 = std::min(tx + cell, width);
      const int y1 = std::min(ty + cell, height);
      std::int64_t fg = 0;
      for (int y = ty; y < y1; ++y) {
        for (int x = tx; x < x1; ++x) fg += mask.at(x, y) ? 1 : 0;
      }
      const std::int64_t total = std::int64_t{x1 - tx} * (y1 - ty);
      if (fg > 0 && fg < total) out.push_back({tx, ty, cell});
    }
  }
  return out;
}

SquareBox instance_box(const Instance& instance) {
  const auto bbox = tight_bbox(instance.mask);
  if (!bbox) {
    throw ValidationError("instance_box: instance " + std::to_string(instance.instance_id) +
                          " has an empty mask");
  }
  int side = std::max(bbox->width(), bbox->height());
  if (side % 2 != 0) ++side;
  // Odd slack goes to the top/left so the box leans toward the origin.
  const int slack_x = side - bbox->width();
  const int slack_y = side - bbox->height();
  return {bbox->x0 - (slack_x + 1) / 2, bbox->y0 - (slack_y + 1) / 2, side};
}

std::vector<ScoredBox> extract_boxes(const BinaryMask& mask, const ExtractionConfig& config,
                                     double nms_threshold) {
  switch (config.scheme) {
    case Scheme::DenseNms: {
      const auto candidates = candidate_boxes(mask, config.patch_size);
      const auto scored = score_boxes(mask, candidates);
      return nms_filter(scored, nms_threshold);
    }
    case Scheme::Grid: {
      const auto tiles = grid_boxes(mask.width(), mask.height(), mask, config.grid_cell);
      return score_boxes(mask, tiles);
    }
    case Scheme::InstanceLevel: {
      if (!mask.any()) return {};
      const SquareBox box = instance_box(Instance{0, 0, 1.0, mask});
      return score_boxes(mask, std::span<const SquareBox>(&box, 1));
    }
  }
  return {};
}

namespace {

const Instance* find_gt(const Scene& scene, std::int64_t gt_id) {
  if (!scene.ground_truth) return nullptr;
  for (const auto& g : *scene.ground_truth) {
    if (g.instance_id == gt_id) return &g;
  }
  return nullptr;
}

}  // namespace

std::vector<Patch> crop_patches(const Scene& scene, const Instance& instance,
                                std::span<const ScoredBox> boxes, int pad,
                                std::optional<std::int64_t> gt_id) {
  if (pad < 0) throw ValidationError("crop_patches: pad must be >= 0");
  const Instance* gt = nullptr;
  if (gt_id) {
    gt = find_gt(scene, *gt_id);
    if (gt == nullptr) {
      throw ValidationError("crop_patches: instance " + std::to_string(instance.instance_id) +
                            " has no matched ground truth (id " + std::to_string(*gt_id) + ")");
    }
  }
  const ImageRGB& image = scene.image;
  const int w = image.width();
  const int h = image.height();
  if (instance.mask.width() != w || instance.mask.height() != h) {
    throw ValidationError("crop_patches: instance mask does not match the image size");
  }

  std::vector<Patch> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const SquareBox& box = boxes[i].box;
    const int side = box.size + 2 * pad;
    const int ox = box.x - pad;
    const int oy = box.y - pad;

    Patch p;
    p.spec = {static_cast<int>(i), instance.instance_id, box, pad, boxes[i].score};
    p.image_crop = ImageRGB(side, side);
    p.mask_crop = BinaryMask(side, side);
    if (gt) p.gt_crop = BinaryMask(side, side);

    const int x0 = std::clamp(ox, 0, w);
    const int y0 = std::clamp(oy, 0, h);
    const int x1 = std::clamp(ox + side, 0, w);
    const int y1 = std::clamp(oy + side, 0, h);
    p.in_image = {x0 - ox, y0 - oy, std::max(x0, x1) - ox, std::max(y0, y1) - oy};
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const int cx = x - ox;
        const int cy = y - oy;
        for (int c = 0; c < 3; ++c) p.image_crop.at(cx, cy, c) = image.at(x, y, c);
        p.mask_crop.set(cx, cy, instance.mask.at(x, y));
        if (gt) p.gt_crop->set(cx, cy, gt->mask.at(x, y));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace bpr
