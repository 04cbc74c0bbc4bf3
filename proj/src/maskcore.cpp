#include "bpr/maskcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace bpr {

namespace {

void check_dims(int width, int height, const char* what) {
  if (width < 1 || height < 1) {
    throw ValidationError(std::string(what) + ": width and height must be >= 1, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
}

std::size_t area_of(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

ImageRGB::ImageRGB(int width, int height)
    : width_(width), height_(height), data_(area_of(width, height) * 3, 0) {
  check_dims(width, height, "ImageRGB");
}

ImageRGB::ImageRGB(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height, "ImageRGB");
  if (data_.size() != area_of(width, height) * 3) {
    throw ValidationError("ImageRGB: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(width) + "x" +
                          std::to_string(height) + "x3");
  }
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height), bits_(area_of(width, height), fill ? 1 : 0) {
  check_dims(width, height, "BinaryMask");
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height, "BinaryMask");
  if (bits_.size() != area_of(width, height)) {
    throw ValidationError("BinaryMask: bit count " + std::to_string(bits_.size()) +
                          " does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::int64_t BinaryMask::count() const {
  return std::accumulate(bits_.begin(), bits_.end(), std::int64_t{0});
}

bool BinaryMask::any() const {
  return std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

ProbMap::ProbMap(int width, int height, float fill)
    : width_(width), height_(height), values_(area_of(width, height), fill) {
  check_dims(width, height, "ProbMap");
}

ProbMap::ProbMap(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height, "ProbMap");
  if (values_.size() != area_of(width, height)) {
    throw ValidationError("ProbMap: value count does not match dimensions");
  }
  for (float v : values_) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ValidationError("ProbMap: value outside [0, 1]");
    }
  }
}

ProbMap to_prob_map(const BinaryMask& mask) {
  std::vector<float> values(mask.size());
  auto bits = mask.bits();
  std::transform(bits.begin(), bits.end(), values.begin(),
                 [](std::uint8_t b) { return b != 0 ? 1.0f : 0.0f; });
  return ProbMap(mask.width(), mask.height(), std::move(values));
}

void Scene::validate() const {
  if (image.empty()) throw ValidationError("scene has no image");
  auto check_list = [&](const std::vector<Instance>& list, const char* name) {
    std::set<std::int64_t> ids;
    for (const auto& inst : list) {
      if (inst.mask.width() != image.width() || inst.mask.height() != image.height()) {
        throw ValidationError(std::string(name) + " instance " + std::to_string(inst.instance_id) +
                              ": mask is " + std::to_string(inst.mask.width()) + "x" +
                              std::to_string(inst.mask.height()) + ", image is " +
                              std::to_string(image.width()) + "x" +
                              std::to_string(image.height()));
      }
      if (!ids.insert(inst.instance_id).second) {
        throw ValidationError(std::string(name) + ": duplicate instance id " +
                              std::to_string(inst.instance_id));
      }
      if (!(inst.score >= 0.0 && inst.score <= 1.0)) {
        throw ValidationError(std::string(name) + " instance " + std::to_string(inst.instance_id) +
                              ": score outside [0, 1]");
      }
    }
  };
  check_list(predictions, "prediction");
  if (ground_truth) check_list(*ground_truth, "ground truth");
}

std::vector<PixelCoord> boundary_pixels(const BinaryMask& mask) {
  std::vector<PixelCoord> out;
  const int w = mask.width();
  const int h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !mask.at(x - 1, y) ||
                        !mask.at(x + 1, y) || !mask.at(x, y - 1) || !mask.at(x, y + 1);
      if (edge) out.push_back({x, y});
    }
  }
  return out;
}

std::vector<std::int64_t> squared_distance_to_set(int width, int height,
                                                  std::span<const PixelCoord> seeds) {
  check_dims(width, height, "distance_to_set");
  if (seeds.empty()) throw ValidationError("distance_to_set: no seeds");

  constexpr std::int64_t kNone = -1;
  const std::size_t n = area_of(width, height);
  std::vector<std::int64_t> column(n, kNone);
  std::vector<std::uint8_t> is_seed(n, 0);
  for (const auto& s : seeds) {
    if (s.x < 0 || s.y < 0 || s.x >= width || s.y >= height) {
      throw ValidationError("distance_to_set: seed (" + std::to_string(s.x) + "," +
                            std::to_string(s.y) + ") out of bounds");
    }
    is_seed[static_cast<std::size_t>(s.y) * width + s.x] = 1;
  }

  // Pass 1: vertical distance to the nearest seed in the same column.
  for (int x = 0; x < width; ++x) {
    int last = -1;
    for (int y = 0; y < height; ++y) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (is_seed[i]) last = y;
      if (last >= 0) column[i] = y - last;
    }
    last = -1;
    for (int y = height - 1; y >= 0; --y) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (is_seed[i]) last = y;
      if (last >= 0) {
        const std::int64_t d = last - y;
        if (column[i] == kNone || d < column[i]) column[i] = d;
      }
    }
  }

  // Pass 2: lower envelope of parabolas (x - q)^2 + g(q)^2 along each row,
  // built only from columns that have a seed.
  std::vector<std::int64_t> out(n);
  std::vector<int> vertex(width);
  std::vector<double> boundary(width + 1);
  std::vector<std::int64_t> f(width);
  for (int y = 0; y < height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    int k = -1;
    for (int q = 0; q < width; ++q) {
      const std::int64_t g = column[row + q];
      if (g == kNone) continue;
      f[q] = g * g;
      double s = -std::numeric_limits<double>::infinity();
      while (k >= 0) {
        const int v = vertex[k];
        s = static_cast<double>((f[q] + std::int64_t{q} * q) - (f[v] + std::int64_t{v} * v)) /
            (2.0 * (q - v));
        if (s > boundary[k]) break;
        s = -std::numeric_limits<double>::infinity();
        --k;
      }
      ++k;
      vertex[k] = q;
      boundary[k] = s;
      boundary[k + 1] = std::numeric_limits<double>::infinity();
    }
    // Every row sees at least one parabola because seeds is non-empty.
    int j = 0;
    for (int x = 0; x < width; ++x) {
      while (boundary[j + 1] < x) ++j;
      const std::int64_t dx = x - vertex[j];
      out[row + x] = dx * dx + f[vertex[j]];
    }
  }
  return out;
}

DistanceField distance_to_set(int width, int height, std::span<const PixelCoord> seeds) {
  const auto sq = squared_distance_to_set(width, height, seeds);
  DistanceField field{width, height, std::vector<double>(sq.size())};
  std::transform(sq.begin(), sq.end(), field.values.begin(),
                 [](std::int64_t d) { return std::sqrt(static_cast<double>(d)); });
  return field;
}

std::optional<PixelRect> tight_bbox(const BinaryMask& mask) {
  PixelRect r{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x + 1);
      r.y1 = std::max(r.y1, y + 1);
    }
  }
  if (r.x1 < 0) return std::nullopt;
  return r;
}

namespace {

struct MaskSummary {
  std::optional<PixelRect> bbox;
  std::int64_t area = 0;
};

MaskSummary summarize(const BinaryMask& m) { return {tight_bbox(m), m.count()}; }

float iou_summarized(const BinaryMask& a, const MaskSummary& sa, const BinaryMask& b,
                     const MaskSummary& sb) {
  if (sa.area == 0 && sb.area == 0) return 1.0f;
  if (!sa.bbox || !sb.bbox) return 0.0f;
  const int x0 = std::max(sa.bbox->x0, sb.bbox->x0);
  const int y0 = std::max(sa.bbox->y0, sb.bbox->y0);
  const int x1 = std::min(sa.bbox->x1, sb.bbox->x1);
  const int y1 = std::min(sa.bbox->y1, sb.bbox->y1);
  std::int64_t inter = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) inter += (a.at(x, y) && b.at(x, y)) ? 1 : 0;
  }
  const std::int64_t uni = sa.area + sb.area - inter;
  return static_cast<float>(static_cast<double>(inter) / static_cast<double>(uni));
}

}  // namespace

float mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ValidationError("mask_iou: dimension mismatch " + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()));
  }
  return iou_summarized(a, summarize(a), b, summarize(b));
}

BinaryMask morph(const BinaryMask& mask, MorphOp op, int radius) {
  if (radius < 0) throw ValidationError("morph: radius must be >= 0");
  if (radius == 0) return mask;

  // Erosion is the complement of dilating the complement.
  const bool seed_value = op == MorphOp::Dilate;
  std::vector<PixelCoord> seeds;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) == seed_value) seeds.push_back({x, y});
    }
  }
  if (seeds.empty()) return mask;

  const auto sq = squared_distance_to_set(mask.width(), mask.height(), seeds);
  const std::int64_t r2 = std::int64_t{radius} * radius;
  BinaryMask out(mask.width(), mask.height());
  auto bits = out.bits();
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const bool within = sq[i] <= r2;
    bits[i] = (seed_value ? within : !within) ? 1 : 0;
  }
  return out;
}

std::vector<Assignment> greedy_iou_assignment(std::span<const Instance> preds,
                                              std::span<const Instance> gts, float min_iou) {
  std::vector<MaskSummary> ps(preds.size());
  std::vector<MaskSummary> gs(gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) ps[i] = summarize(preds[i].mask);
  for (std::size_t j = 0; j < gts.size(); ++j) gs[j] = summarize(gts[j].mask);

  std::vector<Assignment> candidates;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (preds[i].category_id != gts[j].category_id) continue;
      if (preds[i].mask.width() != gts[j].mask.width() ||
          preds[i].mask.height() != gts[j].mask.height()) {
        throw ValidationError("greedy_iou_assignment: mask dimension mismatch");
      }
      const float iou = iou_summarized(preds[i].mask, ps[i], gts[j].mask, gs[j]);
      if (iou > min_iou) candidates.push_back({i, j, iou});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Assignment& a, const Assignment& b) { return a.iou > b.iou; });

  std::vector<bool> pred_used(preds.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  std::vector<Assignment> out;
  for (const auto& c : candidates) {
    if (pred_used[c.pred_index] || gt_used[c.gt_index]) continue;
    pred_used[c.pred_index] = true;
    gt_used[c.gt_index] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const Assignment& a, const Assignment& b) { return a.pred_index < b.pred_index; });
  return out;
}

}  // namespace bpr
