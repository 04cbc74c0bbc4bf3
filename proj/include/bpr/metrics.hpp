#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpr/maskcore.hpp"

namespace bpr {

// COCO IoU thresholds 0.50, 0.55, ..., 0.95.
std::array<float, 10> coco_iou_thresholds();

struct MatchPair {
  std::size_t pred_index = 0;
  std::size_t gt_index = 0;
  float iou = 0.0f;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

// COCO greedy matching: predictions by descending score (ties keep input
// order) each claim the unclaimed same-category GT of highest IoU, provided
// that IoU >= iou_thr. Equal IoUs go to the lower GT index.
MatchResult match_instances(std::span<const Instance> preds, std::span<const Instance> gts,
                            float iou_thr);

// Object area in pixels, half-open [lo, hi).
struct AreaRange {
  double lo = 0.0;
  double hi = 1e10;

  static AreaRange all() { return {}; }
  static AreaRange small() { return {0.0, 32.0 * 32.0}; }
  static AreaRange medium() { return {32.0 * 32.0, 96.0 * 96.0}; }
  static AreaRange large() { return {96.0 * 96.0, 1e10}; }
};

// 101-point interpolated AP for one category, pooled over scenes. Returns -1
// when the category has no ground truth in the range.
double average_precision(std::span<const Scene> scenes, int category, float iou_thr,
                         AreaRange range = AreaRange::all());

// Boundary F-measure with a Euclidean pixel tolerance.
double boundary_fscore(const BinaryMask& pred, const BinaryMask& gt, double tol = 1.0);

// Mean boundary F-score over every (IoU threshold, true-positive pair) sample.
double af_metric(std::span<const Scene> scenes);

struct DistanceBand {
  std::optional<double> d;  // nullopt = unbounded

  static DistanceBand pixels(double d) { return {d}; }
  static DistanceBand infinite() { return {std::nullopt}; }
  bool is_infinite() const { return !d.has_value(); }
  std::string label() const;
};

DistanceBand parse_band(const std::string& text);  // "1", "2.5", "inf"

// Pixels within `band` of the prediction's boundary take the GT label.
BinaryMask gt_band_replace(const BinaryMask& pred, const BinaryMask& matched_gt, DistanceBand band);

struct InstanceIou {
  std::size_t scene_index = 0;
  std::int64_t instance_id = 0;
  bool matched = false;
  double iou_before = 0.0;
  double iou_after = 0.0;
};

struct EvalReport {
  double ap = -1.0;
  double ap50 = -1.0;
  double ap75 = -1.0;
  double ap_s = -1.0;
  double ap_m = -1.0;
  double ap_l = -1.0;
  double af = 0.0;
  double mean_matched_iou = 0.0;
  std::size_t matched_count = 0;
  std::vector<InstanceIou> per_instance;
};

// Matches every prediction in `before` to GT (greedy, IoU > 0.5) and reports
// that pair's IoU before and after. Unmatched predictions carry IoU 0.
std::vector<InstanceIou> iou_improvement_report(std::span<const Scene> before,
                                                std::span<const Scene> after);

EvalReport evaluate(std::span<const Scene> scenes);
// Same, with per-instance IoUs measured against `before`.
EvalReport evaluate(std::span<const Scene> after, std::span<const Scene> before);

struct UpperBoundRow {
  std::string label;  // "-" for the baseline
  EvalReport report;
};

// Baseline row followed by one row per band.
std::vector<UpperBoundRow> upper_bound_report(std::span<const Scene> scenes,
                                              std::span<const DistanceBand> bands);

// Replaces each matched prediction's mask band with GT; the rest is untouched.
std::vector<Scene> apply_gt_band(std::span<const Scene> scenes, DistanceBand band);

nlohmann::json to_json(const EvalReport& report, bool with_instances = true);
nlohmann::json to_json(const std::vector<UpperBoundRow>& rows);

// Aligned text table, scores in percent.
std::string format_table(const std::vector<UpperBoundRow>& rows, const std::string& first_column);

}  // namespace bpr
