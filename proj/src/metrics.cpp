#include "bpr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace bpr {

std::array<float, 10> coco_iou_thresholds() {
  std::array<float, 10> t{};
  for (int i = 0; i < 10; ++i) t[i] = 0.5f + 0.05f * static_cast<float>(i);
  return t;
}

namespace {

// Predictions of one scene and category sorted by score, with their IoUs
// against the category's ground truth.
struct CategoryBlock {
  std::vector<std::size_t> preds;  // scene prediction indices, score-descending
  std::vector<std::size_t> gts;    // scene GT indices
  std::vector<std::int64_t> pred_area;
  std::vector<std::int64_t> gt_area;
  std::vector<float> iou;  // preds.size() × gts.size()

  float iou_at(std::size_t p, std::size_t g) const { return iou[p * gts.size() + g]; }
};

std::vector<std::size_t> score_order(std::span<const Instance> preds,
                                     const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> order = subset;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });
  return order;
}

CategoryBlock build_block(std::span<const Instance> preds, std::span<const Instance> gts,
                          int category) {
  CategoryBlock b;
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].category_id == category) subset.push_back(i);
  }
  b.preds = score_order(preds, subset);
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (gts[j].category_id == category) b.gts.push_back(j);
  }
  for (std::size_t p : b.preds) b.pred_area.push_back(preds[p].mask.count());
  for (std::size_t g : b.gts) b.gt_area.push_back(gts[g].mask.count());
  b.iou.resize(b.preds.size() * b.gts.size());
  for (std::size_t p = 0; p < b.preds.size(); ++p) {
    for (std::size_t g = 0; g < b.gts.size(); ++g) {
      b.iou[p * b.gts.size() + g] = mask_iou(preds[b.preds[p]].mask, gts[b.gts[g]].mask);
    }
  }
  return b;
}

struct BlockMatch {
  std::vector<int> pred_to_gt;  // block-local GT index or -1
  std::vector<bool> pred_ignored;
  std::vector<bool> gt_ignored;
};

// COCO evaluateImg matching: non-ignored GT are preferred, a detection that
// lands on an ignored GT is itself ignored, and unmatched detections outside
// the area range are ignored.
BlockMatch match_block(const CategoryBlock& b, float thr, AreaRange range) {
  BlockMatch m;
  const std::size_t np = b.preds.size();
  const std::size_t ng = b.gts.size();
  m.pred_to_gt.assign(np, -1);
  m.pred_ignored.assign(np, false);
  m.gt_ignored.assign(ng, false);
  for (std::size_t g = 0; g < ng; ++g) {
    const double a = static_cast<double>(b.gt_area[g]);
    m.gt_ignored[g] = a < range.lo || a >= range.hi;
  }
  std::vector<std::size_t> gt_order(ng);
  std::iota(gt_order.begin(), gt_order.end(), std::size_t{0});
  std::stable_sort(gt_order.begin(), gt_order.end(), [&](std::size_t a, std::size_t c) {
    return !m.gt_ignored[a] && m.gt_ignored[c];
  });

  std::vector<bool> gt_taken(ng, false);
  for (std::size_t p = 0; p < np; ++p) {
    int best = -1;
    float best_iou = thr;
    for (std::size_t g : gt_order) {
      if (gt_taken[g]) continue;
      if (best >= 0 && !m.gt_ignored[best] && m.gt_ignored[g]) break;
      const float iou = b.iou_at(p, g);
      if (best < 0 ? iou < best_iou : iou <= best_iou) continue;
      best = static_cast<int>(g);
      best_iou = iou;
    }
    if (best >= 0) {
      gt_taken[best] = true;
      m.pred_to_gt[p] = best;
      m.pred_ignored[p] = m.gt_ignored[best];
    } else {
      const double a = static_cast<double>(b.pred_area[p]);
      m.pred_ignored[p] = a < range.lo || a >= range.hi;
    }
  }
  return m;
}

class CocoEvaluator {
 public:
  explicit CocoEvaluator(std::span<const Scene> scenes) : scenes_(scenes) {
    std::set<int> cats;
    for (const auto& s : scenes) {
      if (!s.ground_truth) throw ValidationError("evaluation needs ground truth in every scene");
      for (const auto& g : *s.ground_truth) cats.insert(g.category_id);
      for (const auto& p : s.predictions) cats.insert(p.category_id);
    }
    categories_.assign(cats.begin(), cats.end());
    blocks_.resize(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (int c : categories_) {
        blocks_[i][c] = build_block(scenes[i].predictions, *scenes[i].ground_truth, c);
      }
    }
  }

  const std::vector<int>& categories() const { return categories_; }

  const CategoryBlock& block(std::size_t scene, int category) const {
    return blocks_[scene].at(category);
  }

  double ap(int category, float thr, AreaRange range) const {
    struct Det {
      double score;
      bool tp;
    };
    std::vector<Det> dets;
    std::int64_t npos = 0;
    for (std::size_t i = 0; i < scenes_.size(); ++i) {
      auto it = blocks_[i].find(category);
      if (it == blocks_[i].end()) continue;
      const CategoryBlock& b = it->second;
      const BlockMatch m = match_block(b, thr, range);
      npos += std::count(m.gt_ignored.begin(), m.gt_ignored.end(), false);
      for (std::size_t p = 0; p < b.preds.size(); ++p) {
        if (m.pred_ignored[p]) continue;
        dets.push_back({scenes_[i].predictions[b.preds[p]].score, m.pred_to_gt[p] >= 0});
      }
    }
    if (npos == 0) return -1.0;
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Det& a, const Det& b) { return a.score > b.score; });

    const std::size_t nd = dets.size();
    std::vector<double> recall(nd);
    std::vector<double> precision(nd);
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      (dets[d].tp ? tp : fp) += 1.0;
      recall[d] = tp / static_cast<double>(npos);
      precision[d] = tp / (tp + fp);
    }
    for (std::size_t d = nd; d-- > 1;) precision[d - 1] = std::max(precision[d - 1], precision[d]);

    double total = 0.0;
    for (int r = 0; r <= 100; ++r) {
      const double level = r / 100.0;
      // First detection whose recall reaches the level (searchsorted, left).
      auto it = std::lower_bound(recall.begin(), recall.end(), level - 1e-12);
      if (it != recall.end()) total += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    return total / 101.0;
  }

 private:
  std::span<const Scene> scenes_;
  std::vector<int> categories_;
  std::vector<std::map<int, CategoryBlock>> blocks_;
};

double mean_valid(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (v < 0.0) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? -1.0 : sum / n;
}

}  // namespace

MatchResult match_instances(std::span<const Instance> preds, std::span<const Instance> gts,
                            float iou_thr) {
  if (!(iou_thr > 0.0f && iou_thr <= 1.0f)) {
    throw ValidationError("match_instances: IoU threshold must lie in (0, 1]");
  }
  std::vector<std::size_t> all(preds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto order = score_order(preds, all);

  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<bool> pred_matched(preds.size(), false);
  MatchResult r;
  for (std::size_t p : order) {
    int best = -1;
    float best_iou = iou_thr;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g] || gts[g].category_id != preds[p].category_id) continue;
      const float iou = mask_iou(preds[p].mask, gts[g].mask);
      if (best < 0 ? iou < best_iou : iou <= best_iou) continue;
      best = static_cast<int>(g);
      best_iou = iou;
    }
    if (best >= 0) {
      gt_taken[best] = true;
      pred_matched[p] = true;
      r.pairs.push_back({p, static_cast<std::size_t>(best), best_iou});
    }
  }
  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (!pred_matched[p]) r.unmatched_preds.push_back(p);
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_taken[g]) r.unmatched_gts.push_back(g);
  }
  return r;
}

double average_precision(std::span<const Scene> scenes, int category, float iou_thr,
                         AreaRange range) {
  if (scenes.empty()) throw ValidationError("average_precision: no scenes");
  if (!(iou_thr > 0.0f && iou_thr <= 1.0f)) {
    throw ValidationError("average_precision: IoU threshold must lie in (0, 1]");
  }
  const CocoEvaluator ev(scenes);
  const auto& cats = ev.categories();
  if (std::find(cats.begin(), cats.end(), category) == cats.end()) return -1.0;
  return ev.ap(category, iou_thr, range);
}

double boundary_fscore(const BinaryMask& pred, const BinaryMask& gt, double tol) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw ValidationError("boundary_fscore: dimension mismatch");
  }
  const auto bp = boundary_pixels(pred);
  const auto bg = boundary_pixels(gt);
  if (bp.empty() || bg.empty()) throw ValidationError("boundary_fscore: no boundary");

  const auto to_gt = squared_distance_to_set(gt.width(), gt.height(), bg);
  const auto to_pred = squared_distance_to_set(pred.width(), pred.height(), bp);
  const double tol_sq = tol * tol;
  auto within = [&](const std::vector<std::int64_t>& field, const PixelCoord& c) {
    return static_cast<double>(field[static_cast<std::size_t>(c.y) * pred.width() + c.x]) <= tol_sq;
  };
  const auto hits_p = std::count_if(bp.begin(), bp.end(), [&](auto c) { return within(to_gt, c); });
  const auto hits_r = std::count_if(bg.begin(), bg.end(), [&](auto c) { return within(to_pred, c); });
  const double precision = static_cast<double>(hits_p) / static_cast<double>(bp.size());
  const double recall = static_cast<double>(hits_r) / static_cast<double>(bg.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

double af_with(const CocoEvaluator& ev, std::span<const Scene> scenes) {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> cache;
  double sum = 0.0;
  std::size_t samples = 0;
  for (float t : coco_iou_thresholds()) {
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      for (int c : ev.categories()) {
        const CategoryBlock& b = ev.block(s, c);
        const BlockMatch m = match_block(b, t, AreaRange::all());
        for (std::size_t p = 0; p < b.preds.size(); ++p) {
          if (m.pred_to_gt[p] < 0) continue;
          const std::size_t pi = b.preds[p];
          const std::size_t gi = b.gts[static_cast<std::size_t>(m.pred_to_gt[p])];
          auto key = std::make_tuple(s, pi, gi);
          auto it = cache.find(key);
          if (it == cache.end()) {
            it = cache.emplace(key, boundary_fscore(scenes[s].predictions[pi].mask,
                                                    (*scenes[s].ground_truth)[gi].mask, 1.0))
                     .first;
          }
          sum += it->second;
          ++samples;
        }
      }
    }
  }
  return samples == 0 ? 0.0 : sum / static_cast<double>(samples);
}

}  // namespace

double af_metric(std::span<const Scene> scenes) {
  const CocoEvaluator ev(scenes);
  return af_with(ev, scenes);
}

std::string DistanceBand::label() const {
  if (is_infinite()) return "inf";
  std::ostringstream os;
  os << *d << "px";
  return os.str();
}

DistanceBand parse_band(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "∞") return DistanceBand::infinite();
  std::string body = text;
  if (body.size() > 2 && body.substr(body.size() - 2) == "px") body.resize(body.size() - 2);
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(body, &used);
  } catch (const std::exception&) {
    throw ValidationError("bad distance band '" + text + "'");
  }
  if (used != body.size() || !(d >= 1.0) || !std::isfinite(d)) {
    throw ValidationError("distance band must be a number >= 1 or 'inf', got '" + text + "'");
  }
  return DistanceBand::pixels(d);
}

BinaryMask gt_band_replace(const BinaryMask& pred, const BinaryMask& matched_gt, DistanceBand band) {
  if (pred.width() != matched_gt.width() || pred.height() != matched_gt.height()) {
    throw ValidationError("gt_band_replace: dimension mismatch");
  }
  const auto boundary = boundary_pixels(pred);
  if (boundary.empty()) throw ValidationError("gt_band_replace: empty prediction");
  if (band.is_infinite()) return matched_gt;

  const auto sq = squared_distance_to_set(pred.width(), pred.height(), boundary);
  const double limit = *band.d * *band.d;
  BinaryMask out = pred;
  auto bits = out.bits();
  auto gt_bits = matched_gt.bits();
  for (std::size_t i = 0; i < sq.size(); ++i) {
    if (static_cast<double>(sq[i]) <= limit) bits[i] = gt_bits[i];
  }
  return out;
}

std::vector<InstanceIou> iou_improvement_report(std::span<const Scene> before,
                                                std::span<const Scene> after) {
  if (before.size() != after.size()) {
    throw ValidationError("iou_improvement_report: scene counts differ (" +
                          std::to_string(before.size()) + " vs " + std::to_string(after.size()) +
                          ")");
  }
  std::vector<InstanceIou> rows;
  for (std::size_t s = 0; s < before.size(); ++s) {
    const Scene& b = before[s];
    const Scene& a = after[s];
    if (!b.ground_truth) throw ValidationError("iou_improvement_report: scene without ground truth");
    std::map<std::int64_t, const Instance*> after_by_id;
    for (const auto& p : a.predictions) after_by_id[p.instance_id] = &p;
    if (after_by_id.size() != b.predictions.size()) {
      throw ValidationError("iou_improvement_report: scene " + std::to_string(s) +
                            " has different instance ids before and after");
    }
    const auto& gts = *b.ground_truth;
    const auto assignment = greedy_iou_assignment(b.predictions, gts, 0.5f);
    std::map<std::size_t, const Assignment*> by_pred;
    for (const auto& asg : assignment) by_pred[asg.pred_index] = &asg;

    for (std::size_t p = 0; p < b.predictions.size(); ++p) {
      const Instance& bp = b.predictions[p];
      auto it = after_by_id.find(bp.instance_id);
      if (it == after_by_id.end()) {
        throw ValidationError("iou_improvement_report: instance " + std::to_string(bp.instance_id) +
                              " missing after refinement in scene " + std::to_string(s));
      }
      InstanceIou row{s, bp.instance_id, false, 0.0, 0.0};
      if (auto m = by_pred.find(p); m != by_pred.end()) {
        const BinaryMask& gt = gts[m->second->gt_index].mask;
        row.matched = true;
        row.iou_before = mask_iou(bp.mask, gt);
        row.iou_after = mask_iou(it->second->mask, gt);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

EvalReport evaluate(std::span<const Scene> after, std::span<const Scene> before) {
  if (after.empty()) throw ValidationError("evaluate: no scenes");
  const CocoEvaluator ev(after);
  const auto thresholds = coco_iou_thresholds();
  EvalReport r;
  auto mean_over = [&](AreaRange range, std::span<const float> ts) {
    std::vector<double> v;
    for (float t : ts) {
      for (int c : ev.categories()) v.push_back(ev.ap(c, t, range));
    }
    return mean_valid(v);
  };
  r.ap = mean_over(AreaRange::all(), thresholds);
  r.ap50 = mean_over(AreaRange::all(), std::span<const float>(&thresholds[0], 1));
  r.ap75 = mean_over(AreaRange::all(), std::span<const float>(&thresholds[5], 1));
  r.ap_s = mean_over(AreaRange::small(), thresholds);
  r.ap_m = mean_over(AreaRange::medium(), thresholds);
  r.ap_l = mean_over(AreaRange::large(), thresholds);
  r.af = af_with(ev, after);

  r.per_instance = iou_improvement_report(before, after);
  double sum = 0.0;
  for (const auto& row : r.per_instance) {
    if (!row.matched) continue;
    sum += row.iou_after;
    ++r.matched_count;
  }
  r.mean_matched_iou = r.matched_count == 0 ? 0.0 : sum / static_cast<double>(r.matched_count);
  return r;
}

EvalReport evaluate(std::span<const Scene> scenes) { return evaluate(scenes, scenes); }

std::vector<Scene> apply_gt_band(std::span<const Scene> scenes, DistanceBand band) {
  std::vector<Scene> out(scenes.begin(), scenes.end());
  for (auto& scene : out) {
    if (!scene.ground_truth) throw ValidationError("upper bound needs ground truth");
    const auto& gts = *scene.ground_truth;
    for (const auto& a : greedy_iou_assignment(scene.predictions, gts, 0.5f)) {
      auto& pred = scene.predictions[a.pred_index];
      pred.mask = gt_band_replace(pred.mask, gts[a.gt_index].mask, band);
    }
  }
  return out;
}

std::vector<UpperBoundRow> upper_bound_report(std::span<const Scene> scenes,
                                              std::span<const DistanceBand> bands) {
  std::vector<UpperBoundRow> rows;
  rows.push_back({"-", evaluate(scenes)});
  for (const auto& band : bands) {
    const auto replaced = apply_gt_band(scenes, band);
    rows.push_back({band.label(), evaluate(replaced, scenes)});
  }
  return rows;
}

nlohmann::json to_json(const EvalReport& r, bool with_instances) {
  nlohmann::json j = {{"ap", r.ap},     {"ap50", r.ap50}, {"ap75", r.ap75},
                      {"ap_s", r.ap_s}, {"ap_m", r.ap_m}, {"ap_l", r.ap_l},
                      {"af", r.af},     {"mean_matched_iou", r.mean_matched_iou},
                      {"matched_count", r.matched_count}};
  if (with_instances) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.per_instance) {
      rows.push_back({{"scene", row.scene_index},
                      {"instance_id", row.instance_id},
                      {"matched", row.matched},
                      {"iou_before", row.iou_before},
                      {"iou_after", row.iou_after}});
    }
    j["per_instance"] = std::move(rows);
  }
  return j;
}

nlohmann::json to_json(const std::vector<UpperBoundRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : rows) {
    auto e = to_json(row.report, false);
    e["label"] = row.label;
    j.push_back(std::move(e));
  }
  return j;
}

std::string format_table(const std::vector<UpperBoundRow>& rows, const std::string& first_column) {
  const std::vector<std::string> headers = {first_column, "AP",  "AP50", "AP75", "APs",
                                            "APm",        "APl", "AF",   "mIoU"};
  auto pct = [](double v) {
    if (v < 0.0) return std::string("-");
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * v;
    return os.str();
  };
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) {
    const auto& r = row.report;
    cells.push_back({row.label, pct(r.ap), pct(r.ap50), pct(r.ap75), pct(r.ap_s), pct(r.ap_m),
                     pct(r.ap_l), pct(r.af), pct(r.mean_matched_iou)});
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << line[c];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << line[c];
      }
    }
    os << '\n';
  };
  emit(headers);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  os << std::string(total - 2, '-') << '\n';
  for (const auto& line : cells) emit(line);
  return os.str();
}

}  // namespace bpr
