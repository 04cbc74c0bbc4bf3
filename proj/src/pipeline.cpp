#include "bpr/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "bpr/assemble.hpp"

namespace bpr {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  extraction.validate();
  options.color.validate();
  if (input_size < 1) throw ValidationError("input size must be >= 1");
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
}

int PipelineConfig::export_size() const {
  return extraction.scheme == Scheme::InstanceLevel ? extraction.instance_target : input_size;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ValidationError(std::string(where) + ": unknown key '" + k + "'");
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  static const std::set<std::string> known = {
      "patch_size", "pad",        "nms_threshold", "train_nms_threshold", "scheme",
      "grid_cell",  "instance_target", "refiner",  "input_size",          "jobs",
      "timing",     "exchange_dir",    "color_model", "synth"};
  try {
    reject_unknown(j, known, "config");
    take(j, "patch_size", c.extraction.patch_size);
    take(j, "pad", c.extraction.pad);
    take(j, "nms_threshold", c.extraction.nms_threshold);
    take(j, "train_nms_threshold", c.extraction.train_nms_threshold);
    take(j, "grid_cell", c.extraction.grid_cell);
    take(j, "instance_target", c.extraction.instance_target);
    if (j.contains("scheme")) c.extraction.scheme = parse_scheme(j.at("scheme").get<std::string>());
    if (j.contains("refiner")) c.refiner = parse_refiner(j.at("refiner").get<std::string>());
    take(j, "input_size", c.input_size);
    take(j, "jobs", c.jobs);
    take(j, "timing", c.timing);
    if (j.contains("exchange_dir")) c.options.exchange_dir = j.at("exchange_dir").get<std::string>();
    if (j.contains("color_model")) {
      const auto& cm = j.at("color_model");
      reject_unknown(cm, {"band_margin", "covariance_floor", "min_seeds"}, "color_model");
      take(cm, "band_margin", c.options.color.band_margin);
      take(cm, "covariance_floor", c.options.color.covariance_floor);
      take(cm, "min_seeds", c.options.color.min_seeds);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

SynthConfig synth_config_from_json(const json& j, SynthConfig c) {
  try {
    reject_unknown(j,
                   {"seed", "image_size", "instances_per_image", "categories", "min_radius",
                    "max_radius", "min_gap", "background", "foreground", "color_jitter",
                    "noise_sigma", "head_resolution", "erode_dilate_radius", "jitter"},
                   "synth");
    take(j, "seed", c.seed);
    take(j, "image_size", c.image_size);
    take(j, "instances_per_image", c.instances_per_image);
    take(j, "categories", c.categories);
    take(j, "min_radius", c.min_radius);
    take(j, "max_radius", c.max_radius);
    take(j, "min_gap", c.min_gap);
    take(j, "background", c.background);
    take(j, "foreground", c.foreground);
    take(j, "color_jitter", c.color_jitter);
    take(j, "noise_sigma", c.noise_sigma);
    take(j, "head_resolution", c.head_resolution);
    take(j, "erode_dilate_radius", c.erode_dilate_radius);
    take(j, "jitter", c.jitter);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  return c;
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// prediction index → matched GT id, greedy with IoU > 0.5.
std::map<std::size_t, std::int64_t> gt_matches(const Scene& scene) {
  std::map<std::size_t, std::int64_t> out;
  if (!scene.ground_truth) return out;
  for (const auto& a : greedy_iou_assignment(scene.predictions, *scene.ground_truth, 0.5f)) {
    out[a.pred_index] = (*scene.ground_truth)[a.gt_index].instance_id;
  }
  return out;
}

RefineResult refine_external(const Scene& scene, const PipelineConfig& config,
                             const fs::path& dir) {
  RefineResult result;
  result.scene = scene;

  auto t0 = Clock::now();
  const Manifest manifest = read_manifest(dir);
  result.timing.extraction_ms = ms_since(t0);

  t0 = Clock::now();
  const auto refined = import_refined(manifest, dir);
  result.timing.refinement_ms = ms_since(t0);
  result.patch_count = refined.size();

  t0 = Clock::now();
  std::map<std::int64_t, std::vector<RefinedPatch>> by_instance;
  for (const auto& r : refined) by_instance[r.spec.instance_id].push_back(r);
  std::map<std::int64_t, std::size_t> index_of;
  for (std::size_t i = 0; i < scene.predictions.size(); ++i) {
    index_of[scene.predictions[i].instance_id] = i;
  }
  std::vector<std::pair<std::size_t, const std::vector<RefinedPatch>*>> work;
  for (const auto& [id, patches] : by_instance) {
    auto it = index_of.find(id);
    if (it == index_of.end()) {
      throw ValidationError(dir.string() + ": manifest references unknown instance " +
                            std::to_string(id));
    }
    work.emplace_back(it->second, &patches);
  }
  parallel_for(work.size(), config.jobs, [&](std::size_t k) {
    auto& inst = result.scene.predictions[work[k].first];
    inst.mask = reassemble(inst.mask, *work[k].second);
  });
  result.timing.reassembling_ms = ms_since(t0);
  return result;
}

}  // namespace

std::vector<Patch> scene_patches(const Scene& scene, const PipelineConfig& config, bool training) {
  config.validate();
  const auto matches = gt_matches(scene);
  if (training && !scene.ground_truth) throw ValidationError("training export needs ground truth");
  const double thr = training ? config.extraction.train_nms_threshold : config.extraction.nms_threshold;

  std::vector<std::vector<Patch>> per(scene.predictions.size());
  parallel_for(scene.predictions.size(), config.jobs, [&](std::size_t i) {
    const auto m = matches.find(i);
    if (training && m == matches.end()) return;
    const Instance& inst = scene.predictions[i];
    const auto boxes = extract_boxes(inst.mask, config.extraction, thr);
    std::optional<std::int64_t> gt;
    if (m != matches.end()) gt = m->second;
    per[i] = crop_patches(scene, inst, boxes, config.extraction.pad, gt);
  });
  std::vector<Patch> out;
  for (auto& v : per) {
    for (auto& p : v) out.push_back(std::move(p));
  }
  return out;
}

Manifest export_scene(const Scene& scene, const PipelineConfig& config, const fs::path& dir,
                      bool training) {
  const auto patches = scene_patches(scene, config, training);
  return export_patches(patches, config.extraction.patch_size, config.extraction.pad,
                        config.export_size(), dir);
}

RefineResult refine_scene(const Scene& scene, const PipelineConfig& config,
                          const fs::path& exchange_dir) {
  config.validate();
  if (config.refiner == RefinerKind::External) {
    const fs::path dir = exchange_dir.empty() ? config.options.exchange_dir : exchange_dir;
    if (dir.empty()) throw ValidationError("external refiner needs an exchange directory");
    return refine_external(scene, config, dir);
  }

  RefineResult result;
  result.scene = scene;
  const std::size_t n = scene.predictions.size();
  const bool oracle = config.refiner == RefinerKind::Oracle;
  if (oracle && !scene.ground_truth) throw ValidationError("oracle refiner needs ground truth");
  const auto matches = oracle ? gt_matches(scene) : std::map<std::size_t, std::int64_t>{};

  auto t0 = Clock::now();
  std::vector<std::vector<Patch>> patches(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    std::optional<std::int64_t> gt;
    if (oracle) {
      auto m = matches.find(i);
      if (m == matches.end()) return;  // nothing to copy from
      gt = m->second;
    }
    const Instance& inst = scene.predictions[i];
    const auto boxes = extract_boxes(inst.mask, config.extraction);
    patches[i] = crop_patches(scene, inst, boxes, config.extraction.pad, gt);
  });
  result.timing.extraction_ms = ms_since(t0);
  for (const auto& v : patches) result.patch_count += v.size();

  t0 = Clock::now();
  std::vector<std::vector<RefinedPatch>> refined(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    refined[i].reserve(patches[i].size());
    for (const auto& p : patches[i]) {
      refined[i].push_back(refine_patch(config.refiner, p, config.options));
    }
  });
  result.timing.refinement_ms = ms_since(t0);

  t0 = Clock::now();
  parallel_for(n, config.jobs, [&](std::size_t i) {
    if (refined[i].empty()) return;
    auto& inst = result.scene.predictions[i];
    inst.mask = reassemble(inst.mask, refined[i]);
  });
  result.timing.reassembling_ms = ms_since(t0);
  return result;
}

namespace {

std::array<double, 3> stage_totals(const std::vector<ImageTiming>& images) {
  std::array<double, 3> t{};
  for (const auto& im : images) {
    t[0] += im.timing.extraction_ms;
    t[1] += im.timing.refinement_ms;
    t[2] += im.timing.reassembling_ms;
  }
  return t;
}

double mean_patches(const std::vector<ImageTiming>& images) {
  if (images.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& im : images) sum += static_cast<double>(im.patches);
  return sum / static_cast<double>(images.size());
}

}  // namespace

std::string format_timing_report(const std::vector<ImageTiming>& images) {
  const auto totals = stage_totals(images);
  const double n = images.empty() ? 1.0 : static_cast<double>(images.size());
  std::ostringstream os;
  os << std::left << std::setw(18) << "stage" << std::right << std::setw(12) << "total_ms"
     << std::setw(14) << "per_image_ms" << '\n';
  os << std::fixed << std::setprecision(2);
  for (int s = 0; s < 3; ++s) {
    os << std::left << std::setw(18) << kStageNames[s] << std::right << std::setw(12) << totals[s]
       << std::setw(14) << totals[s] / n << '\n';
  }
  os << '\n' << std::left << std::setw(18) << "image" << std::right << std::setw(12) << "patches"
     << '\n';
  for (const auto& im : images) {
    os << std::left << std::setw(18) << (im.scene.empty() ? "." : im.scene) << std::right
       << std::setw(12) << im.patches << '\n';
  }
  os << std::left << std::setw(18) << "mean" << std::right << std::setw(12) << mean_patches(images)
     << '\n';
  return os.str();
}

nlohmann::json timing_report_json(const std::vector<ImageTiming>& images) {
  const auto totals = stage_totals(images);
  const double n = images.empty() ? 1.0 : static_cast<double>(images.size());
  json stages = json::array();
  for (int s = 0; s < 3; ++s) {
    stages.push_back({{"stage", kStageNames[s]}, {"total_ms", totals[s]}, {"per_image_ms", totals[s] / n}});
  }
  json per_image = json::array();
  for (const auto& im : images) per_image.push_back({{"scene", im.scene}, {"patches", im.patches}});
  return {{"stages", stages}, {"images", per_image}, {"mean_patches_per_image", mean_patches(images)}};
}

}  // namespace bpr
