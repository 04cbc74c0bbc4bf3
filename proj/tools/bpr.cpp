// bpr: boundary patch refinement command-line driver.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bpr/metrics.hpp"
#include "bpr/pipeline.hpp"
#include "bpr/refine.hpp"
#include "bpr/scene_io.hpp"
#include "bpr/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void init_logging() {
  auto logger = spdlog::stderr_color_mt("bpr");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("BPR_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

// Flags shared by every subcommand. Values only override the config file when
// the flag was given on the command line.
struct CommonFlags {
  std::string config_path;
  int patch_size = 0;
  int pad = 0;
  double nms_thr = 0.0;
  std::string scheme;
  std::string refiner;
  int input_size = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool timing = false;
  std::string out;

  CLI::Option* patch_size_opt = nullptr;
  CLI::Option* pad_opt = nullptr;
  CLI::Option* nms_opt = nullptr;
  CLI::Option* scheme_opt = nullptr;
  CLI::Option* refiner_opt = nullptr;
  CLI::Option* input_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file; flags take precedence");
    patch_size_opt = app.add_option("--patch-size", patch_size, "Patch side s (even)");
    pad_opt = app.add_option("--pad", pad, "Context padding p around each patch");
    nms_opt = app.add_option("--nms-thr", nms_thr, "NMS eliminating threshold in [0,1)");
    scheme_opt = app.add_option("--scheme", scheme, "dense-nms | grid | instance")
                     ->check(CLI::IsMember({"dense-nms", "grid", "instance"}));
    refiner_opt = app.add_option("--refiner", refiner, "identity | oracle | colormodel | external")
                      ->check(CLI::IsMember({"identity", "oracle", "colormodel", "external"}));
    input_opt = app.add_option("--input-size", input_size, "Side of exported refiner inputs");
    seed_opt = app.add_option("--seed", seed, "Synthetic corpus seed");
    jobs_opt = app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--timing", timing, "Report per-stage wall-clock time and patch counts");
    app.add_option("--out", out, "Output directory");
  }

  json config_json() const {
    if (config_path.empty()) return json::object();
    return bpr::load_json_file(config_path);
  }

  bpr::PipelineConfig pipeline() const {
    bpr::PipelineConfig c = bpr::pipeline_config_from_json(config_json());
    if (patch_size_opt->count()) c.extraction.patch_size = patch_size;
    if (pad_opt->count()) c.extraction.pad = pad;
    if (nms_opt->count()) c.extraction.nms_threshold = nms_thr;
    if (scheme_opt->count()) c.extraction.scheme = bpr::parse_scheme(scheme);
    if (refiner_opt->count()) c.refiner = bpr::parse_refiner(refiner);
    if (input_opt->count()) c.input_size = input_size;
    if (jobs_opt->count()) c.jobs = jobs;
    if (timing) c.timing = true;
    c.validate();
    return c;
  }

  bpr::SynthConfig synth() const {
    const json j = config_json();
    bpr::SynthConfig c = j.contains("synth") ? bpr::synth_config_from_json(j.at("synth")) : bpr::SynthConfig{};
    if (seed_opt->count()) c.seed = seed;
    return c;
  }

  fs::path require_out() const {
    if (out.empty()) throw bpr::ValidationError("--out is required");
    return out;
  }
};

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw bpr::IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::vector<bpr::Scene> scenes_of(const std::vector<bpr::NamedScene>& corpus) {
  std::vector<bpr::Scene> out;
  for (const auto& s : corpus) out.push_back(s.scene);
  return out;
}

fs::path scene_subdir(const fs::path& root, const bpr::NamedScene& s) {
  return s.name.empty() ? root : root / s.name;
}

// ---------------------------------------------------------------------------

struct RefineRun {
  std::vector<bpr::NamedScene> refined;
  std::vector<bpr::ImageTiming> timing;
};

RefineRun run_refine(const std::vector<bpr::NamedScene>& corpus, const bpr::PipelineConfig& cfg,
                     const fs::path& exchange_root) {
  RefineRun run;
  for (const auto& s : corpus) {
    const fs::path exchange = exchange_root.empty() ? fs::path() : scene_subdir(exchange_root, s);
    auto r = bpr::refine_scene(s.scene, cfg, exchange);
    spdlog::info("{}: {} patches", s.name.empty() ? "." : s.name, r.patch_count);
    run.timing.push_back({s.name, r.patch_count, r.timing});
    run.refined.push_back({s.name, std::move(r.scene)});
  }
  return run;
}

int cmd_gen(const CommonFlags& flags, int count) {
  const auto cfg = flags.synth();
  const fs::path out = flags.require_out();
  for (int i = 0; i < count; ++i) {
    std::ostringstream name;
    name << "scene_" << std::setw(4) << std::setfill('0') << i;
    bpr::save_scene(bpr::generate_scene(cfg, static_cast<std::uint64_t>(i)), out / name.str());
  }
  std::cout << "wrote " << count << " scenes to " << out.string() << '\n';
  return 0;
}

int cmd_refine(const CommonFlags& flags, const fs::path& input, const fs::path& exchange) {
  auto cfg = flags.pipeline();
  const fs::path out = flags.require_out();
  if (cfg.refiner == bpr::RefinerKind::External && exchange.empty() && cfg.options.exchange_dir.empty()) {
    throw bpr::ValidationError("--refiner external needs --exchange");
  }
  const fs::path exchange_root = exchange.empty() ? cfg.options.exchange_dir : exchange;
  const auto corpus = bpr::load_corpus(input);
  const auto run = run_refine(corpus, cfg, exchange_root);
  bpr::save_corpus(run.refined, out);
  if (cfg.timing) {
    std::cout << bpr::format_timing_report(run.timing);
    write_json_file(out / "timing.json", bpr::timing_report_json(run.timing));
  }
  return 0;
}

int cmd_eval(const fs::path& pred, const fs::path& gt, const fs::path& before, const fs::path& json_out) {
  auto preds = bpr::load_corpus(pred);
  if (!gt.empty()) {
    auto gts = bpr::load_corpus(gt);
    if (gts.size() != preds.size()) throw bpr::ValidationError("prediction and GT corpora differ in size");
    for (std::size_t i = 0; i < preds.size(); ++i) preds[i].scene.ground_truth = gts[i].scene.ground_truth;
  }
  const auto after = scenes_of(preds);
  bpr::EvalReport report;
  if (before.empty()) {
    report = bpr::evaluate(after);
  } else {
    auto base = bpr::load_corpus(before);
    if (base.size() != preds.size()) throw bpr::ValidationError("--before corpus differs in size");
    for (std::size_t i = 0; i < base.size(); ++i) base[i].scene.ground_truth = after[i].ground_truth;
    report = bpr::evaluate(after, scenes_of(base));
  }
  std::cout << bpr::format_table({{"eval", report}}, "run");
  const json j = bpr::to_json(report);
  if (!json_out.empty()) write_json_file(json_out, j);
  return 0;
}

int cmd_upperbound(const fs::path& input, const std::vector<std::string>& band_text, const fs::path& json_out) {
  std::vector<bpr::DistanceBand> bands;
  for (const auto& b : band_text) bands.push_back(bpr::parse_band(b));
  const auto scenes = scenes_of(bpr::load_corpus(input));
  const auto rows = bpr::upper_bound_report(scenes, bands);
  std::cout << bpr::format_table(rows, "Dist.");
  if (!json_out.empty()) write_json_file(json_out, bpr::to_json(rows));
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const fs::path& input, const std::string& axis,
              std::vector<std::string> values, const fs::path& json_out) {
  const auto base_cfg = flags.pipeline();
  if (base_cfg.refiner == bpr::RefinerKind::External) {
    throw bpr::ValidationError("sweep runs in-process refiners only");
  }
  if (values.empty()) {
    if (axis == "nms") values = {"0", "0.15", "0.25", "0.35", "0.45", "0.55", "0.65"};
    if (axis == "patch_size") values = {"32/0", "32/5", "64/0", "64/5", "96/0", "96/5"};
    if (axis == "scheme") values = {"dense-nms", "grid", "instance"};
  }
  const auto corpus = bpr::load_corpus(input);
  const auto scenes = scenes_of(corpus);

  struct Row {
    std::string value;
    double patches_per_image;
    double ms_per_image;
    bpr::EvalReport report;
  };
  std::vector<Row> rows;
  rows.push_back({"-", 0.0, 0.0, bpr::evaluate(scenes)});
  for (const auto& v : values) {
    auto cfg = base_cfg;
    if (axis == "nms") {
      cfg.extraction.nms_threshold = std::stod(v);
    } else if (axis == "patch_size") {
      const auto slash = v.find('/');
      cfg.extraction.patch_size = std::stoi(v.substr(0, slash));
      cfg.extraction.pad = slash == std::string::npos ? 0 : std::stoi(v.substr(slash + 1));
    } else {
      cfg.extraction.scheme = bpr::parse_scheme(v);
    }
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_refine(corpus, cfg, {});
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    double patches = 0.0;
    for (const auto& t : run.timing) patches += static_cast<double>(t.patches);
    const double n = static_cast<double>(corpus.size());
    rows.push_back({v, patches / n, ms / n, bpr::evaluate(scenes_of(run.refined), scenes)});
  }

  std::cout << std::left << std::setw(12) << axis << std::right << std::setw(14) << "#patch/img"
            << std::setw(8) << "AP" << std::setw(8) << "AP50" << std::setw(8) << "AF" << std::setw(8)
            << "mIoU" << std::setw(12) << "ms/img" << '\n';
  json j = json::array();
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(12) << r.value << std::right << std::fixed << std::setprecision(1)
              << std::setw(14) << r.patches_per_image << std::setw(8) << 100.0 * r.report.ap << std::setw(8)
              << 100.0 * r.report.ap50 << std::setw(8) << 100.0 * r.report.af << std::setw(8)
              << 100.0 * r.report.mean_matched_iou << std::setw(12) << r.ms_per_image << '\n';
    auto e = bpr::to_json(r.report, false);
    e["value"] = r.value;
    e["patches_per_image"] = r.patches_per_image;
    e["ms_per_image"] = r.ms_per_image;
    j.push_back(std::move(e));
  }
  if (!json_out.empty()) write_json_file(json_out, {{"axis", axis}, {"rows", j}});
  return 0;
}

int cmd_export(const CommonFlags& flags, const fs::path& input, const fs::path& exchange, bool training) {
  const auto cfg = flags.pipeline();
  const auto corpus = bpr::load_corpus(input);
  std::size_t total = 0;
  for (const auto& s : corpus) {
    const auto m = bpr::export_scene(s.scene, cfg, scene_subdir(exchange, s), training);
    total += m.entries.size();
  }
  std::cout << "exported " << total << " patches from " << corpus.size() << " scene(s) to "
            << exchange.string() << '\n';
  return 0;
}

int cmd_import(CommonFlags flags, const fs::path& input, const fs::path& exchange) {
  auto cfg = flags.pipeline();
  cfg.refiner = bpr::RefinerKind::External;
  const auto corpus = bpr::load_corpus(input);
  const auto run = run_refine(corpus, cfg, exchange);
  bpr::save_corpus(run.refined, flags.require_out());
  if (cfg.timing) std::cout << bpr::format_timing_report(run.timing);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Boundary patch refinement for instance segmentation masks"};
  app.require_subcommand(1);
  CommonFlags flags;
  flags.attach(app);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen->fallthrough();
  int count = 20;
  gen->add_option("-n,--count", count, "Number of scenes")->check(CLI::PositiveNumber);

  auto* refine = app.add_subcommand("refine", "Extract, refine and reassemble every prediction");
  refine->fallthrough();
  std::string refine_in;
  std::string refine_exchange;
  refine->add_option("scene", refine_in, "Scene or corpus directory")->required();
  refine->add_option("--exchange", refine_exchange, "Exchange directory (external refiner)");

  auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  eval->fallthrough();
  std::string eval_pred;
  std::string eval_gt;
  std::string eval_before;
  std::string eval_json;
  eval->add_option("pred", eval_pred, "Prediction scene or corpus directory")->required();
  eval->add_option("gt", eval_gt, "Ground-truth scene or corpus (defaults to pred's gt.json)");
  eval->add_option("--before", eval_before, "Unrefined corpus for per-instance IoU deltas");
  eval->add_option("--json", eval_json, "Write the report as JSON");

  auto* ub = app.add_subcommand("upperbound", "GT-band replacement upper-bound table");
  ub->fallthrough();
  std::string ub_in;
  std::vector<std::string> ub_bands = {"1", "2", "3", "inf"};
  std::string ub_json;
  ub->add_option("scene", ub_in, "Scene or corpus directory")->required();
  ub->add_option("--bands", ub_bands, "Distance bands in pixels, or inf")->delimiter(',');
  ub->add_option("--json", ub_json, "Write the table as JSON");

  auto* sweep = app.add_subcommand("sweep", "Compare settings along one axis");
  sweep->fallthrough();
  std::string sweep_in;
  std::string sweep_axis = "nms";
  std::vector<std::string> sweep_values;
  std::string sweep_json;
  sweep->add_option("scene", sweep_in, "Scene or corpus directory")->required();
  sweep->add_option("--axis", sweep_axis, "nms | patch_size | scheme")
      ->check(CLI::IsMember({"nms", "patch_size", "scheme"}));
  sweep->add_option("--values", sweep_values, "Values to try (patch_size takes s or s/pad)")->delimiter(',');
  sweep->add_option("--json", sweep_json, "Write the table as JSON");

  auto* exp = app.add_subcommand("export", "Write patches for an external refiner");
  exp->fallthrough();
  std::string exp_in;
  std::string exp_dir;
  bool exp_train = false;
  exp->add_option("scene", exp_in, "Scene or corpus directory")->required();
  exp->add_option("--exchange", exp_dir, "Exchange directory")->required();
  exp->add_flag("--train", exp_train, "Training export: IoU > 0.5 instances, training NMS threshold");

  auto* imp = app.add_subcommand("import", "Reassemble external refiner outputs");
  imp->fallthrough();
  std::string imp_in;
  std::string imp_dir;
  imp->add_option("scene", imp_in, "Scene or corpus directory")->required();
  imp->add_option("--exchange", imp_dir, "Exchange directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(flags, count);
    if (*refine) return cmd_refine(flags, refine_in, refine_exchange);
    if (*eval) return cmd_eval(eval_pred, eval_gt, eval_before, eval_json);
    if (*ub) return cmd_upperbound(ub_in, ub_bands, ub_json);
    if (*sweep) return cmd_sweep(flags, sweep_in, sweep_axis, sweep_values, sweep_json);
    if (*exp) return cmd_export(flags, exp_in, exp_dir, exp_train);
    if (*imp) return cmd_import(flags, imp_in, imp_dir);
  } catch (const bpr::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    spdlog::error("invalid value: {}", e.what());
    return 1;
  } catch (const bpr::IoError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
