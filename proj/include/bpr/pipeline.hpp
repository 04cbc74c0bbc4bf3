#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpr/extract.hpp"
#include "bpr/maskcore.hpp"
#include "bpr/refine.hpp"
#include "bpr/synthgen.hpp"

namespace bpr {

struct PipelineConfig {
  ExtractionConfig extraction;
  RefinerKind refiner = RefinerKind::Identity;
  RefinerOptions options;
  int input_size = 128;
  int jobs = 1;
  bool timing = false;

  void validate() const;
  // Side that exported crops are resampled to.
  int export_size() const;
};

// Unknown keys are rejected so typos in sweep configs do not pass silently.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});
nlohmann::json load_json_file(const std::filesystem::path& path);

struct StageTiming {
  double extraction_ms = 0.0;
  double refinement_ms = 0.0;
  double reassembling_ms = 0.0;
};

struct RefineResult {
  Scene scene;
  std::size_t patch_count = 0;
  StageTiming timing;
};

// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Exceptions are
// rethrown on the calling thread (the first by index wins).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Extract → refine → reassemble for every prediction. The oracle refiner only
// touches predictions with a GT match (IoU > 0.5). The external refiner reads
// patches and outputs from `exchange_dir` instead of extracting.
RefineResult refine_scene(const Scene& scene, const PipelineConfig& config,
                          const std::filesystem::path& exchange_dir = {});

// Patches for export. Training mode keeps only predictions matched to GT with
// IoU > 0.5, attaches GT crops, and uses the training NMS threshold.
std::vector<Patch> scene_patches(const Scene& scene, const PipelineConfig& config, bool training);

struct ImageTiming {
  std::string scene;
  std::size_t patches = 0;
  StageTiming timing;
};

inline constexpr const char* kStageNames[3] = {"patch extraction", "refinement", "reassembling"};

// One row per stage (total and per-image mean) plus patch counts per image.
std::string format_timing_report(const std::vector<ImageTiming>& images);
nlohmann::json timing_report_json(const std::vector<ImageTiming>& images);

Manifest export_scene(const Scene& scene, const PipelineConfig& config,
                      const std::filesystem::path& dir, bool training);

}  // namespace bpr
