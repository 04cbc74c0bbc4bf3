#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bpr/assemble.hpp"
#include "bpr/metrics.hpp"
#include "bpr/pipeline.hpp"
#include "bpr/scene_io.hpp"
#include "bpr/synthgen.hpp"

namespace bpr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("bpr_pipeline_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SynthConfig small_synth() {
  SynthConfig cfg;
  cfg.image_size = 128;
  cfg.max_radius = 36;
  return cfg;
}

TEST(PipelineConfig, FromJson) {
  const auto c = pipeline_config_from_json(json::parse(R"({
    "patch_size": 32, "pad": 5, "nms_threshold": 0.45, "scheme": "grid",
    "refiner": "colormodel", "input_size": 64, "jobs": 3,
    "color_model": {"band_margin": 4}
  })"));
  EXPECT_EQ(c.extraction.patch_size, 32);
  EXPECT_EQ(c.extraction.pad, 5);
  EXPECT_DOUBLE_EQ(c.extraction.nms_threshold, 0.45);
  EXPECT_EQ(c.extraction.scheme, Scheme::Grid);
  EXPECT_EQ(c.refiner, RefinerKind::ColorModel);
  EXPECT_EQ(c.jobs, 3);
  EXPECT_EQ(c.options.color.band_margin, 4);
  EXPECT_EQ(c.options.color.min_seeds, 10);
}

TEST(PipelineConfig, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(pipeline_config_from_json(json::parse(R"({"patchsize": 32})")), ValidationError);
  EXPECT_THROW(pipeline_config_from_json(json::parse(R"({"color_model": {"margin": 1}})")), ValidationError);
  EXPECT_THROW(pipeline_config_from_json(json::parse(R"({"refiner": "magic"})")), ValidationError);
  EXPECT_THROW(pipeline_config_from_json(json::parse(R"({"patch_size": "big"})")), ValidationError);
  EXPECT_THROW(synth_config_from_json(json::parse(R"({"sead": 1})")), ValidationError);
  EXPECT_EQ(synth_config_from_json(json::parse(R"({"seed": 9, "jitter": 0})")).seed, 9u);
}

TEST(PipelineConfig, ExportSizeFollowsScheme) {
  PipelineConfig c;
  c.input_size = 96;
  EXPECT_EQ(c.export_size(), 96);
  c.extraction.scheme = Scheme::InstanceLevel;
  c.extraction.instance_target = 48;
  EXPECT_EQ(c.export_size(), 48);
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw ValidationError("seven");
               }),
               ValidationError);
}

TEST(RefineScene, IdentityLeavesMasksUnchanged) {
  const Scene s = generate_scene(small_synth(), 0);
  for (auto scheme : {Scheme::DenseNms, Scheme::Grid, Scheme::InstanceLevel}) {
    PipelineConfig c;
    c.extraction.scheme = scheme;
    c.extraction.patch_size = 32;
    c.extraction.grid_cell = 32;
    c.extraction.pad = 3;
    const auto r = refine_scene(s, c);
    EXPECT_GT(r.patch_count, 0u);
    for (std::size_t i = 0; i < s.predictions.size(); ++i) {
      EXPECT_EQ(r.scene.predictions[i].mask, s.predictions[i].mask);
    }
  }
}

TEST(RefineScene, JobsDoNotChangeResults) {
  const Scene s = generate_scene(small_synth(), 1);
  PipelineConfig c;
  c.refiner = RefinerKind::ColorModel;
  c.extraction.patch_size = 32;
  const auto one = refine_scene(s, c);
  c.jobs = 4;
  const auto four = refine_scene(s, c);
  EXPECT_EQ(one.patch_count, four.patch_count);
  for (std::size_t i = 0; i < s.predictions.size(); ++i) {
    EXPECT_EQ(one.scene.predictions[i].mask, four.scene.predictions[i].mask);
  }
}

TEST(RefineScene, OracleMatchesGtInsidePatches) {
  const Scene s = generate_scene(small_synth(), 2);
  PipelineConfig c;
  c.refiner = RefinerKind::Oracle;
  c.extraction.patch_size = 32;
  const auto r = refine_scene(s, c);
  const std::vector<Scene> before{s}, after{r.scene};
  for (const auto& row : iou_improvement_report(before, after)) {
    if (row.matched) EXPECT_GE(row.iou_after, row.iou_before);
  }
}

TEST(SceneIo, RoundTrip) {
  TempDir dir;
  const auto corpus = generate_corpus(small_synth(), 2);
  std::vector<NamedScene> named{{"scene_0000", corpus[0]}, {"scene_0001", corpus[1]}};
  save_corpus(named, dir.path());
  EXPECT_EQ(list_scene_dirs(dir.path()).size(), 2u);
  const auto back = load_corpus(dir.path());
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].name, named[i].name);
    EXPECT_EQ(back[i].scene.image, corpus[i].image);
    ASSERT_EQ(back[i].scene.predictions.size(), corpus[i].predictions.size());
    for (std::size_t k = 0; k < corpus[i].predictions.size(); ++k) {
      EXPECT_EQ(back[i].scene.predictions[k].mask, corpus[i].predictions[k].mask);
      EXPECT_EQ(back[i].scene.predictions[k].score, corpus[i].predictions[k].score);
      EXPECT_EQ((*back[i].scene.ground_truth)[k].mask, (*corpus[i].ground_truth)[k].mask);
    }
  }
  EXPECT_TRUE(fs::exists(dir.path() / "scene_0000" / "masks" / "gt"));
}

TEST(SceneIo, BadJsonIsValidationError) {
  TempDir dir;
  save_scene(generate_scene(small_synth(), 0), dir.path());
  std::ofstream(dir.path() / "pred.json") << "[{\"id\": 1}]";
  EXPECT_THROW(load_scene(dir.path()), ValidationError);
}

TEST(TimingReport, ThreeStagesAndPatchCounts) {
  std::vector<ImageTiming> images{{"a", 12, {1.0, 2.0, 3.0}}, {"b", 8, {1.0, 2.0, 3.0}}};
  const auto j = timing_report_json(images);
  ASSERT_EQ(j.at("stages").size(), 3u);
  EXPECT_EQ(j.at("stages")[0].at("stage"), "patch extraction");
  EXPECT_DOUBLE_EQ(j.at("mean_patches_per_image").get<double>(), 10.0);
  const auto text = format_timing_report(images);
  for (const char* name : kStageNames) EXPECT_NE(text.find(name), std::string::npos);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + BPR_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const std::string out = (dir.path() / "corpus").string();
  EXPECT_EQ(run_cli("gen -n 2 --seed 5 --out " + out), 0);
  EXPECT_EQ(run_cli("eval " + out), 0);
  EXPECT_EQ(run_cli("refine " + out + " --refiner oracle --out " + (dir.path() / "ref").string()), 0);
  EXPECT_EQ(run_cli("refine " + out + " --refiner bogus --out " + (dir.path() / "x").string()), 1);
  EXPECT_EQ(run_cli("refine " + out + " --patch-size 7 --out " + (dir.path() / "x").string()), 1);
  EXPECT_EQ(run_cli("eval " + (dir.path() / "missing").string()), 2);
  EXPECT_EQ(run_cli("no-such-command"), 1);
}

}  // namespace
}  // namespace bpr
