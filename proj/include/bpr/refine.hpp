#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpr/extract.hpp"
#include "bpr/maskcore.hpp"

namespace bpr {

// Every refiner sees the same four input channels per patch (RGB crop plus the
// coarse mask crop) and returns a foreground probability per crop pixel.
enum class RefinerKind { Identity, Oracle, ColorModel, External };

std::string to_string(RefinerKind kind);
RefinerKind parse_refiner(const std::string& name);

struct ColorModelParams {
  int band_margin = 3;
  double covariance_floor = 25.0;  // per-channel variance, 8-bit units squared
  int min_seeds = 10;

  void validate() const;
};

struct RefinerOptions {
  ColorModelParams color;
  std::filesystem::path exchange_dir;  // External only
};

// Probabilities for the unpadded box only.
struct RefinedPatch {
  PatchSpec spec;
  ProbMap probs;
};

// Runs the refiner over the padded crop and keeps the central box.
RefinedPatch refine_patch(RefinerKind kind, const Patch& patch,
                          const RefinerOptions& options = {});

// Two diagonal Gaussians in RGB, fitted to pixels farther than band_margin
// from the coarse mask boundary on either side; output is P(fg) with equal
// priors over the whole padded crop. Falls back to the mask when either side
// has fewer than min_seeds seeds.
ProbMap colormodel_refine(const Patch& patch, const ColorModelParams& params);

struct TrainingInstance {
  Instance prediction;
  std::int64_t gt_id = 0;
  float iou = 0.0f;
};

// Predictions whose greedily matched GT overlaps with IoU > 0.5.
std::vector<TrainingInstance> select_training_instances(const Scene& scene);

// Patch exchange directory (manifest.json + img/ mask/ gt/ out/).
struct ManifestEntry {
  int patch_id = 0;
  std::int64_t instance_id = 0;
  SquareBox box;
  std::string image;
  std::string mask;
  std::optional<std::string> gt;
  std::string out;
};

struct Manifest {
  int version = 1;
  int patch_size = 0;
  int pad = 0;
  int input_size = 0;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const Manifest& manifest, const std::filesystem::path& dir);

// Writes resized crops for every patch, then the manifest. Image crops use
// bilinear resampling, mask and GT crops nearest neighbour.
// Crops of any side are resampled to input_size; the manifest records the box
// geometry needed to undo it.
Manifest export_patches(std::span<const Patch> patches, int patch_size, int pad, int input_size,
                        const std::filesystem::path& dir);

// Reads out/<k>.f32 for every entry, resizes back to the crop side, strips the
// pad. Invalid entries are collected and reported together.
std::vector<RefinedPatch> import_refined(const Manifest& manifest,
                                         const std::filesystem::path& dir);

// Raw little-endian float32 I/O for exchange output files.
std::vector<float> read_f32(const std::filesystem::path& path);
void write_f32(const std::filesystem::path& path, std::span<const float> values);

}  // namespace bpr
