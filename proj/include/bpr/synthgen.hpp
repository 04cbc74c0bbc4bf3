#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bpr/maskcore.hpp"

namespace bpr {

// xoshiro256** (Blackman & Vigna), state filled from SplitMix64. Spelled out
// here rather than taken from <random> so that the bit stream and every
// derived variate are fixed across standard libraries.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Inclusive range, by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Box-Muller, one variate per call (two uniforms consumed).
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

struct SynthConfig {
  std::uint64_t seed = 42;
  int image_size = 256;
  int instances_per_image = 4;
  int categories = 3;
  int min_radius = 10;
  int max_radius = 56;
  int min_gap = 4;  // pixels between blobs
  std::array<int, 3> background{60, 90, 160};
  std::array<int, 3> foreground{200, 80, 60};
  int color_jitter = 30;  // per-instance, per-channel
  double noise_sigma = 10.0;
  int head_resolution = 28;
  int erode_dilate_radius = 1;
  int jitter = 1;

  void validate() const;
};

// Star-convex blob: radii sampled at evenly spaced angles, interpolated
// linearly in angle; a pixel is inside when its center lies within the radius.
BinaryMask rasterize_star(int width, int height, double cx, double cy,
                          const std::vector<double>& radii);

// Coarse-mask degradation: tight-bbox crop, area-average to at most g×g,
// bilinear back up, threshold at 0.5, random erode-or-dilate, random shift.
BinaryMask degrade_mask(const BinaryMask& gt, const SynthConfig& config, Xoshiro256& rng);

// Deterministic in (config.seed, index).
Scene generate_scene(const SynthConfig& config, std::uint64_t index);

std::vector<Scene> generate_corpus(const SynthConfig& config, int count);

}  // namespace bpr
