#include "bpr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bpr/resample.hpp"

namespace bpr {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Xoshiro256::next() {
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::int64_t Xoshiro256::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ValidationError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % span);
}

double Xoshiro256::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void SynthConfig::validate() const {
  if (image_size < 16) throw ValidationError("synth: image size must be >= 16");
  if (instances_per_image < 1) throw ValidationError("synth: need at least one instance per image");
  if (categories < 1) throw ValidationError("synth: need at least one category");
  if (min_radius < 3 || max_radius < min_radius) throw ValidationError("synth: bad radius range");
  if (min_gap < 0) throw ValidationError("synth: gap must be >= 0");
  if (color_jitter < 0) throw ValidationError("synth: color jitter must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ValidationError("synth: noise sigma must be >= 0");
  if (head_resolution < 4) throw ValidationError("synth: head resolution must be >= 4");
  if (erode_dilate_radius < 0 || jitter < 0) throw ValidationError("synth: radius and jitter must be >= 0");
  for (int c = 0; c < 3; ++c) {
    if (background[c] < 0 || background[c] > 255 || foreground[c] < 0 || foreground[c] > 255) {
      throw ValidationError("synth: colors must be 8-bit");
    }
  }
}

BinaryMask rasterize_star(int width, int height, double cx, double cy,
                          const std::vector<double>& radii) {
  const int k = static_cast<int>(radii.size());
  if (k < 3) throw ValidationError("rasterize_star: need at least 3 radii");
  const double r_max = *std::max_element(radii.begin(), radii.end());
  BinaryMask out(width, height);
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r_max)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + r_max)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r_max)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + r_max)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double dist = std::hypot(dx, dy);
      double t = std::atan2(dy, dx) / (2.0 * std::numbers::pi);
      if (t < 0.0) t += 1.0;
      t *= k;
      const int i0 = static_cast<int>(std::floor(t)) % k;
      const int i1 = (i0 + 1) % k;
      const double f = t - std::floor(t);
      const double r = radii[i0] * (1.0 - f) + radii[i1] * f;
      if (dist <= r) out.set(x, y, true);
    }
  }
  return out;
}

namespace {

BinaryMask shift(const BinaryMask& m, int dx, int dy) {
  if (dx == 0 && dy == 0) return m;
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const int sx = x - dx;
      const int sy = y - dy;
      if (m.contains(sx, sy) && m.at(sx, sy)) out.set(x, y, true);
    }
  }
  return out;
}

}  // namespace

BinaryMask degrade_mask(const BinaryMask& gt, const SynthConfig& config, Xoshiro256& rng) {
  const auto bbox = tight_bbox(gt);
  if (!bbox) throw ValidationError("degrade_mask: empty ground-truth mask");
  const int w = bbox->width();
  const int h = bbox->height();

  std::vector<double> crop(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) crop[static_cast<std::size_t>(y) * w + x] = gt.at(bbox->x0 + x, bbox->y0 + y);
  }
  // A head coarser than the object loses detail; a finer one is a no-op.
  const int gw = std::min(config.head_resolution, w);
  const int gh = std::min(config.head_resolution, h);
  const auto low = resample::area_average(crop, w, h, gw, gh);
  const std::vector<float> low_f(low.begin(), low.end());
  const auto up = resample::bilinear(low_f, gw, gh, w, h);

  BinaryMask coarse(gt.width(), gt.height());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (up[static_cast<std::size_t>(y) * w + x] >= 0.5f) coarse.set(bbox->x0 + x, bbox->y0 + y, true);
    }
  }

  const bool dilate = rng.uniform() < 0.5;
  const int dx = static_cast<int>(rng.uniform_int(-config.jitter, config.jitter));
  const int dy = static_cast<int>(rng.uniform_int(-config.jitter, config.jitter));

  BinaryMask morphed =
      morph(coarse, dilate ? MorphOp::Dilate : MorphOp::Erode, config.erode_dilate_radius);
  if (!morphed.any()) morphed = coarse;
  BinaryMask out = shift(morphed, dx, dy);
  if (!out.any()) out = morphed;
  return out;
}

namespace {

struct Blob {
  BinaryMask mask;
  int category;
};

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
  return splitmix64(state);
}

std::vector<double> blob_radii(double base, Xoshiro256& rng) {
  constexpr int kSamples = 16;
  constexpr double kAmplitude = 0.3;
  std::vector<double> r(kSamples);
  for (auto& v : r) v = base * (1.0 + kAmplitude * (2.0 * rng.uniform() - 1.0));
  // Two passes of a circular [1 2 1]/4 filter.
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> s(kSamples);
    for (int i = 0; i < kSamples; ++i) {
      s[i] = 0.25 * r[(i + kSamples - 1) % kSamples] + 0.5 * r[i] + 0.25 * r[(i + 1) % kSamples];
    }
    r = std::move(s);
  }
  return r;
}

}  // namespace

Scene generate_scene(const SynthConfig& config, std::uint64_t index) {
  config.validate();
  Xoshiro256 rng(scene_seed(config.seed, index));
  const int size = config.image_size;

  std::vector<Blob> blobs;
  BinaryMask occupied(size, size);
  int max_radius = std::min(config.max_radius, size / 3);
  int attempts = 0;
  while (static_cast<int>(blobs.size()) < config.instances_per_image) {
    if (++attempts % 200 == 0) {
      max_radius = std::max(config.min_radius, max_radius * 3 / 4);
      if (attempts > 20000) throw ValidationError("synth: cannot place blobs; image too crowded");
    }
    const double base = rng.uniform(config.min_radius, std::max(config.min_radius, max_radius));
    const auto radii = blob_radii(base, rng);
    const double reach = *std::max_element(radii.begin(), radii.end()) + 2.0;
    if (2.0 * reach >= size) continue;
    const double cx = rng.uniform(reach, size - 1 - reach);
    const double cy = rng.uniform(reach, size - 1 - reach);
    const int category = static_cast<int>(rng.uniform_int(1, config.categories));
    BinaryMask mask = rasterize_star(size, size, cx, cy, radii);
    if (mask.count() < 20) continue;

    const BinaryMask grown = morph(mask, MorphOp::Dilate, config.min_gap);
    bool clash = false;
    for (std::size_t i = 0; i < grown.size() && !clash; ++i) {
      clash = grown.bits()[i] && occupied.bits()[i];
    }
    if (clash) continue;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask.bits()[i]) occupied.bits()[i] = 1;
    }
    blobs.push_back({std::move(mask), category});
  }

  Scene scene;
  std::vector<std::array<int, 3>> colors;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    std::array<int, 3> c{};
    for (int ch = 0; ch < 3; ++ch) {
      c[ch] = std::clamp(config.foreground[ch] +
                             static_cast<int>(rng.uniform_int(-config.color_jitter, config.color_jitter)),
                         0, 255);
    }
    colors.push_back(c);
  }

  ImageRGB image(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      std::array<int, 3> base = config.background;
      for (std::size_t i = 0; i < blobs.size(); ++i) {
        if (blobs[i].mask.at(x, y)) base = colors[i];
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double noise = config.noise_sigma > 0.0 ? config.noise_sigma * rng.normal() : 0.0;
        image.at(x, y, ch) =
            static_cast<std::uint8_t>(std::clamp(std::lround(base[ch] + noise), 0L, 255L));
      }
    }
  }
  scene.image = std::move(image);

  std::vector<Instance> gts;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    gts.push_back({static_cast<std::int64_t>(i + 1), blobs[i].category, 1.0, blobs[i].mask});
  }
  for (const auto& g : gts) {
    Instance p;
    p.instance_id = g.instance_id;
    p.category_id = g.category_id;
    p.mask = degrade_mask(g.mask, config, rng);
    p.score = rng.uniform(0.6, 1.0);
    scene.predictions.push_back(std::move(p));
  }
  scene.ground_truth = std::move(gts);
  return scene;
}

std::vector<Scene> generate_corpus(const SynthConfig& config, int count) {
  std::vector<Scene> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_scene(config, static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace bpr
