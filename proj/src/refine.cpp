#include "bpr/refine.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bpr/image_io.hpp"
#include "bpr/resample.hpp"

namespace bpr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RefinerKind kind) {
  switch (kind) {
    case RefinerKind::Identity: return "identity";
    case RefinerKind::Oracle: return "oracle";
    case RefinerKind::ColorModel: return "colormodel";
    case RefinerKind::External: return "external";
  }
  return "?";
}

RefinerKind parse_refiner(const std::string& name) {
  if (name == "identity") return RefinerKind::Identity;
  if (name == "oracle") return RefinerKind::Oracle;
  if (name == "colormodel") return RefinerKind::ColorModel;
  if (name == "external") return RefinerKind::External;
  throw ValidationError("unknown refiner '" + name + "'");
}

void ColorModelParams::validate() const {
  if (band_margin < 1) throw ValidationError("color model band margin must be >= 1");
  if (!(covariance_floor > 0.0)) throw ValidationError("color model covariance floor must be > 0");
  if (min_seeds < 2) throw ValidationError("color model min seeds must be >= 2");
}

namespace {

ProbMap strip_pad(const ProbMap& padded, const PatchSpec& spec) {
  const int s = spec.box.size;
  ProbMap out(s, s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) out.at(x, y) = padded.at(x + spec.pad, y + spec.pad);
  }
  return out;
}

struct Gaussian {
  std::array<double, 3> mean{};
  std::array<double, 3> var{};
  std::array<double, 3> log_var{};

  double log_likelihood(const std::array<double, 3>& rgb) const {
    double ll = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = rgb[c] - mean[c];
      ll -= 0.5 * (log_var[c] + d * d / var[c]);
    }
    return ll;
  }
};

// Integer moment sums keep the fit independent of pixel visiting order.
struct Moments {
  std::int64_t n = 0;
  std::array<std::int64_t, 3> sum{};
  std::array<std::int64_t, 3> sum_sq{};

  void add(const ImageRGB& img, int x, int y) {
    ++n;
    for (int c = 0; c < 3; ++c) {
      const std::int64_t v = img.at(x, y, c);
      sum[c] += v;
      sum_sq[c] += v * v;
    }
  }

  Gaussian fit(double floor) const {
    Gaussian g;
    const double dn = static_cast<double>(n);
    for (int c = 0; c < 3; ++c) {
      g.mean[c] = static_cast<double>(sum[c]) / dn;
      const double var = static_cast<double>(sum_sq[c]) / dn - g.mean[c] * g.mean[c];
      g.var[c] = std::max(var, floor);
      g.log_var[c] = std::log(g.var[c]);
    }
    return g;
  }
};

}  // namespace

ProbMap colormodel_refine(const Patch& patch, const ColorModelParams& params) {
  params.validate();
  const BinaryMask& mask = patch.mask_crop;
  const ImageRGB& img = patch.image_crop;
  const int side = mask.width();
  const auto boundary = boundary_pixels(mask);
  if (boundary.empty()) return to_prob_map(mask);

  const auto sq = squared_distance_to_set(side, mask.height(), boundary);
  const std::int64_t margin_sq = std::int64_t{params.band_margin} * params.band_margin;
  const PixelRect& valid = patch.in_image;

  Moments fg;
  Moments bg;
  for (int y = valid.y0; y < valid.y1; ++y) {
    for (int x = valid.x0; x < valid.x1; ++x) {
      if (sq[static_cast<std::size_t>(y) * side + x] <= margin_sq) continue;
      (mask.at(x, y) ? fg : bg).add(img, x, y);
    }
  }
  if (fg.n < params.min_seeds || bg.n < params.min_seeds) return to_prob_map(mask);

  const Gaussian gf = fg.fit(params.covariance_floor);
  const Gaussian gb = bg.fit(params.covariance_floor);
  ProbMap out = to_prob_map(mask);
  for (int y = valid.y0; y < valid.y1; ++y) {
    for (int x = valid.x0; x < valid.x1; ++x) {
      const std::array<double, 3> rgb{static_cast<double>(img.at(x, y, 0)),
                                      static_cast<double>(img.at(x, y, 1)),
                                      static_cast<double>(img.at(x, y, 2))};
      const double diff = gb.log_likelihood(rgb) - gf.log_likelihood(rgb);
      const double p = 1.0 / (1.0 + std::exp(diff));
      out.at(x, y) = static_cast<float>(std::clamp(p, 0.0, 1.0));
    }
  }
  return out;
}

namespace {

RefinedPatch import_one(const Manifest& manifest, const ManifestEntry& entry,
                        const fs::path& dir);

}  // namespace

RefinedPatch refine_patch(RefinerKind kind, const Patch& patch, const RefinerOptions& options) {
  const int side = patch.spec.crop_side();
  if (patch.mask_crop.width() != side || patch.mask_crop.height() != side ||
      patch.image_crop.width() != side || patch.image_crop.height() != side) {
    throw ValidationError("refine_patch: crop size does not match patch " +
                          std::to_string(patch.spec.patch_id));
  }
  switch (kind) {
    case RefinerKind::Identity:
      return {patch.spec, strip_pad(to_prob_map(patch.mask_crop), patch.spec)};
    case RefinerKind::Oracle:
      if (!patch.gt_crop) {
        throw ValidationError("oracle refiner needs a ground-truth crop (instance " +
                              std::to_string(patch.spec.instance_id) + ", patch " +
                              std::to_string(patch.spec.patch_id) + ")");
      }
      return {patch.spec, strip_pad(to_prob_map(*patch.gt_crop), patch.spec)};
    case RefinerKind::ColorModel:
      return {patch.spec, strip_pad(colormodel_refine(patch, options.color), patch.spec)};
    case RefinerKind::External: {
      if (options.exchange_dir.empty()) {
        throw ValidationError("external refiner needs an exchange directory");
      }
      const Manifest manifest = read_manifest(options.exchange_dir);
      for (const auto& e : manifest.entries) {
        if (e.instance_id == patch.spec.instance_id && e.patch_id == patch.spec.patch_id &&
            e.box == patch.spec.box && manifest.pad == patch.spec.pad) {
          return import_one(manifest, e, options.exchange_dir);
        }
      }
      throw ValidationError("exchange directory has no output for instance " +
                            std::to_string(patch.spec.instance_id) + ", patch " +
                            std::to_string(patch.spec.patch_id));
    }
  }
  throw ValidationError("unknown refiner");
}

std::vector<TrainingInstance> select_training_instances(const Scene& scene) {
  if (!scene.ground_truth) throw ValidationError("select_training_instances: scene has no ground truth");
  const auto& gts = *scene.ground_truth;
  std::vector<TrainingInstance> out;
  for (const auto& a : greedy_iou_assignment(scene.predictions, gts, 0.5f)) {
    out.push_back({scene.predictions[a.pred_index], gts[a.gt_index].instance_id, a.iou});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exchange directory

std::vector<float> read_f32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) {
    throw ValidationError(path.string() + ": size " + std::to_string(bytes.size()) +
                          " is not a multiple of 4");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

void write_f32(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (float v : values) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    out.write(reinterpret_cast<const char*>(&u), 4);
  }
  if (!out) throw IoError("cannot write " + path.string());
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Manifest m;
  try {
    const json j = json::parse(in);
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw ValidationError("unsupported manifest version");
    m.patch_size = j.at("patch_size").get<int>();
    m.pad = j.at("pad").get<int>();
    m.input_size = j.at("input_size").get<int>();
    if (m.patch_size < 2 || m.pad < 0 || m.input_size < 1) {
      throw ValidationError("manifest geometry out of range");
    }
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.patch_id = e.at("patch_id").get<int>();
      entry.instance_id = e.at("instance_id").get<std::int64_t>();
      const auto& box = e.at("box");
      entry.box = {box.at("x").get<int>(), box.at("y").get<int>(), box.at("size").get<int>()};
      if (entry.box.size < 2 || entry.box.size % 2 != 0) {
        throw ValidationError("entry " + std::to_string(entry.patch_id) + ": bad box size");
      }
      entry.image = e.at("image").get<std::string>();
      entry.mask = e.at("mask").get<std::string>();
      if (e.contains("gt")) entry.gt = e.at("gt").get<std::string>();
      entry.out = e.at("out").get<std::string>();
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& dir) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json je = {{"patch_id", e.patch_id},
               {"instance_id", e.instance_id},
               {"box", {{"x", e.box.x}, {"y", e.box.y}, {"size", e.box.size}}},
               {"image", e.image},
               {"mask", e.mask},
               {"out", e.out}};
    if (e.gt) je["gt"] = *e.gt;
    entries.push_back(std::move(je));
  }
  const json j = {{"version", manifest.version},
                  {"patch_size", manifest.patch_size},
                  {"pad", manifest.pad},
                  {"input_size", manifest.input_size},
                  {"entries", std::move(entries)}};
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

Manifest export_patches(std::span<const Patch> patches, int patch_size, int pad, int input_size,
                        const fs::path& dir) {
  if (input_size < 1) throw ValidationError("export: input size must be >= 1");
  for (const char* sub : {"img", "mask", "gt", "out"}) fs::create_directories(dir / sub);

  Manifest m;
  m.patch_size = patch_size;
  m.pad = pad;
  m.input_size = input_size;
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const Patch& p = patches[k];
    if (p.spec.pad != pad) throw ValidationError("export: patches disagree on pad");
    const std::string key = std::to_string(k);
    ManifestEntry e;
    e.patch_id = p.spec.patch_id;
    e.instance_id = p.spec.instance_id;
    e.box = p.spec.box;
    e.image = "img/" + key + ".png";
    e.mask = "mask/" + key + ".png";
    e.out = "out/" + key + ".f32";
    write_png_rgb(dir / e.image, resample::bilinear(p.image_crop, input_size, input_size));
    write_png_mask(dir / e.mask, resample::nearest(p.mask_crop, input_size, input_size));
    if (p.gt_crop) {
      e.gt = "gt/" + key + ".png";
      write_png_mask(dir / *e.gt, resample::nearest(*p.gt_crop, input_size, input_size));
    }
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, dir);
  return m;
}

namespace {

RefinedPatch import_one(const Manifest& manifest, const ManifestEntry& entry,
                        const fs::path& dir) {
  const int n = manifest.input_size;
  const fs::path path = dir / entry.out;
  if (!fs::exists(path)) throw ValidationError("missing output file " + path.string());
  const auto values = read_f32(path);
  const std::size_t expected = static_cast<std::size_t>(n) * n;
  if (values.size() != expected) {
    throw ValidationError(path.string() + " holds " + std::to_string(values.size()) +
                          " values, expected " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (std::isnan(v)) throw ValidationError(path.string() + ": NaN at index " + std::to_string(i));
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValidationError(path.string() + ": value " + std::to_string(v) + " outside [0, 1] at index " +
                            std::to_string(i));
    }
  }
  const int side = entry.box.size + 2 * manifest.pad;
  std::vector<float> crop = n % side == 0 ? resample::block_mean(values, n, n, n / side)
                                          : resample::bilinear(values, n, n, side, side);
  for (float& v : crop) v = std::clamp(v, 0.0f, 1.0f);
  PatchSpec spec{entry.patch_id, entry.instance_id, entry.box, manifest.pad, 0};
  return {spec, strip_pad(ProbMap(side, side, std::move(crop)), spec)};
}

}  // namespace

std::vector<RefinedPatch> import_refined(const Manifest& manifest, const fs::path& dir) {
  std::vector<RefinedPatch> out;
  std::ostringstream errors;
  int failed = 0;
  for (const auto& e : manifest.entries) {
    try {
      out.push_back(import_one(manifest, e, dir));
    } catch (const std::exception& ex) {
      ++failed;
      errors << "\n  patch_id " << e.patch_id << " (instance " << e.instance_id
             << "): " << ex.what();
    }
  }
  if (failed > 0) {
    throw ValidationError("import failed for " + std::to_string(failed) + " entr" +
                          (failed == 1 ? "y" : "ies") + ":" + errors.str());
  }
  return out;
}

}  // namespace bpr
