#include "bpr/scene_io.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "bpr/image_io.hpp"

namespace bpr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<Instance> read_instances(const fs::path& dir, const fs::path& file) {
  const json j = read_json(dir / file);
  if (!j.is_array()) throw ValidationError(file.string() + " must hold a JSON array");
  std::vector<Instance> out;
  for (const auto& e : j) {
    try {
      Instance inst;
      inst.instance_id = e.at("id").get<std::int64_t>();
      inst.category_id = e.at("category_id").get<int>();
      inst.score = e.at("score").get<double>();
      const auto rel = e.at("mask").get<std::string>();
      inst.mask = read_png_mask(dir / rel);
      out.push_back(std::move(inst));
    } catch (const json::exception& ex) {
      throw ValidationError((dir / file).string() + ": bad entry: " + ex.what());
    }
  }
  return out;
}

void write_instances(const fs::path& dir, const fs::path& file, const fs::path& mask_dir,
                     const std::vector<Instance>& list) {
  fs::create_directories(dir / mask_dir);
  json j = json::array();
  for (const auto& inst : list) {
    const fs::path rel = mask_dir / (std::to_string(inst.instance_id) + ".png");
    write_png_mask(dir / rel, inst.mask);
    j.push_back({{"id", inst.instance_id},
                 {"category_id", inst.category_id},
                 {"score", inst.score},
                 {"mask", rel.generic_string()}});
  }
  write_json(dir / file, j);
}

}  // namespace

bool is_scene_dir(const fs::path& path) {
  return fs::is_regular_file(path / "image.png") && fs::is_regular_file(path / "pred.json");
}

Scene load_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir.string());
  Scene scene;
  scene.image = read_png_rgb(dir / "image.png");
  scene.predictions = read_instances(dir, "pred.json");
  if (fs::exists(dir / "gt.json")) scene.ground_truth = read_instances(dir, "gt.json");
  try {
    scene.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(dir.string() + ": " + e.what());
  }
  return scene;
}

void save_scene(const Scene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  write_png_rgb(dir / "image.png", scene.image);
  write_instances(dir, "pred.json", "masks", scene.predictions);
  if (scene.ground_truth) {
    write_instances(dir, "gt.json", fs::path("masks") / "gt", *scene.ground_truth);
  } else if (fs::exists(dir / "gt.json")) {
    fs::remove(dir / "gt.json");
  }
}

std::vector<fs::path> list_scene_dirs(const fs::path& path) {
  if (!fs::is_directory(path)) throw IoError("not a directory: " + path.string());
  if (is_scene_dir(path)) return {path};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_directory() && is_scene_dir(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ValidationError("no scenes found under " + path.string());
  return out;
}

std::vector<NamedScene> load_corpus(const fs::path& path) {
  std::vector<NamedScene> out;
  const bool single = is_scene_dir(path);
  for (const auto& dir : list_scene_dirs(path)) {
    out.push_back({single ? std::string() : dir.filename().string(), load_scene(dir)});
  }
  return out;
}

void save_corpus(const std::vector<NamedScene>& corpus, const fs::path& dir) {
  for (const auto& s : corpus) save_scene(s.scene, s.name.empty() ? dir : dir / s.name);
}

}  // namespace bpr
