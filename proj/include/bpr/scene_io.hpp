#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bpr/maskcore.hpp"

namespace bpr {

// Scene directory layout:
//   image.png              8-bit RGB
//   pred.json, gt.json     [{"id", "category_id", "score", "mask": "<relative png path>"}]
//   masks/<id>.png         prediction masks
//   masks/gt/<id>.png      ground-truth masks (written layout; any relative path is read)
Scene load_scene(const std::filesystem::path& dir);
void save_scene(const Scene& scene, const std::filesystem::path& dir);

struct NamedScene {
  std::string name;
  Scene scene;
};

// `path` is either one scene directory or a corpus directory whose immediate
// subdirectories are scenes (visited in lexicographic order).
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& path);
bool is_scene_dir(const std::filesystem::path& path);
std::vector<NamedScene> load_corpus(const std::filesystem::path& path);

// Mirrors load_corpus: a single unnamed scene goes straight into `dir`.
void save_corpus(const std::vector<NamedScene>& corpus, const std::filesystem::path& dir);

}  // namespace bpr
