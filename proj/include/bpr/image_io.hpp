#pragma once

#include <filesystem>

#include "bpr/maskcore.hpp"

namespace bpr {

// PNG codecs backed by libpng. Any PNG color type is accepted on read:
// images are converted to 8-bit RGB, masks to 8-bit gray (nonzero = foreground).
ImageRGB read_png_rgb(const std::filesystem::path& path);
BinaryMask read_png_mask(const std::filesystem::path& path);

void write_png_rgb(const std::filesystem::path& path, const ImageRGB& image);
// Foreground is written as 255.
void write_png_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace bpr
