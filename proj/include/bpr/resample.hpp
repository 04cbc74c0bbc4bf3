#pragma once

#include <span>
#include <vector>

#include "bpr/maskcore.hpp"

// Raster resampling. All bilinear routines use pixel-center alignment
// (src = (dst + 0.5) * scale - 0.5) with edge clamping, so a same-size
// resample is an exact copy.
namespace bpr::resample {

ImageRGB bilinear(const ImageRGB& src, int width, int height);

std::vector<float> bilinear(std::span<const float> src, int src_w, int src_h, int dst_w,
                            int dst_h);

BinaryMask nearest(const BinaryMask& src, int width, int height);

// Mean over factor×factor blocks; dst side = src side / factor.
std::vector<float> block_mean(std::span<const float> src, int src_w, int src_h, int factor);

// Exact area-weighted averaging for arbitrary ratios.
std::vector<double> area_average(std::span<const double> src, int src_w, int src_h, int dst_w,
                                 int dst_h);

}  // namespace bpr::resample
