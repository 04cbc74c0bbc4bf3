#include "bpr/resample.hpp"

#include <algorithm>
#include <cmath>

namespace bpr::resample {

namespace {

struct Tap {
  int i0;
  int i1;
  float w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[d] = {i0, i1, static_cast<float>(s - i0)};
  }
  return taps;
}

void check_size(int w, int h) {
  if (w < 1 || h < 1) throw ValidationError("resample: target size must be >= 1");
}

}  // namespace

ImageRGB bilinear(const ImageRGB& src, int width, int height) {
  check_size(width, height);
  if (src.width() == width && src.height() == height) return src;
  const auto tx = bilinear_taps(src.width(), width);
  const auto ty = bilinear_taps(src.height(), height);
  ImageRGB out(width, height);
  for (int y = 0; y < height; ++y) {
    const Tap& v = ty[y];
    for (int x = 0; x < width; ++x) {
      const Tap& u = tx[x];
      for (int c = 0; c < 3; ++c) {
        const float top = src.at(u.i0, v.i0, c) * (1.0f - u.w1) + src.at(u.i1, v.i0, c) * u.w1;
        const float bot = src.at(u.i0, v.i1, c) * (1.0f - u.w1) + src.at(u.i1, v.i1, c) * u.w1;
        const float val = top * (1.0f - v.w1) + bot * v.w1;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return out;
}

std::vector<float> bilinear(std::span<const float> src, int src_w, int src_h, int dst_w,
                            int dst_h) {
  check_size(dst_w, dst_h);
  if (src.size() != static_cast<std::size_t>(src_w) * src_h) {
    throw ValidationError("resample: source size mismatch");
  }
  if (src_w == dst_w && src_h == dst_h) return {src.begin(), src.end()};
  const auto tx = bilinear_taps(src_w, dst_w);
  const auto ty = bilinear_taps(src_h, dst_h);
  auto at = [&](int x, int y) { return src[static_cast<std::size_t>(y) * src_w + x]; };
  std::vector<float> out(static_cast<std::size_t>(dst_w) * dst_h);
  for (int y = 0; y < dst_h; ++y) {
    const Tap& v = ty[y];
    for (int x = 0; x < dst_w; ++x) {
      const Tap& u = tx[x];
      const float top = at(u.i0, v.i0) * (1.0f - u.w1) + at(u.i1, v.i0) * u.w1;
      const float bot = at(u.i0, v.i1) * (1.0f - u.w1) + at(u.i1, v.i1) * u.w1;
      out[static_cast<std::size_t>(y) * dst_w + x] = top * (1.0f - v.w1) + bot * v.w1;
    }
  }
  return out;
}

BinaryMask nearest(const BinaryMask& src, int width, int height) {
  check_size(width, height);
  if (src.width() == width && src.height() == height) return src;
  BinaryMask out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(static_cast<int>((std::int64_t{2} * y + 1) * src.height() /
                                             (std::int64_t{2} * height)),
                            src.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(static_cast<int>((std::int64_t{2} * x + 1) * src.width() /
                                               (std::int64_t{2} * width)),
                              src.width() - 1);
      out.set(x, y, src.at(sx, sy));
    }
  }
  return out;
}

std::vector<float> block_mean(std::span<const float> src, int src_w, int src_h, int factor) {
  if (factor < 1 || src_w % factor != 0 || src_h % factor != 0) {
    throw ValidationError("block_mean: size not divisible by factor");
  }
  const int dw = src_w / factor;
  const int dh = src_h / factor;
  const float denom = static_cast<float>(factor * factor);
  std::vector<float> out(static_cast<std::size_t>(dw) * dh);
  for (int y = 0; y < dh; ++y) {
    for (int x = 0; x < dw; ++x) {
      float sum = 0.0f;
      for (int by = 0; by < factor; ++by) {
        for (int bx = 0; bx < factor; ++bx) {
          sum += src[static_cast<std::size_t>(y * factor + by) * src_w + x * factor + bx];
        }
      }
      out[static_cast<std::size_t>(y) * dw + x] = std::clamp(sum / denom, 0.0f, 1.0f);
    }
  }
  return out;
}

namespace {

// Row i of the weight matrix mapping `src` samples onto `dst` samples by overlap length.
struct Span1D {
  int first;
  std::vector<double> weights;
};

std::vector<Span1D> area_weights(int src, int dst) {
  std::vector<Span1D> rows(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    const double lo = d * scale;
    const double hi = (d + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
    rows[d].first = first;
    for (int s = first; s <= last; ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      rows[d].weights.push_back(std::max(0.0, overlap) / scale);
    }
  }
  return rows;
}

}  // namespace

std::vector<double> area_average(std::span<const double> src, int src_w, int src_h, int dst_w,
                                 int dst_h) {
  check_size(dst_w, dst_h);
  if (src_w == dst_w && src_h == dst_h) return {src.begin(), src.end()};
  const auto wx = area_weights(src_w, dst_w);
  const auto wy = area_weights(src_h, dst_h);
  std::vector<double> tmp(static_cast<std::size_t>(dst_w) * src_h, 0.0);
  for (int y = 0; y < src_h; ++y) {
    for (int x = 0; x < dst_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < wx[x].weights.size(); ++k) {
        acc += wx[x].weights[k] * src[static_cast<std::size_t>(y) * src_w + wx[x].first + k];
      }
      tmp[static_cast<std::size_t>(y) * dst_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(dst_w) * dst_h, 0.0);
  for (int y = 0; y < dst_h; ++y) {
    for (int x = 0; x < dst_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < wy[y].weights.size(); ++k) {
        acc += wy[y].weights[k] * tmp[static_cast<std::size_t>(wy[y].first + k) * dst_w + x];
      }
      out[static_cast<std::size_t>(y) * dst_w + x] = acc;
    }
  }
  return out;
}

}  // namespace bpr::resample
