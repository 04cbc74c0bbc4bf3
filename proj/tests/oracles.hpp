#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "bpr/extract.hpp"
#include "bpr/maskcore.hpp"

namespace bpr::testing {

inline BinaryMask random_mask(std::mt19937& rng, int w, int h, double density) {
  std::bernoulli_distribution coin(density);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, coin(rng));
  }
  return m;
}

// Random union of axis-aligned rectangles; smoother than i.i.d. noise.
inline BinaryMask random_blocky_mask(std::mt19937& rng, int w, int h, int rects) {
  BinaryMask m(w, h);
  std::uniform_int_distribution<int> ux(0, w - 1);
  std::uniform_int_distribution<int> uy(0, h - 1);
  for (int r = 0; r < rects; ++r) {
    int x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) m.set(x, y, true);
    }
  }
  return m;
}

inline std::vector<PixelCoord> brute_boundary(const BinaryMask& m) {
  std::vector<PixelCoord> out;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      bool edge = false;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k];
        const int ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height() || !m.at(nx, ny)) edge = true;
      }
      if (edge) out.push_back({x, y});
    }
  }
  return out;
}

inline std::vector<double> brute_distance(int w, int h, const std::vector<PixelCoord>& seeds) {
  std::vector<double> out(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double& best = out[static_cast<std::size_t>(y) * w + x];
      for (const auto& s : seeds) best = std::min(best, std::hypot(double(x - s.x), double(y - s.y)));
    }
  }
  return out;
}

inline BinaryMask brute_morph(const BinaryMask& m, MorphOp op, int r) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool v = op == MorphOp::Erode;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
          if (op == MorphOp::Dilate && m.at(nx, ny)) v = true;
          if (op == MorphOp::Erode && !m.at(nx, ny)) v = false;
        }
      }
      out.set(x, y, v);
    }
  }
  return out;
}

inline double brute_iou(const BinaryMask& a, const BinaryMask& b) {
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      inter += a.at(x, y) && b.at(x, y);
      uni += a.at(x, y) || b.at(x, y);
    }
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

// Rasterized overlap of two squares, counted cell by cell.
inline double brute_box_iou(const SquareBox& a, const SquareBox& b) {
  std::int64_t inter = 0;
  for (int y = a.y; y < a.y + a.size; ++y) {
    for (int x = a.x; x < a.x + a.size; ++x) {
      inter += (x >= b.x && x < b.x + b.size && y >= b.y && y < b.y + b.size) ? 1 : 0;
    }
  }
  const std::int64_t uni = std::int64_t{a.size} * a.size + std::int64_t{b.size} * b.size - inter;
  return double(inter) / double(uni);
}

// Precision averaged over recall levels 0.00..1.00 from a ranked TP/FP list.
inline double brute_ap_101(const std::vector<bool>& ranked_tp, int num_gt) {
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    // Interpolated precision: max precision at any rank with recall >= level.
    double best = 0.0;
    int tp = 0;
    for (std::size_t k = 0; k < ranked_tp.size(); ++k) {
      tp += ranked_tp[k] ? 1 : 0;
      const double recall = double(tp) / num_gt;
      const double precision = double(tp) / double(k + 1);
      if (recall + 1e-12 >= level) best = std::max(best, precision);
    }
    sum += best;
  }
  return sum / 101.0;
}

}  // namespace bpr::testing
