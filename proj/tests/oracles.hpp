// Brute-force reference implementations used by the unit and acceptance
// tests. They are written independently of the library code paths they
// check: plain loops, no shared helpers.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cratergan/common.hpp"
#include "cratergan/ingest.hpp"

namespace oracle {

struct Counts {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count_pixels(const cratergan::Grid<std::uint8_t>& pred,
                           const cratergan::Grid<std::uint8_t>& gt) {
  Counts c;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const bool p = pred.at(x, y) != 0;
      const bool g = gt.at(x, y) != 0;
      if (p && g) c.tp += 1;
      if (p && !g) c.fp += 1;
      if (!p && g) c.fn += 1;
      if (!p && !g) c.tn += 1;
    }
  }
  return c;
}

inline double ratio(double num, double den, double on_zero) { return den == 0 ? on_zero : num / den; }

// accuracy, f1, iou, precision, recall, specificity
inline std::array<double, 6> metrics(const Counts& c, double on_zero = 1.0) {
  const double precision = ratio(c.tp, c.tp + c.fp, on_zero);
  const double recall = ratio(c.tp, c.tp + c.fn, on_zero);
  return {ratio(c.tp + c.tn, c.tp + c.fp + c.fn + c.tn, on_zero),
          ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, on_zero),
          ratio(c.tp, c.tp + c.fp + c.fn, on_zero),
          precision,
          recall,
          ratio(c.tn, c.tn + c.fp, on_zero)};
}

inline cratergan::Grid<std::uint8_t> random_mask(int w, int h, double p, cratergan::Rng& rng) {
  cratergan::Grid<std::uint8_t> g(w, h);
  for (auto& v : g.data) v = rng.uniform() < p ? 1 : 0;
  return g;
}

// Pixel (x, y) is inside a circle iff its center is within r.
inline cratergan::Grid<std::uint8_t> disk_mask(const std::vector<cratergan::PixelCircle>& cs,
                                               int w, int h) {
  cratergan::Grid<std::uint8_t> g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const auto& c : cs) {
        const double dx = x + 0.5 - c.cx, dy = y + 0.5 - c.cy;
        if (dx * dx + dy * dy <= c.r * c.r) {
          g.at(x, y) = 1;
          break;
        }
      }
    }
  }
  return g;
}

// Does the disk meet the rectangle [x0, x0+w] x [y0, y0+h]? Checked by
// dense sampling of the rectangle boundary and interior test of the center.
inline bool disk_meets_rect(const cratergan::PixelCircle& c, double x0, double y0, double w,
                            double h) {
  if (c.cx >= x0 && c.cx <= x0 + w && c.cy >= y0 && c.cy <= y0 + h) return true;
  const int n = 4000;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const std::array<std::array<double, 2>, 4> pts = {{{x0 + t * w, y0},
                                                       {x0 + t * w, y0 + h},
                                                       {x0, y0 + t * h},
                                                       {x0 + w, y0 + t * h}}};
    for (const auto& p : pts) {
      const double dx = p[0] - c.cx, dy = p[1] - c.cy;
      if (dx * dx + dy * dy < c.r * c.r) return true;
    }
  }
  return false;
}

// Bilinear height sample at a real-valued position (pixel centers at +0.5).
inline double sample(const cratergan::Grid<double>& hf, double px, double py) {
  const double fx = std::clamp(px - 0.5, 0.0, hf.width - 1.0);
  const double fy = std::clamp(py - 0.5, 0.0, hf.height - 1.0);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, hf.width - 1), y1 = std::min(y0 + 1, hf.height - 1);
  const double tx = fx - x0, ty = fy - y0;
  return (1 - ty) * ((1 - tx) * hf.at(x0, y0) + tx * hf.at(x1, y0)) +
         ty * ((1 - tx) * hf.at(x0, y1) + tx * hf.at(x1, y1));
}

// Mean height on the ring of radius factor * r around (cx, cy).
inline double ring_mean(const cratergan::Grid<double>& hf, double cx, double cy, double r,
                        double factor = 1.5, int n = 64) {
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * M_PI * i / n;
    sum += sample(hf, cx + factor * r * std::cos(a), cy + factor * r * std::sin(a));
  }
  return sum / n;
}

// Two-sided KS statistic between a sample and an analytic CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace oracle
