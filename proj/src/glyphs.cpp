#include "pf/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pf/errors.hpp"

namespace pf::glyphs {

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

Stroke ellipse(double cx, double cy, double rx, double ry, double from = 0.0, double to = 360.0,
               int steps = 20) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double a = (from + (to - from) * i / steps) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Unit box, y pointing down.
std::vector<Stroke> strokes(int digit) {
  switch (digit) {
    case 0: return {ellipse(0.5, 0.5, 0.2, 0.33)};
    case 1: return {{{0.38, 0.28}, {0.53, 0.15}, {0.53, 0.86}}};
    case 2:
      return {{{0.28, 0.3}, {0.34, 0.19}, {0.5, 0.14}, {0.65, 0.19}, {0.71, 0.31}, {0.66, 0.46},
               {0.28, 0.85}, {0.75, 0.85}}};
    case 3:
      return {{{0.28, 0.2}, {0.45, 0.14}, {0.64, 0.17}, {0.7, 0.3}, {0.62, 0.44}, {0.45, 0.48}},
              {{0.45, 0.48}, {0.65, 0.53}, {0.72, 0.67}, {0.65, 0.81}, {0.47, 0.86}, {0.27, 0.8}}};
    case 4: return {{{0.63, 0.86}, {0.63, 0.14}, {0.25, 0.62}, {0.78, 0.62}}};
    case 5:
      return {{{0.7, 0.15}, {0.33, 0.15}, {0.3, 0.46}, {0.5, 0.42}, {0.67, 0.5}, {0.72, 0.66},
               {0.64, 0.81}, {0.46, 0.86}, {0.28, 0.8}}};
    case 6: {
      Stroke s{{0.66, 0.15}, {0.48, 0.22}, {0.35, 0.4}, {0.3, 0.62}};
      Stroke loop = ellipse(0.5, 0.66, 0.2, 0.2, 180.0, 540.0);
      s.insert(s.end(), loop.begin(), loop.end());
      return {s};
    }
    case 7: return {{{0.26, 0.15}, {0.75, 0.15}, {0.58, 0.5}, {0.45, 0.86}}};
    case 8: return {ellipse(0.5, 0.32, 0.16, 0.17), ellipse(0.5, 0.67, 0.2, 0.19)};
    case 9: {
      Stroke s = ellipse(0.5, 0.34, 0.19, 0.19, 0.0, 360.0);
      Stroke stem{{0.69, 0.34}, {0.66, 0.6}, {0.52, 0.86}};
      return {s, stem};
    }
    default: throw ValidationError("glyphs: digit must be in [0, 9]");
  }
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

struct Affine {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;  // unit box -> pixels
  Pt apply(Pt p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
};

std::vector<float> rasterize(int digit, const Affine& m, double thickness) {
  std::vector<float> img(kSide * kSide, 0.0f);
  const double half = thickness / 2.0;
  for (const Stroke& s : strokes(digit)) {
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      const Pt a = m.apply(s[k]), b = m.apply(s[k + 1]);
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half - 1)));
      const int x1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half + 1)));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half - 1)));
      const int y1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half + 1)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double dist = segment_distance({x + 0.5, y + 0.5}, a, b);
          const float v = static_cast<float>(std::clamp(half + 0.5 - dist, 0.0, 1.0));
          float& px = img[static_cast<std::size_t>(y * kSide + x)];
          px = std::max(px, v);
        }
    }
  }
  return img;
}

Affine base_transform(double scale, double angle, double shear, double dx, double dy) {
  // The glyph box maps onto the central 20x20 pixels, as in MNIST.
  const double s = 20.0 * scale;
  const double ca = std::cos(angle), sa = std::sin(angle);
  Affine m;
  m.a = s * (ca + shear * sa);
  m.b = s * (-sa + shear * ca);
  m.c = s * sa;
  m.d = s * ca;
  // keep the box centre (0.5, 0.5) at the image centre plus the offset
  m.tx = 14.0 + dx - (m.a * 0.5 + m.b * 0.5);
  m.ty = 14.0 + dy - (m.c * 0.5 + m.d * 0.5);
  return m;
}

}  // namespace

std::vector<float> render_digit(int digit, Rng& rng) {
  const double scale = 0.85 + 0.25 * rng.uniform();
  const double angle = (rng.uniform() - 0.5) * 0.35;
  const double shear = (rng.uniform() - 0.5) * 0.4;
  const double dx = (rng.uniform() - 0.5) * 4.0;
  const double dy = (rng.uniform() - 0.5) * 4.0;
  const double thickness = 1.6 + 1.2 * rng.uniform();
  return rasterize(digit, base_transform(scale, angle, shear, dx, dy), thickness);
}

std::vector<float> render_digit_clean(int digit) {
  return rasterize(digit, base_transform(1.0, 0.0, 0.0, 0.0, 0.0), 2.2);
}

}  // namespace pf::glyphs
