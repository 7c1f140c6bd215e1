#pragma once
// Stroke-drawn digits 0-9 with random affine jitter, antialiased on a 28x28
// grid. A stand-in for handwritten digits when no IDX files are supplied.

#include <vector>

#include "pf/rng.hpp"

namespace pf::glyphs {

inline constexpr int kSide = 28;

// 784 grayscale values in [0, 1], row-major.
std::vector<float> render_digit(int digit, Rng& rng);

// Same glyph without jitter (used to eyeball the stroke tables).
std::vector<float> render_digit_clean(int digit);

}  // namespace pf::glyphs
