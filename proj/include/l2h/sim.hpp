#pragma once

#include "l2h/data.hpp"
#include "l2h/raster.hpp"

namespace l2h {

enum class PadSide { left, right };

// Shift S in pixels and blend ratio lambda: the full parameterization of the
// high-density simulation and its ground-truth transform.
struct SimConfig {
  int shift_s = 0;
  double blend_lambda = 0.5;
};

// Widens the raster by S columns of zeros. Left padding places the original
// content at column offset S; right padding leaves it at column 0.
Raster zero_pad(const Raster& r, PadSide side, int shift_s);

// lambda * padLeft(I,S) + (1-lambda) * padRight(I,S). Output is
// H x (W+S) x C; a [0,1] input stays in [0,1].
Raster simulate_high_density(const Raster& image, const SimConfig& cfg);

// padLeft(GT,S) + padRight(GT,S) with unit weights, so the count doubles
// exactly. No lambda here, deliberately asymmetric with the image transform.
Raster generate_gt(const Raster& gt, int shift_s);

// Point-domain mirror of the ground-truth transform:
// {(x,y)} union {(x+S,y)} as a multiset.
PointAnnotation shift_overlay_points(const PointAnnotation& ann, int shift_s);

}  // namespace l2h
