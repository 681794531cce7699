#pragma once

#include <cstdint>

#include "l2h/data.hpp"

namespace l2h {

struct AugmentConfig {
  int crop_h = 320;
  int crop_w = 320;
  double hflip_prob = 0.5;
  // Photometric transforms, each with its parameter range.
  double jitter_prob = 0.8;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
  double blur_prob = 0.3;
  double blur_sigma_min = 0.3;
  double blur_sigma_max = 1.2;
  double sharpen_prob = 0.3;
  double sharpen_min = 0.5;
  double sharpen_max = 1.5;
  std::uint64_t seed = 0;
};

struct AugmentedPair {
  Raster view1, view2;       // photometric variants of the same crop
  PointAnnotation cropped;   // annotation in crop coordinates
};

// One geometric crop + flip applied identically to both views and the
// annotation; photometric transforms drawn independently per view.
// Deterministic per cfg.seed. A point survives the crop iff its center lies
// inside; flipped x maps to crop_w - 1 - x.
AugmentedPair augment(const Raster& img, const PointAnnotation& ann, const AugmentConfig& cfg);

// Separable Gaussian blur with reflected borders, used by the photometric
// transforms and exposed for tests.
Raster gaussian_blur(const Raster& img, double sigma);

}  // namespace l2h
