#pragma once

#include <string>
#include <vector>

#include "l2h/errors.hpp"

namespace l2h {

// Dense H x W x C grid of reals, row-major with interleaved channels.
// Images are 1- or 3-channel with values in [0,1]; density maps and spatial
// activation maps are single-channel and non-negative.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> values;

  Raster() = default;
  Raster(int h, int w, int c = 1)
      : height(h), width(w), channels(c),
        values(static_cast<std::size_t>(h) * w * c, 0.0f) {}

  float& at(int y, int x, int c = 0) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c = 0) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t numel() const { return values.size(); }

  bool all_finite() const;
  bool all_nonnegative() const;
};

// Grid sum, accumulated in double.
double raster_sum(const Raster& r);

// 8-bit PNG, 1 (gray) or 3 (RGB) channels; decoded to [0,1].
Raster read_png(const std::string& path);
void write_png(const std::string& path, const Raster& img);

// Density raster file: 16-byte header (magic "L2HD", u32le height, u32le
// width, u32le reserved=0) followed by row-major little-endian f32 values.
// Single channel only. Round-trips bitwise.
Raster read_density_file(const std::string& path);
void write_density_file(const std::string& path, const Raster& density);

// Zero-pads on the right/bottom so both dims are multiples of `multiple`.
Raster pad_to_multiple(const Raster& r, int multiple);

}  // namespace l2h
