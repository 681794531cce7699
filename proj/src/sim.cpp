#include "l2h/sim.hpp"

#include "l2h/kernels.hpp"

namespace l2h {

namespace {

void require_nonnegative_shift(int shift_s) {
  if (shift_s < 0) fail(ErrorCode::negative_shift, "shift must be >= 0");
}

}  // namespace

Raster zero_pad(const Raster& r, PadSide side, int shift_s) {
  require_nonnegative_shift(shift_s);
  Raster out(r.height, r.width + shift_s, r.channels);
  const int offset = side == PadSide::left ? shift_s : 0;
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < r.channels; ++c) out.at(y, x + offset, c) = r.at(y, x, c);
  return out;
}

Raster simulate_high_density(const Raster& image, const SimConfig& cfg) {
  require_nonnegative_shift(cfg.shift_s);
  Raster out(image.height, image.width + cfg.shift_s, image.channels);
  const float wl = static_cast<float>(cfg.blend_lambda);
  const float wr = static_cast<float>(1.0 - cfg.blend_lambda);
  pad_overlay(image.values.data(), image.height, image.width, image.channels, cfg.shift_s,
              wl, wr, out.values.data());
  return out;
}

Raster generate_gt(const Raster& gt, int shift_s) {
  require_nonnegative_shift(shift_s);
  Raster out(gt.height, gt.width + shift_s, gt.channels);
  pad_overlay(gt.values.data(), gt.height, gt.width, gt.channels, shift_s,
              1.0f, 1.0f, out.values.data());
  return out;
}

PointAnnotation shift_overlay_points(const PointAnnotation& ann, int shift_s) {
  require_nonnegative_shift(shift_s);
  PointAnnotation out;
  out.points.reserve(ann.points.size() * 2);
  for (const auto& [x, y] : ann.points) out.points.emplace_back(x, y);
  for (const auto& [x, y] : ann.points) out.points.emplace_back(x + shift_s, y);
  return out;
}

}  // namespace l2h
