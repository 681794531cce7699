#include "l2h/augment.hpp"

#include <algorithm>
#include <cmath>

#include "l2h/rng.hpp"

namespace l2h {

namespace {

Raster crop_raster(const Raster& img, int y0, int x0, int h, int w) {
  Raster out(h, w, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

void hflip_inplace(Raster& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width / 2; ++x)
      for (int c = 0; c < img.channels; ++c)
        std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

void clamp01(Raster& img) {
  for (auto& v : img.values) v = std::clamp(v, 0.0f, 1.0f);
}

void color_jitter(Raster& img, Rng& rng, const AugmentConfig& cfg) {
  const float b = static_cast<float>(rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness));
  const float c = static_cast<float>(rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast));
  const float s = static_cast<float>(rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation));

  double mean = 0.0;
  for (float v : img.values) mean += v;
  const float m = static_cast<float>(mean / img.values.size());

  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float gray = 0.0f;
      for (int ch = 0; ch < img.channels; ++ch) gray += img.at(y, x, ch);
      gray /= static_cast<float>(img.channels);
      for (int ch = 0; ch < img.channels; ++ch) {
        float v = img.at(y, x, ch) * b;
        v = m + c * (v - m);
        v = gray + s * (v - gray);
        img.at(y, x, ch) = v;
      }
    }
  clamp01(img);
}

void sharpen(Raster& img, double amount) {
  const Raster blurred = gaussian_blur(img, 1.0);
  for (std::size_t i = 0; i < img.values.size(); ++i)
    img.values[i] = img.values[i] + static_cast<float>(amount) * (img.values[i] - blurred.values[i]);
  clamp01(img);
}

void photometric(Raster& img, Rng& rng, const AugmentConfig& cfg) {
  if (rng.bernoulli(cfg.jitter_prob)) color_jitter(img, rng, cfg);
  if (rng.bernoulli(cfg.blur_prob)) {
    const double sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
    img = gaussian_blur(img, sigma);
    clamp01(img);
  }
  if (rng.bernoulli(cfg.sharpen_prob)) sharpen(img, rng.uniform(cfg.sharpen_min, cfg.sharpen_max));
}

}  // namespace

Raster gaussian_blur(const Raster& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : kernel) v = static_cast<float>(v / sum);

  const auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
  };

  Raster tmp(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float acc = 0.0f;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * img.at(y, reflect(x + k, img.width), c);
        tmp.at(y, x, c) = acc;
      }
  Raster out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float acc = 0.0f;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * tmp.at(reflect(y + k, img.height), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

AugmentedPair augment(const Raster& img, const PointAnnotation& ann, const AugmentConfig& cfg) {
  if (cfg.crop_h > img.height || cfg.crop_w > img.width)
    fail(ErrorCode::crop_too_large, "crop exceeds source dimensions");

  Rng rng(derive_seed(cfg.seed, "augment"));
  const int y0 = img.height == cfg.crop_h ? 0 : rng.uniform_int(0, img.height - cfg.crop_h);
  const int x0 = img.width == cfg.crop_w ? 0 : rng.uniform_int(0, img.width - cfg.crop_w);
  const bool flip = rng.bernoulli(cfg.hflip_prob);

  AugmentedPair out;
  Raster crop = crop_raster(img, y0, x0, cfg.crop_h, cfg.crop_w);
  if (flip) hflip_inplace(crop);

  for (const auto& [x, y] : ann.points) {
    const double cx = x - x0;
    const double cy = y - y0;
    if (cx < 0.0 || cx >= cfg.crop_w || cy < 0.0 || cy >= cfg.crop_h) continue;
    // Pixel-center reflection; x within 1px of the right edge would map
    // negative, so clamp to keep the bounds invariant and the point count.
    const double fx = flip ? std::max(0.0, cfg.crop_w - 1 - cx) : cx;
    out.cropped.points.emplace_back(fx, cy);
  }

  out.view1 = crop;
  out.view2 = std::move(crop);
  Rng rng1(derive_seed(cfg.seed, "photometric", 1));
  Rng rng2(derive_seed(cfg.seed, "photometric", 2));
  photometric(out.view1, rng1, cfg);
  photometric(out.view2, rng2, cfg);
  return out;
}

}  // namespace l2h
