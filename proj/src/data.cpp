#include "l2h/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "l2h/rng.hpp"

namespace l2h {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<DatasetRecord> load_annotations(const std::string& path, Split split) {
  if (!fs::exists(path)) fail(ErrorCode::missing_file, "annotation file not found: " + path);
  std::ifstream in(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_error, "invalid JSON in " + path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("images"))
    fail(ErrorCode::schema_error, "missing field 'images' in " + path);
  if (!doc["images"].is_array())
    fail(ErrorCode::schema_error, "field 'images' must be an array in " + path);

  const fs::path base = fs::path(path).parent_path();
  std::vector<DatasetRecord> records;
  for (const auto& entry : doc["images"]) {
    DatasetRecord rec;
    rec.split = split;
    for (const char* field : {"path", "height", "width", "points"})
      if (!entry.contains(field))
        fail(ErrorCode::schema_error, std::string("missing field '") + field + "' in " + path);
    if (!entry["path"].is_string()) fail(ErrorCode::schema_error, "field 'path' must be a string");
    if (!entry["height"].is_number_integer() || !entry["width"].is_number_integer())
      fail(ErrorCode::schema_error, "fields 'height'/'width' must be integers");
    rec.image_path = (base / entry["path"].get<std::string>()).string();
    rec.height = entry["height"].get<int>();
    rec.width = entry["width"].get<int>();
    if (rec.height <= 0 || rec.width <= 0)
      fail(ErrorCode::schema_error, "non-positive dimensions for " + rec.image_path);
    if (!fs::exists(rec.image_path))
      fail(ErrorCode::missing_file, "image not found: " + rec.image_path);
    if (!entry["points"].is_array())
      fail(ErrorCode::schema_error, "field 'points' must be an array");
    std::size_t index = 0;
    for (const auto& pt : entry["points"]) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
        fail(ErrorCode::schema_error, "field 'points' entries must be [x, y] pairs");
      const double x = pt[0].get<double>();
      const double y = pt[1].get<double>();
      if (!(x >= 0.0 && x < rec.width && y >= 0.0 && y < rec.height))
        fail(ErrorCode::out_of_bounds_point,
             "image " + rec.image_path + ", point " + std::to_string(index));
      rec.annotation.points.emplace_back(x, y);
      ++index;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_annotations(const std::string& path, const std::vector<DatasetRecord>& records) {
  const fs::path base = fs::path(path).parent_path();
  json images = json::array();
  for (const auto& rec : records) {
    json pts = json::array();
    for (const auto& [x, y] : rec.annotation.points) pts.push_back({x, y});
    images.push_back({{"path", fs::proximate(rec.image_path, base).generic_string()},
                      {"height", rec.height},
                      {"width", rec.width},
                      {"points", std::move(pts)}});
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path);
  out << json{{"images", std::move(images)}}.dump(2) << "\n";
}

Raster points_to_density(const PointAnnotation& ann, int height, int width, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::invalid_sigma, "sigma must be positive");
  Raster density(height, width, 1);
  const double radius = 4.0 * sigma;
  const double radius_sq = radius * radius;
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);

  std::vector<double> weights;
  for (std::size_t i = 0; i < ann.points.size(); ++i) {
    const auto [px, py] = ann.points[i];
    if (!(px >= 0.0 && px < width && py >= 0.0 && py < height))
      fail(ErrorCode::out_of_bounds_point, "point " + std::to_string(i));
    const int x0 = std::max(0, static_cast<int>(std::ceil(px - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(px + radius)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(py - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(py + radius)));

    weights.clear();
    double mass = 0.0;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - px;
        const double dy = y - py;
        const double d2 = dx * dx + dy * dy;
        const double w = d2 <= radius_sq ? std::exp(-d2 * inv_two_sigma_sq) : 0.0;
        weights.push_back(w);
        mass += w;
      }
    }
    // Renormalize over the truncated, clipped support: unit mass per head.
    std::size_t k = 0;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        density.at(y, x) += static_cast<float>(weights[k++] / mass);
  }
  return density;
}

double density_count(const Raster& density) { return raster_sum(density); }

namespace {

void render_background(Raster& img, BackgroundTexture texture, Rng& rng) {
  const float base = 0.82f;
  switch (texture) {
    case BackgroundTexture::flat:
      std::fill(img.values.begin(), img.values.end(), base);
      break;
    case BackgroundTexture::noise:
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const float v = base + static_cast<float>(rng.uniform(-0.06, 0.06));
          for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = v;
        }
      break;
    case BackgroundTexture::gradient: {
      const double angle = rng.uniform(0.0, 6.283185307179586);
      const double gx = std::cos(angle), gy = std::sin(angle);
      const double diag = std::hypot(img.width, img.height);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const float v =
              base + 0.12f * static_cast<float>((gx * x + gy * y) / diag - 0.5);
          for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = v;
        }
      break;
    }
  }
}

// Shaded disc with a soft 1px edge, alpha-blended over the background.
void render_head(Raster& img, double cx, double cy, double radius, const float color[3]) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      if (cover <= 0.0) continue;
      // Brighter toward the center so heads read as shaded spheres.
      const float shade = static_cast<float>(1.0 - 0.5 * (d / radius) * (d / radius));
      for (int c = 0; c < img.channels; ++c) {
        const float head = color[c] * shade;
        img.at(y, x, c) = static_cast<float>((1.0 - cover) * img.at(y, x, c) + cover * head);
      }
    }
  }
}

}  // namespace

std::pair<Raster, PointAnnotation> generate_synthetic_scene(const SynthConfig& cfg) {
  if (cfg.min_heads < 0 || cfg.max_heads < cfg.min_heads)
    fail(ErrorCode::bad_dims, "invalid head count range");
  if (cfg.min_radius < 1.0 || cfg.max_radius < cfg.min_radius)
    fail(ErrorCode::bad_dims, "invalid head radius range");

  Rng rng(derive_seed(cfg.seed, "synth-scene"));
  Raster img(cfg.canvas_h, cfg.canvas_w, 3);
  render_background(img, cfg.background, rng);

  const int target = cfg.min_heads == cfg.max_heads
                         ? cfg.min_heads
                         : rng.uniform_int(cfg.min_heads, cfg.max_heads);

  struct Head {
    double x, y, r;
  };
  std::vector<Head> heads;
  const int max_tries_per_head = 1000;
  for (int i = 0; i < target; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < max_tries_per_head && !placed; ++attempt) {
      const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
      if (cfg.canvas_w - 2.0 * r <= 1.0 || cfg.canvas_h - 2.0 * r <= 1.0) continue;
      const double x = rng.uniform(r, cfg.canvas_w - 1.0 - r);
      const double y = rng.uniform(r, cfg.canvas_h - 1.0 - r);
      // Limited overlap: separation_factor scales the minimum center distance.
      bool ok = true;
      for (const Head& h : heads) {
        if (std::hypot(x - h.x, y - h.y) < cfg.separation_factor * std::max(r, h.r)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        heads.push_back({x, y, r});
        placed = true;
      }
    }
    if (!placed)
      fail(ErrorCode::infeasible_packing,
           "placed " + std::to_string(heads.size()) + " of " + std::to_string(target) + " heads");
  }

  PointAnnotation ann;
  for (const Head& h : heads) {
    float color[3];
    const float tone = static_cast<float>(rng.uniform(0.10, 0.35));
    color[0] = tone + static_cast<float>(rng.uniform(0.0, 0.08));
    color[1] = tone;
    color[2] = tone + static_cast<float>(rng.uniform(-0.04, 0.04));
    render_head(img, h.x, h.y, h.r, color);
    ann.points.emplace_back(h.x, h.y);
  }
  return {std::move(img), std::move(ann)};
}

std::vector<std::pair<Raster, PointAnnotation>> generate_split(const SynthDatasetConfig& cfg,
                                                               Split split) {
  const SynthSplitConfig& sc = split == Split::train ? cfg.train : cfg.test;
  const char* tag = split == Split::train ? "split-train" : "split-test";
  std::vector<std::pair<Raster, PointAnnotation>> out;
  out.reserve(sc.count);
  for (int i = 0; i < sc.count; ++i) {
    SynthConfig scene = cfg.scene;
    scene.min_heads = sc.heads_min;
    scene.max_heads = sc.heads_max;
    scene.separation_factor = sc.separation_factor;
    scene.seed = derive_seed(cfg.seed, tag, static_cast<std::uint64_t>(i));
    out.push_back(generate_synthetic_scene(scene));
  }
  return out;
}

void write_synthetic_dataset(const std::string& dir, const SynthDatasetConfig& cfg) {
  for (Split split : {Split::train, Split::test}) {
    const std::string split_dir = dir + (split == Split::train ? "/train" : "/test");
    std::error_code ec;
    fs::create_directories(split_dir + "/images", ec);
    if (ec) fail(ErrorCode::io_error, "cannot create " + split_dir);

    auto scenes = generate_split(cfg, split);
    std::vector<DatasetRecord> records;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "images/%04zu.png", i);
      DatasetRecord rec;
      rec.image_path = split_dir + "/" + name;
      rec.height = scenes[i].first.height;
      rec.width = scenes[i].first.width;
      rec.annotation = std::move(scenes[i].second);
      rec.split = split;
      write_png(rec.image_path, scenes[i].first);
      records.push_back(std::move(rec));
    }
    write_annotations(split_dir + "/annotations.json", records);
  }
}

}  // namespace l2h
