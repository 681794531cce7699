#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "l2h/raster.hpp"

namespace l2h {

// Sub-pixel head-center coordinates, origin top-left, x rightward.
// Valid points satisfy 0 <= x < width and 0 <= y < height of the paired image.
struct PointAnnotation {
  std::vector<std::pair<double, double>> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class Split { train, test };

struct DatasetRecord {
  std::string image_path;  // resolved relative to the annotation file
  int height = 0;
  int width = 0;
  PointAnnotation annotation;
  Split split = Split::train;
};

// Annotation JSON: {"images": [{"path": str, "height": int, "width": int,
// "points": [[x, y], ...]}]}. Image paths are resolved against the JSON
// file's directory and must exist.
std::vector<DatasetRecord> load_annotations(const std::string& path, Split split = Split::train);

void write_annotations(const std::string& path, const std::vector<DatasetRecord>& records);

// Renders each head as a truncated Gaussian blob (radius 4*sigma), weights
// computed in double and renormalized over the in-bounds support so every
// head carries exactly unit mass, boundary heads included.
Raster points_to_density(const PointAnnotation& ann, int height, int width, double sigma = 4.0);

// Count of a density map = grid sum (double accumulation).
double density_count(const Raster& density);

enum class BackgroundTexture { flat, noise, gradient };

struct SynthConfig {
  int canvas_h = 384;
  int canvas_w = 384;
  int min_heads = 5;
  int max_heads = 15;
  double min_radius = 4.0;
  double max_radius = 9.0;
  // Minimum center distance between heads = separation_factor * max(r_i, r_j).
  // >= 2 forbids overlap entirely; < 1 packs heads into partial occlusion.
  double separation_factor = 1.0;
  BackgroundTexture background = BackgroundTexture::noise;
  std::uint64_t seed = 0;
};

// Deterministic synthetic crowd scene: disc-like heads with limited overlap
// on a textured background. Annotation lists the true centers.
// Throws InfeasiblePacking when the configured count cannot be placed.
std::pair<Raster, PointAnnotation> generate_synthetic_scene(const SynthConfig& cfg);

struct SynthSplitConfig {
  int count = 0;
  int heads_min = 0;
  int heads_max = 0;
  double separation_factor = 1.0;
};

struct SynthDatasetConfig {
  SynthConfig scene;  // canvas, radii, texture; per-split head counts below
  SynthSplitConfig train{64, 5, 15};
  SynthSplitConfig test{32, 40, 80};
  std::uint64_t seed = 0;
};

// In-memory split: scene i uses a seed derived from (seed, split-tag, i).
std::vector<std::pair<Raster, PointAnnotation>> generate_split(const SynthDatasetConfig& cfg,
                                                               Split split);

// dir/{train,test}/images/NNNN.png plus dir/{split}/annotations.json.
void write_synthetic_dataset(const std::string& dir, const SynthDatasetConfig& cfg);

}  // namespace l2h
