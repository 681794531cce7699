#include <doctest.h>

#include <cmath>
#include <fstream>

#include "l2h/data.hpp"
#include "test_util.hpp"

using namespace l2h;
using testutil::TempDir;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("load_annotations: empty image list gives an empty result") {
  TempDir dir("ann_empty");
  write_text(dir.path() + "/a.json", R"({"images": []})");
  CHECK(load_annotations(dir.path() + "/a.json").empty());
}

TEST_CASE("load_annotations: two images with 3 and 0 points") {
  TempDir dir("ann_two");
  write_png(dir.path() + "/i0.png", Raster(8, 10, 1));
  write_png(dir.path() + "/i1.png", Raster(8, 10, 3));
  write_text(dir.path() + "/a.json", R"({"images": [
    {"path": "i0.png", "height": 8, "width": 10,
     "points": [[1.5, 2.0], [0.0, 0.0], [9.5, 7.5]]},
    {"path": "i1.png", "height": 8, "width": 10, "points": []}
  ]})");
  const auto records = load_annotations(dir.path() + "/a.json");
  REQUIRE(records.size() == 2);
  CHECK(records[0].annotation.size() == 3);
  CHECK(records[1].annotation.size() == 0);
}

TEST_CASE("load_annotations: boundary is exclusive, x == width rejected") {
  TempDir dir("ann_oob");
  write_png(dir.path() + "/i.png", Raster(8, 10, 1));
  write_text(dir.path() + "/a.json", R"({"images": [
    {"path": "i.png", "height": 8, "width": 10, "points": [[10.0, 2.0]]}
  ]})");
  try {
    load_annotations(dir.path() + "/a.json");
    FAIL("expected OutOfBoundsPoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::out_of_bounds_point);
    CHECK(std::string(e.what()).find("point 0") != std::string::npos);
  }
}

TEST_CASE("load_annotations error classes: missing file, schema, missing image") {
  TempDir dir("ann_err");
  try {
    load_annotations(dir.path() + "/nope.json");
    FAIL("expected MissingFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_file);
  }

  write_text(dir.path() + "/bad.json", R"({"imgs": []})");
  try {
    load_annotations(dir.path() + "/bad.json");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema_error);
    CHECK(std::string(e.what()).find("images") != std::string::npos);
  }

  write_text(dir.path() + "/miss.json",
             R"({"images": [{"path": "gone.png", "height": 4, "width": 4, "points": []}]})");
  CHECK_THROWS_AS(load_annotations(dir.path() + "/miss.json"), Error);
}

TEST_CASE("points_to_density: empty annotation gives a zero raster") {
  const Raster d = points_to_density({}, 16, 16, 4.0);
  CHECK(density_count(d) == 0.0);
  CHECK(d.all_nonnegative());
}

TEST_CASE("points_to_density: interior point carries unit mass") {
  PointAnnotation ann;
  ann.points.emplace_back(32.0, 30.0);
  const Raster d = points_to_density(ann, 64, 64, 4.0);
  CHECK(std::abs(density_count(d) - 1.0) < 1e-6);
}

TEST_CASE("points_to_density: corner point keeps unit mass despite truncation") {
  PointAnnotation ann;
  ann.points.emplace_back(0.0, 0.0);
  const Raster d = points_to_density(ann, 64, 64, 4.0);
  // Brute-force oracle: sum of the written raster.
  double sum = 0.0;
  for (float v : d.values) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-6);
}

TEST_CASE("points_to_density: invalid sigma and out-of-bounds points") {
  PointAnnotation ann;
  ann.points.emplace_back(1.0, 1.0);
  CHECK_THROWS_AS(points_to_density(ann, 8, 8, 0.0), Error);
  ann.points.emplace_back(8.0, 1.0);
  CHECK_THROWS_AS(points_to_density(ann, 8, 8, 4.0), Error);
}

TEST_CASE("density_count hand cases") {
  Raster zero(5, 5, 1);
  CHECK(density_count(zero) == 0.0);

  Raster d(2, 2, 1);
  d.at(0, 0) = 0.5f;
  d.at(0, 1) = 0.5f;
  d.at(1, 0) = 1.0f;
  CHECK(density_count(d) == doctest::Approx(2.0).epsilon(1e-12));

  PointAnnotation ann;
  Rng rng(3);
  for (int i = 0; i < 7; ++i) ann.points.emplace_back(rng.uniform(0.0, 48.0), rng.uniform(0.0, 48.0));
  CHECK(std::abs(density_count(points_to_density(ann, 48, 48, 4.0)) - 7.0) < 1e-5);
}

TEST_CASE("mass conservation over random annotations") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(0, 40);
    const int h = rng.uniform_int(16, 96), w = rng.uniform_int(16, 96);
    PointAnnotation ann;
    for (int i = 0; i < n; ++i)
      ann.points.emplace_back(rng.uniform(0.0, w - 1e-3), rng.uniform(0.0, h - 1e-3));
    const double count = density_count(points_to_density(ann, h, w, 4.0));
    CHECK(std::abs(count - n) < 1e-5 * std::max(1.0, static_cast<double>(n)));
  }
}

TEST_CASE("linearity: disjoint point sets densify additively") {
  Rng rng(5);
  PointAnnotation a, b, both;
  for (int i = 0; i < 6; ++i) a.points.emplace_back(rng.uniform(0, 63), rng.uniform(0, 63));
  for (int i = 0; i < 5; ++i) b.points.emplace_back(rng.uniform(0, 63), rng.uniform(0, 63));
  both.points = a.points;
  both.points.insert(both.points.end(), b.points.begin(), b.points.end());
  const Raster da = points_to_density(a, 64, 64, 4.0);
  const Raster db = points_to_density(b, 64, 64, 4.0);
  const Raster dboth = points_to_density(both, 64, 64, 4.0);
  for (std::size_t i = 0; i < dboth.values.size(); ++i)
    CHECK(std::abs(dboth.values[i] - (da.values[i] + db.values[i])) < 1e-6);
}

TEST_CASE("translation equivariance for interior integer shifts") {
  PointAnnotation a, b;
  a.points.emplace_back(24.5, 25.25);
  b.points.emplace_back(24.5 + 5, 25.25 + 3);
  const Raster da = points_to_density(a, 80, 80, 4.0);
  const Raster db = points_to_density(b, 80, 80, 4.0);
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 80; ++x)
      if (y >= 3 && x >= 5) CHECK(db.at(y, x) == da.at(y - 3, x - 5));
}

TEST_CASE("synthetic scenes: empty, deterministic, exact count") {
  SynthConfig cfg;
  cfg.canvas_h = 64;
  cfg.canvas_w = 64;
  cfg.min_radius = 3.0;
  cfg.max_radius = 5.0;
  cfg.seed = 9;

  cfg.min_heads = cfg.max_heads = 0;
  const auto [img0, ann0] = generate_synthetic_scene(cfg);
  CHECK(ann0.empty());
  CHECK(img0.all_finite());

  cfg.min_heads = cfg.max_heads = 10;
  cfg.seed = 1;
  const auto [img_a, ann_a] = generate_synthetic_scene(cfg);
  const auto [img_b, ann_b] = generate_synthetic_scene(cfg);
  CHECK(ann_a.size() == 10);
  CHECK(ann_a.points == ann_b.points);
  CHECK(img_a.values == img_b.values);

  // Every center in bounds.
  for (const auto& [x, y] : ann_a.points) {
    CHECK(x >= 0.0);
    CHECK(x < 64.0);
    CHECK(y >= 0.0);
    CHECK(y < 64.0);
  }
}

TEST_CASE("synthetic scenes: infeasible packing reported") {
  SynthConfig cfg;
  cfg.canvas_h = 32;
  cfg.canvas_w = 32;
  cfg.min_heads = cfg.max_heads = 400;
  cfg.min_radius = cfg.max_radius = 8.0;
  cfg.seed = 2;
  CHECK_THROWS_AS(generate_synthetic_scene(cfg), Error);
}

TEST_CASE("density file round-trips bitwise") {
  TempDir dir("l2hd");
  Rng rng(6);
  Raster d = testutil::random_raster(13, 17, 1, rng, 0.0f, 3.0f);
  const std::string path = dir.path() + "/d.l2hd";
  write_density_file(path, d);
  const Raster back = read_density_file(path);
  CHECK(back.height == 13);
  CHECK(back.width == 17);
  CHECK(back.values == d.values);

  // Header check: magic + dims.
  std::ifstream in(path, std::ios::binary);
  char head[16];
  in.read(head, 16);
  CHECK(std::string(head, 4) == "L2HD");
}

TEST_CASE("PNG round-trip preserves 8-bit quantized values") {
  TempDir dir("png");
  Rng rng(7);
  for (int channels : {1, 3}) {
    Raster img = testutil::random_raster(9, 11, channels, rng);
    // Snap to the 8-bit grid so the round trip is exact.
    for (auto& v : img.values) v = std::round(v * 255.0f) / 255.0f;
    const std::string path = dir.path() + "/img.png";
    write_png(path, img);
    const Raster back = read_png(path);
    CHECK(back.channels == channels);
    REQUIRE(back.values.size() == img.values.size());
    for (std::size_t i = 0; i < img.values.size(); ++i)
      CHECK(back.values[i] == doctest::Approx(img.values[i]).epsilon(1e-6));
  }
}

TEST_CASE("synthetic dataset writer: deterministic files and density regimes") {
  TempDir dir("dataset");
  SynthDatasetConfig cfg;
  cfg.scene.canvas_h = 64;
  cfg.scene.canvas_w = 64;
  cfg.scene.min_radius = 3.0;
  cfg.scene.max_radius = 5.0;
  cfg.train = {4, 2, 5};
  cfg.test = {3, 12, 18};
  cfg.seed = 42;

  write_synthetic_dataset(dir.path() + "/a", cfg);
  write_synthetic_dataset(dir.path() + "/b", cfg);
  CHECK(testutil::read_file_bytes(dir.path() + "/a/train/annotations.json") ==
        testutil::read_file_bytes(dir.path() + "/b/train/annotations.json"));
  CHECK(testutil::read_file_bytes(dir.path() + "/a/train/images/0000.png") ==
        testutil::read_file_bytes(dir.path() + "/b/train/images/0000.png"));

  const auto train = load_annotations(dir.path() + "/a/train/annotations.json", Split::train);
  const auto test = load_annotations(dir.path() + "/a/test/annotations.json", Split::test);
  REQUIRE(train.size() == 4);
  REQUIRE(test.size() == 3);
  double mean_train = 0.0, mean_test = 0.0;
  for (const auto& r : train) mean_train += r.annotation.size();
  for (const auto& r : test) mean_test += r.annotation.size();
  CHECK(mean_train / train.size() < mean_test / test.size());
}
