#include <doctest.h>

#include <cmath>

#include "l2h/evaluate.hpp"
#include "test_util.hpp"

using namespace l2h;
using testutil::tiny_model_config;

namespace {

CountingModel<float> tiny_dual_model(std::uint64_t seed) {
  ModelConfig cfg = tiny_model_config();
  ModelConfig low_cfg = cfg;
  low_cfg.kind = ModelKind::single_memory;
  CountingModel<float> low = build_single_model<float>(low_cfg, derive_seed(seed, "low"));
  freeze_branch(low.high);
  return build_dual_model<float>(cfg, low, derive_seed(seed, "dual"));
}

}  // namespace

TEST_CASE("mae/mse unit cases and identities") {
  const std::vector<std::pair<double, double>> pairs{{10, 12}, {20, 16}};
  CHECK(mae(pairs) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(mse(pairs) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));

  const std::vector<std::pair<double, double>> equal{{5, 5}, {9, 9}};
  CHECK(mae(equal) == 0.0);
  CHECK(mse(equal) == 0.0);

  const std::vector<std::pair<double, double>> reversed{{20, 16}, {10, 12}};
  CHECK(mae(reversed) == mae(pairs));

  const std::vector<std::pair<double, double>> single{{7, 3}};
  CHECK(mae(single) == mse(single));

  CHECK_THROWS_AS(mae({}), Error);
  CHECK_THROWS_AS(mse({}), Error);
}

TEST_CASE("mse >= mae and both scale linearly in the residuals") {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(1, 40);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < n; ++i) {
      const double gt = rng.uniform(0.0, 100.0);
      pairs.emplace_back(gt + rng.uniform(-30.0, 30.0), gt);
    }
    CHECK(mse(pairs) >= mae(pairs) - 1e-12);

    std::vector<std::pair<double, double>> scaled;
    for (const auto& [c, chat] : pairs) scaled.emplace_back(chat + 3.0 * (c - chat), chat);
    CHECK(mae(scaled) == doctest::Approx(3.0 * mae(pairs)).epsilon(1e-9));
    CHECK(mse(scaled) == doctest::Approx(3.0 * mse(pairs)).epsilon(1e-9));
  }
}

TEST_CASE("infer: zero head weights give zero count; repeatable") {
  CountingModel<float> model = tiny_dual_model(71);
  Rng rng(62);
  const Raster img = testutil::random_raster(48, 48, 3, rng);

  CountingModel<float> zeroed = model;
  zeroed.high.density_head.w.zero();
  zeroed.high.density_head.b.zero();
  const auto [d0, c0] = infer(img, zeroed);
  CHECK(c0 == 0.0);

  const auto [d1, c1] = infer(img, model);
  const auto [d2, c2] = infer(img, model);
  CHECK(c1 == c2);
  CHECK(d1.values == d2.values);
  CHECK(d1.all_nonnegative());
}

TEST_CASE("infer: padding neutrality for awkward sizes") {
  CountingModel<float> model = tiny_dual_model(72);
  Rng rng(63);
  const Raster img = testutil::random_raster(61, 77, 3, rng);
  const auto [da, ca] = infer(img, model);
  const auto [db, cb] = infer(pad_to_multiple(img, 16), model);
  CHECK(std::abs(ca - cb) < 1e-4);

  const Raster big = testutil::random_raster(317, 323, 3, rng);
  const auto [dc, cc] = infer(big, model);
  const auto [dd, cd] = infer(pad_to_multiple(big, 16), model);
  CHECK(std::abs(cc - cd) < 1e-4 * std::max(1.0, std::abs(cc)));
}

TEST_CASE("infer never touches the low branch") {
  CountingModel<float> model = tiny_dual_model(73);
  Rng rng(64);
  const Raster img = testutil::random_raster(48, 48, 3, rng);
  const std::uint64_t enc_before = model.low.encode_calls;
  const std::uint64_t dec_before = model.low.decode_calls;
  for (int i = 0; i < 3; ++i) infer(img, model);
  CHECK(model.low.encode_calls == enc_before);
  CHECK(model.low.decode_calls == dec_before);
  CHECK(model.high.encode_calls >= 3);
}

TEST_CASE("variant configs cover the ablation grid") {
  const ModelConfig base = tiny_model_config();
  CHECK(variant_config("full", base).banks == BankSelect::both);
  CHECK(variant_config("baseline", base).kind == ModelKind::single_plain);
  CHECK_FALSE(variant_config("baseline", base).use_hdsm);
  CHECK(variant_config("ldcm_only", base).banks == BankSelect::ldcm);
  CHECK(variant_config("hdcm_only", base).banks == BankSelect::hdcm);
  CHECK(variant_config("fusion_add", base).fusion == FusionKind::add);
  CHECK(variant_config("fusion_adaptive", base).fusion == FusionKind::adaptive);
  CHECK_THROWS_AS(variant_config("bogus", base), Error);
}

TEST_CASE("micro experiment: report rows, memory ablations, byte determinism") {
  ExperimentConfig cfg;
  cfg.data.scene.canvas_h = 48;
  cfg.data.scene.canvas_w = 48;
  cfg.data.scene.min_radius = 2.0;
  cfg.data.scene.max_radius = 4.0;
  cfg.data.train = {4, 2, 4};
  cfg.data.test = {3, 6, 10};
  cfg.base_model = tiny_model_config();
  cfg.train.opt.max_epochs = 1;
  cfg.train.opt.pretrain_epochs = 1;
  cfg.train.opt.batch_size = 2;
  cfg.train.aug.crop_h = 32;
  cfg.train.aug.crop_w = 32;
  cfg.variants = {"full", "baseline", "ldcm_only", "hdcm_only"};
  cfg.seeds = {5};

  const ExperimentReport a = run_generalization_experiment(cfg);
  REQUIRE(a.rows.size() == 4);
  // One row per variant, LDCM&HDCM alongside the single-memory rows.
  CHECK(a.find("full") != nullptr);
  CHECK(a.find("ldcm_only") != nullptr);
  CHECK(a.find("hdcm_only") != nullptr);
  for (const auto& [name, r] : a.rows) {
    CHECK(r.n == 3);
    CHECK(r.mae >= 0.0);
    CHECK(r.mse >= r.mae - 1e-9);
    CHECK(r.per_seed.size() == 1);
  }

  const ExperimentReport b = run_generalization_experiment(cfg);
  CHECK(report_to_json(a) == report_to_json(b));

  const std::string table = report_to_table(a);
  CHECK(table.find("full") != std::string::npos);
  CHECK(table.find("MAE") != std::string::npos);
}

TEST_CASE("heat render spans the ramp and stays in range") {
  Raster d(2, 2, 1);
  d.at(0, 0) = 0.0f;
  d.at(1, 1) = 2.0f;
  const Raster heat = density_heat_render(d);
  CHECK(heat.channels == 3);
  for (float v : heat.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(heat.at(1, 1, 0) == 1.0f);
  CHECK(heat.at(0, 0, 0) == 0.0f);
}
