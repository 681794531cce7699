// Finite-difference audits of the full training graph across the ablation
// configurations: fusion variants, single-bank selections, HFEM scale and
// pooling options. Everything runs in double on tiny models.

#include <doctest.h>

#include <cmath>

#include "l2h/graph.hpp"
#include "l2h/trainer.hpp"
#include "test_util.hpp"

using namespace l2h;
using testutil::tiny_model_config;

namespace {

struct AuditSetup {
  CountingModel<double> model;
  TrainItem<double> item;
  LossWeights weights;
};

AuditSetup make_setup(ModelConfig cfg, std::uint64_t seed) {
  AuditSetup setup;
  if (cfg.kind == ModelKind::dual) {
    ModelConfig low_cfg = cfg;
    low_cfg.kind = ModelKind::single_memory;
    low_cfg.fusion = FusionKind::concat;
    low_cfg.banks = BankSelect::both;
    CountingModel<double> low = build_single_model<double>(low_cfg, derive_seed(seed, "low"));
    freeze_branch(low.high);
    setup.model = build_dual_model<double>(cfg, low, derive_seed(seed, "dual"));
  } else {
    setup.model = build_single_model<double>(cfg, derive_seed(seed, "single"));
  }

  SynthConfig scfg;
  scfg.canvas_h = 48;
  scfg.canvas_w = 48;
  scfg.min_heads = scfg.max_heads = 5;
  scfg.min_radius = 2.0;
  scfg.max_radius = 3.5;
  scfg.seed = derive_seed(seed, "scene");
  const auto [img, ann] = generate_synthetic_scene(scfg);

  TrainSettings st;
  st.aug.crop_h = 32;
  st.aug.crop_w = 32;
  st.seed = seed;
  setup.item = build_train_item<double>(img, ann, st, cfg, derive_seed(seed, "item"));
  return setup;
}

// Checks n sampled trainable parameters against central differences.
void audit(ModelConfig cfg, std::uint64_t seed, int n_samples, double tol) {
  AuditSetup setup = make_setup(cfg, seed);
  setup.model.zero_grad();
  item_forward_backward<double>(setup.model, setup.item, setup.weights, true, 1.0, false);
  auto params = setup.model.trainable_params();
  REQUIRE(!params.empty());

  const auto loss_value = [&]() {
    const LossParts parts =
        item_forward_backward<double>(setup.model, setup.item, setup.weights, false, 1.0, false);
    return total_loss(parts, setup.weights);
  };

  Rng pick(derive_seed(seed, "pick"));
  const double h = 1e-5;
  for (int t = 0; t < n_samples; ++t) {
    auto& p = params[pick.uniform_int(0, static_cast<int>(params.size()) - 1)];
    const int ei = pick.uniform_int(0, static_cast<int>(p.value->numel()) - 1);
    const double analytic = (*p.grad)[ei];
    const double saved = (*p.value)[ei];
    (*p.value)[ei] = saved + h;
    const double lp = loss_value();
    (*p.value)[ei] = saved - h;
    const double lm = loss_value();
    (*p.value)[ei] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
    INFO(p.name << "[" << ei << "] analytic " << analytic << " fd " << fd);
    CHECK(rel < tol);
  }
}

}  // namespace

TEST_CASE("gradients: concat fusion (default path)") {
  audit(tiny_model_config(), 201, 12, 1e-3);
}

TEST_CASE("gradients: addition fusion") {
  ModelConfig cfg = tiny_model_config();
  cfg.fusion = FusionKind::add;
  audit(cfg, 202, 12, 1e-3);
}

TEST_CASE("gradients: adaptive selection fusion") {
  ModelConfig cfg = tiny_model_config();
  cfg.fusion = FusionKind::adaptive;
  audit(cfg, 203, 16, 1e-3);
}

TEST_CASE("gradients: ldcm-only and hdcm-only re-encoding") {
  ModelConfig cfg = tiny_model_config();
  cfg.banks = BankSelect::ldcm;
  audit(cfg, 204, 10, 1e-3);
  cfg.banks = BankSelect::hdcm;
  audit(cfg, 205, 10, 1e-3);
}

TEST_CASE("gradients: trainable LDCM ablation") {
  ModelConfig cfg = tiny_model_config();
  cfg.ldcm_trainable = true;
  audit(cfg, 206, 10, 1e-3);
}

TEST_CASE("gradients: hfem at s2+s3 with average pooling") {
  ModelConfig cfg = tiny_model_config();
  cfg.hfem = parse_hfem_scale("s2+s3", cfg.hfem);
  cfg.hfem.pool = HfemPool::avg;
  audit(cfg, 207, 10, 1e-3);
}

TEST_CASE("gradients: hfem avg+max pooling, binary mask, max overlay") {
  ModelConfig cfg = tiny_model_config();
  cfg.hfem.pool = HfemPool::avg_max;
  cfg.hfem.mask = HfemMask::binary;
  cfg.hfem.overlay = HfemOverlay::max;
  audit(cfg, 208, 10, 1e-3);
}

TEST_CASE("gradients: no-pooling hfem variant") {
  ModelConfig cfg = tiny_model_config();
  cfg.hfem.pool = HfemPool::none;
  audit(cfg, 209, 8, 1e-3);
}

TEST_CASE("gradients: single-branch pretraining graph") {
  ModelConfig cfg = tiny_model_config();
  cfg.kind = ModelKind::single_memory;
  cfg.use_hdsm = false;
  audit(cfg, 210, 10, 1e-3);
}

TEST_CASE("gradients: plain baseline graph") {
  ModelConfig cfg = tiny_model_config();
  cfg.kind = ModelKind::single_plain;
  cfg.use_hdsm = false;
  audit(cfg, 211, 10, 1e-3);
}
