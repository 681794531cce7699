// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Oracles here are written inline and stay independent of the
// library code paths they check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "l2h/checkpoint.hpp"
#include "l2h/evaluate.hpp"
#include "l2h/graph.hpp"
#include "l2h/trainer.hpp"

using namespace l2h;

namespace {

int failures = 0;
std::chrono::steady_clock::time_point t_start;

void begin() { t_start = std::chrono::steady_clock::now(); }

void verdict(int criterion, const char* what, bool ok, const std::string& detail = "") {
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  std::printf("[%s] criterion %d: %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL", criterion, what,
              secs, detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

Raster random_image(int h, int w, int c, Rng& rng) {
  Raster img(h, w, c);
  for (auto& v : img.values) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return img;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.kind = ModelKind::dual;
  cfg.encoder.base_channels = 4;
  cfg.encoder.stage_channels = {4, 6, 8};
  cfg.encoder.out_channels_c1 = 8;
  cfg.c2 = 4;
  cfg.memory_l = 4;
  return cfg;
}

TrainSettings tiny_settings(std::uint64_t seed) {
  TrainSettings st;
  st.opt.max_lr = 1e-3;
  st.opt.batch_size = 2;
  st.aug.crop_h = 32;
  st.aug.crop_w = 32;
  st.seed = seed;
  return st;
}

TrainDataset make_dataset(int n, int heads_min, int heads_max, int canvas, double r_min,
                          double r_max, std::uint64_t seed) {
  TrainDataset data;
  for (int i = 0; i < n; ++i) {
    SynthConfig cfg;
    cfg.canvas_h = canvas;
    cfg.canvas_w = canvas;
    cfg.min_heads = heads_min;
    cfg.max_heads = heads_max;
    cfg.min_radius = r_min;
    cfg.max_radius = r_max;
    cfg.seed = derive_seed(seed, "acc-data", i);
    auto [img, ann] = generate_synthetic_scene(cfg);
    data.images.push_back(std::move(img));
    data.annotations.push_back(std::move(ann));
  }
  return data;
}

// --- criterion 1 -----------------------------------------------------------

void criterion1_hdsm_oracle() {
  begin();
  Rng rng(101);
  bool ok = true;
  const double lambdas[3] = {0.25, 0.5, 0.75};
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int h = rng.uniform_int(8, 64);
    const int w = rng.uniform_int(8, 64);
    const int s = rng.uniform_int(0, 8);
    const double lambda = lambdas[trial % 3];
    const Raster img = random_image(h, w, 3, rng);
    const Raster sim = simulate_high_density(img, {s, lambda});
    if (sim.height != h || sim.width != w + s) {
      ok = false;
      break;
    }
    // Per-pixel reference loop: lambda*padLeft + (1-lambda)*padRight.
    const float wl = static_cast<float>(lambda);
    const float wr = static_cast<float>(1.0 - lambda);
    for (int y = 0; y < h && ok; ++y)
      for (int x = 0; x < w + s && ok; ++x)
        for (int c = 0; c < 3; ++c) {
          const float left = x >= s ? img.at(y, x - s, c) : 0.0f;
          const float right = x < w ? img.at(y, x, c) : 0.0f;
          if (sim.at(y, x, c) != wl * left + wr * right) {
            ok = false;
            break;
          }
        }
  }
  verdict(1, "HDSM bit-identical to the per-pixel reference over 50 random images", ok);
}

// --- criterion 2 -----------------------------------------------------------

void criterion2_gtgm_conservation() {
  begin();
  Rng rng(102);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const int h = rng.uniform_int(1, 48);
    const int w = rng.uniform_int(1, 48);
    const int s = rng.uniform_int(0, 12);
    Raster g(h, w, 1);
    for (auto& v : g.values) v = static_cast<float>(rng.uniform(0.0, 2.0));
    const double base = density_count(g);
    const double doubled = density_count(generate_gt(g, s));
    if (std::abs(doubled - 2.0 * base) > 1e-6 * std::max(1.0, 2.0 * base)) {
      ok = false;
      detail = "count doubling violated";
    }
  }
  // Point-domain commutation for interior-supported points.
  for (int trial = 0; trial < 10 && ok; ++trial) {
    const int h = 64, w = 64, s = 2 + trial;
    PointAnnotation ann;
    for (int i = 0; i < 6; ++i)
      ann.points.emplace_back(rng.uniform(17.0, w - 18.0), rng.uniform(17.0, h - 18.0));
    const Raster a = generate_gt(points_to_density(ann, h, w, 4.0), s);
    const Raster b = points_to_density(shift_overlay_points(ann, s), h, w + s, 4.0);
    for (std::size_t i = 0; i < a.values.size(); ++i)
      if (std::abs(a.values[i] - b.values[i]) > 1e-6) {
        ok = false;
        detail = "commutation violated";
        break;
      }
  }
  verdict(2, "GTGM doubles counts and commutes with densification", ok, detail);
}

// --- criterion 3 -----------------------------------------------------------

void criterion3_attention_properties() {
  begin();
  Rng rng(103);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const int c2 = rng.uniform_int(2, 8);
    const int l = rng.uniform_int(2, 12);
    const int hw = rng.uniform_int(1, 10);
    MemoryBank<float> bank;
    bank.v = Tensor({c2, l});
    bank.dv = Tensor({c2, l});
    for (auto& v : bank.v.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor f({c2, hw});
    for (auto& v : f.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    const Tensor a = attention_scores(f, bank);
    for (int r = 0; r < hw; ++r) {
      double sum = 0.0;
      for (int c = 0; c < l; ++c) {
        if (a.at2(r, c) < 0.0f) {
          ok = false;
          detail = "negative attention";
        }
        sum += a.at2(r, c);
      }
      if (std::abs(sum - 1.0) > 1e-5) {
        ok = false;
        detail = "row sum off";
      }
    }

    const Tensor r = reconstruct(bank, a);
    for (int c = 0; c < c2 && ok; ++c) {
      float lo = bank.v.at2(c, 0), hi = bank.v.at2(c, 0);
      for (int j = 1; j < l; ++j) {
        lo = std::min(lo, bank.v.at2(c, j));
        hi = std::max(hi, bank.v.at2(c, j));
      }
      const float slack = 1e-6f * std::max(1.0f, std::abs(hi) + std::abs(lo));
      for (int p = 0; p < hw; ++p)
        if (r.at2(c, p) < lo - slack || r.at2(c, p) > hi + slack) {
          ok = false;
          detail = "reconstruction left the memory hull";
        }
    }

    // Scaling the feature by 10x strictly sharpens every row.
    Tensor f10 = f;
    for (auto& v : f10.data) v *= 10.0f;
    const Tensor a10 = attention_scores(f10, bank);
    for (int p = 0; p < hw && ok; ++p) {
      float mx = 0.0f, mx10 = 0.0f;
      for (int c = 0; c < l; ++c) {
        mx = std::max(mx, a.at2(p, c));
        mx10 = std::max(mx10, a10.at2(p, c));
      }
      if (!(mx10 > mx)) {
        ok = false;
        detail = "scaling did not sharpen a row";
      }
    }
  }
  verdict(3, "attention rows stochastic, reconstructions in-hull, scaling sharpens", ok, detail);
}

// --- criterion 4 -----------------------------------------------------------

void criterion4_gradient_audit() {
  begin();
  bool ok = true;
  std::string detail;

  // End-to-end audit on the tiny double-precision model, 32x32 crop.
  ModelConfig cfg = tiny_config();
  ModelConfig low_cfg = cfg;
  low_cfg.kind = ModelKind::single_memory;
  CountingModel<double> low = build_single_model<double>(low_cfg, 11);
  freeze_branch(low.high);
  CountingModel<double> model = build_dual_model<double>(cfg, low, 12);

  TrainDataset data = make_dataset(1, 4, 4, 48, 2.0, 3.0, 13);
  TrainSettings st = tiny_settings(14);
  const TrainItem<double> item =
      build_train_item<double>(data.images[0], data.annotations[0], st, cfg, 15);
  const LossWeights weights;

  model.zero_grad();
  item_forward_backward<double>(model, item, weights, true, 1.0, false);
  auto params = model.trainable_params();

  const auto loss_value = [&]() {
    const LossParts parts = item_forward_backward<double>(model, item, weights, false, 1.0, false);
    return total_loss(parts, weights);
  };

  Rng pick(16);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < 20 && ok; ++t) {
    const int pi = pick.uniform_int(0, static_cast<int>(params.size()) - 1);
    auto& p = params[pi];
    const int ei = pick.uniform_int(0, static_cast<int>(p.value->numel()) - 1);
    const double analytic = (*p.grad)[ei];
    const double saved = (*p.value)[ei];
    (*p.value)[ei] = saved + h;
    const double lp = loss_value();
    (*p.value)[ei] = saved - h;
    const double lm = loss_value();
    (*p.value)[ei] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
    worst = std::max(worst, rel);
    if (rel > 1e-3) {
      ok = false;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s[%d]: analytic %.6g vs fd %.6g (rel %.3g)",
                    p.name.c_str(), ei, analytic, fd, rel);
      detail = buf;
    }
  }

  // HFEM loss gradient alone, 4x4 double instances, 1e-4.
  Rng rng(17);
  for (int trial = 0; trial < 5 && ok; ++trial) {
    TensorD m({4, 4}), target({4, 4}), gt({4, 4});
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : target.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : gt.data) v = rng.uniform(0.0, 1.0);
    const TensorD grad = hfem_loss_backward(m, target, gt);
    for (std::size_t i = 0; i < m.numel() && ok; ++i) {
      TensorD plus = m, minus = m;
      plus[i] += 1e-6;
      minus[i] -= 1e-6;
      const double fd = (hfem_loss(plus, target, gt) - hfem_loss(minus, target, gt)) / 2e-6;
      if (std::abs(fd - grad[i]) > 1e-4 * std::max({std::abs(fd), std::abs(grad[i]), 1e-6})) {
        ok = false;
        detail = "hfem gradient off";
      }
    }
  }

  // Attention-path gradients alone, 1e-4.
  for (int trial = 0; trial < 5 && ok; ++trial) {
    const int c2 = 3, l = 4, hw = 5;
    TensorD f({c2, hw}), coeff({c2, hw});
    MemoryBank<double> bank;
    bank.v = TensorD({c2, l});
    bank.dv = TensorD({c2, l});
    bank.trainable = true;
    for (auto& v : f.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : coeff.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : bank.v.data) v = rng.uniform(-1.0, 1.0);

    const auto objective = [&](const TensorD& ft, const TensorD& vt) {
      MemoryBank<double> tmp;
      tmp.v = vt;
      tmp.dv = TensorD({c2, l});
      const TensorD a = attention_scores(ft, tmp);
      const TensorD r = reconstruct(tmp, a);
      double acc = 0.0;
      for (std::size_t i = 0; i < r.numel(); ++i) acc += coeff[i] * r[i];
      return acc;
    };

    const TensorD a = attention_scores(f, bank);
    TensorD df({c2, hw});
    const TensorD da = reconstruct_backward(bank, a, coeff);
    attention_backward(f, bank, a, da, df);

    for (int t = 0; t < 6 && ok; ++t) {
      const int i = rng.uniform_int(0, c2 * hw - 1);
      TensorD plus = f, minus = f;
      plus[i] += 1e-6;
      minus[i] -= 1e-6;
      const double fd = (objective(plus, bank.v) - objective(minus, bank.v)) / 2e-6;
      if (std::abs(fd - df[i]) > 1e-4 * std::max({std::abs(fd), std::abs(df[i]), 1e-6})) {
        ok = false;
        detail = "attention dF off";
      }
    }
    for (int t = 0; t < 6 && ok; ++t) {
      const int i = rng.uniform_int(0, c2 * l - 1);
      TensorD plus = bank.v, minus = bank.v;
      plus[i] += 1e-6;
      minus[i] -= 1e-6;
      const double fd = (objective(f, plus) - objective(f, minus)) / 2e-6;
      if (std::abs(fd - bank.dv[i]) > 1e-4 * std::max({std::abs(fd), std::abs(bank.dv[i]), 1e-6})) {
        ok = false;
        detail = "attention dV off";
      }
    }
  }

  char buf[64];
  std::snprintf(buf, sizeof(buf), "worst end-to-end rel %.3g", worst);
  verdict(4, "analytic gradients match central finite differences", ok,
          ok ? std::string(buf) : detail);
}

// --- criterion 5 -----------------------------------------------------------

void criterion5_freeze_contract() {
  begin();
  ModelConfig cfg = tiny_config();
  ModelConfig low_cfg = cfg;
  low_cfg.kind = ModelKind::single_memory;
  CountingModel<float> low = build_single_model<float>(low_cfg, 21);
  freeze_branch(low.high);
  CountingModel<float> model = build_dual_model<float>(cfg, low, 22);

  std::vector<ParamRef<float>> all;
  std::vector<StateRef<float>> state;
  model.all_params(all, state);
  std::vector<std::vector<float>> before_params;
  for (const auto& p : all) before_params.push_back(p.value->data);
  std::vector<std::vector<float>> before_state;
  for (const auto& s : state) before_state.push_back(s.value->data);

  const TrainDataset data = make_dataset(4, 3, 6, 48, 2.0, 3.0, 23);
  TrainSettings st = tiny_settings(24);
  Trainer trainer(model, st, 20);
  for (int step = 0; step < 20; ++step) {
    std::vector<TrainItem<float>> batch;
    for (int i = 0; i < 2; ++i) {
      const int idx = (step * 2 + i) % 4;
      batch.push_back(build_train_item<float>(data.images[idx], data.annotations[idx], st, cfg,
                                              derive_seed(25, "item", step * 2 + i)));
    }
    trainer.train_step(batch);
  }

  bool low_unchanged = true, hd_param_changed = false, hdcm_changed = false;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool same = all[i].value->data == before_params[i];
    if (all[i].name.rfind("low.", 0) == 0 && !same) low_unchanged = false;
    if (all[i].name == "high.bank.v" && !same) hdcm_changed = true;
    if (all[i].name.rfind("high.", 0) == 0 && all[i].name != "high.bank.v" && !same)
      hd_param_changed = true;
  }
  // Frozen normalization statistics must hold still too.
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state[i].name.rfind("low.", 0) == 0 && state[i].value->data != before_state[i])
      low_unchanged = false;

  verdict(5, "20 steps: low branch and LDCM bitwise frozen, HD branch and HDCM moved",
          low_unchanged && hd_param_changed && hdcm_changed);
}

// --- criterion 6 -----------------------------------------------------------

void criterion6_metric_identities() {
  begin();
  bool ok = true;
  const std::vector<std::pair<double, double>> pairs{{10, 12}, {20, 16}};
  if (std::abs(mae(pairs) - 3.0) > 1e-9) ok = false;
  if (std::abs(mse(pairs) - std::sqrt(10.0)) > 1e-9) ok = false;

  Rng rng(106);
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int n = rng.uniform_int(1, 50);
    std::vector<std::pair<double, double>> residuals;
    for (int i = 0; i < n; ++i) {
      const double gt = rng.uniform(0.0, 200.0);
      residuals.emplace_back(gt + rng.uniform(-50.0, 50.0), gt);
    }
    if (mse(residuals) < mae(residuals) - 1e-12) ok = false;
  }
  verdict(6, "metric unit cases exact, rms >= mean-abs on 1000 random sets", ok);
}

// --- criterion 7 -----------------------------------------------------------

void criterion7_directional_generalization() {
  begin();
  ExperimentConfig cfg;
  cfg.data.scene.canvas_h = 128;
  cfg.data.scene.canvas_w = 128;
  cfg.data.scene.min_radius = 3.0;
  cfg.data.scene.max_radius = 6.0;
  cfg.data.scene.background = BackgroundTexture::noise;
  cfg.data.train = {64, 5, 15};
  cfg.data.test = {32, 40, 80};

  cfg.base_model.kind = ModelKind::dual;
  cfg.base_model.encoder.base_channels = 16;
  cfg.base_model.encoder.stage_channels = {16, 32, 64};
  cfg.base_model.encoder.out_channels_c1 = 64;
  cfg.base_model.c2 = 32;
  cfg.base_model.memory_l = 32;

  cfg.train.opt.max_lr = 1e-3;
  cfg.train.opt.max_epochs = 16;
  cfg.train.opt.pretrain_epochs = 10;
  cfg.train.opt.batch_size = 4;
  cfg.train.aug.crop_h = 96;
  cfg.train.aug.crop_w = 96;

  cfg.variants = {"full", "baseline", "fusion_add"};
  cfg.seeds = {1, 2, 3};

  const ExperimentReport report = run_generalization_experiment(cfg, nullptr);
  const VariantResult* full = report.find("full");
  const VariantResult* baseline = report.find("baseline");
  const VariantResult* add = report.find("fusion_add");

  char buf[256];
  std::snprintf(buf, sizeof(buf), "full %.2f / baseline %.2f / add %.2f (seed-avg MAE)",
                full->mae, baseline->mae, add->mae);
  const bool dir_a = full->mae < baseline->mae;
  const bool dir_b = full->mae <= add->mae;
  verdict(7, "directional: full < no-sim/no-memory baseline and concat <= add", dir_a && dir_b,
          buf);
}

// --- criterion 8 -----------------------------------------------------------

void criterion8_determinism_and_formats() {
  begin();
  bool ok = true;
  std::string detail;

  // Byte-identical synthetic datasets.
  SynthDatasetConfig ds;
  ds.scene.canvas_h = 64;
  ds.scene.canvas_w = 64;
  ds.scene.min_radius = 2.5;
  ds.scene.max_radius = 4.0;
  ds.train = {6, 2, 5};
  ds.test = {3, 8, 12};
  ds.seed = 31;
  const auto bytes_of = [](const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
    std::fclose(f);
    return out;
  };
  write_synthetic_dataset("acc_ds_a", ds);
  write_synthetic_dataset("acc_ds_b", ds);
  for (const char* rel : {"/train/annotations.json", "/train/images/0000.png",
                          "/test/annotations.json", "/test/images/0002.png"}) {
    if (bytes_of(std::string("acc_ds_a") + rel) != bytes_of(std::string("acc_ds_b") + rel)) {
      ok = false;
      detail = std::string("dataset bytes differ: ") + rel;
    }
  }

  // Byte-identical training logs across reruns.
  const ModelConfig cfg = tiny_config();
  const TrainDataset data = make_dataset(4, 2, 5, 48, 2.0, 3.0, 32);
  TrainSettings st = tiny_settings(33);
  st.opt.max_epochs = 2;
  st.opt.pretrain_epochs = 1;
  const auto run_training = [&]() {
    std::ostringstream prelog, log;
    CountingModel<float> lowm = pretrain_low_branch(data, cfg, st, &prelog);
    CountingModel<float> model = train_model(data, cfg, st, &lowm, &log);
    return std::tuple{prelog.str(), log.str(), std::move(model)};
  };
  auto [pre_a, log_a, model_a] = run_training();
  auto [pre_b, log_b, model_b] = run_training();
  if (pre_a != pre_b || log_a != log_b) {
    ok = false;
    detail = "training logs differ across reruns";
  }

  // Byte-identical eval reports.
  ExperimentConfig micro;
  micro.data = ds;
  micro.data.train = {4, 2, 4};
  micro.data.test = {2, 6, 9};
  micro.base_model = cfg;
  micro.train = st;
  micro.train.opt.max_epochs = 1;
  micro.variants = {"full", "baseline"};
  micro.seeds = {2};
  const std::string rep_a = report_to_json(run_generalization_experiment(micro));
  const std::string rep_b = report_to_json(run_generalization_experiment(micro));
  if (rep_a != rep_b) {
    ok = false;
    detail = "eval reports differ across reruns";
  }

  // Density file and checkpoint round-trips are bitwise.
  Rng rng(34);
  Raster density(21, 17, 1);
  for (auto& v : density.values) v = static_cast<float>(rng.uniform(0.0, 5.0));
  write_density_file("acc_density.l2hd", density);
  const Raster density_back = read_density_file("acc_density.l2hd");
  if (density_back.values != density.values) {
    ok = false;
    detail = "density file round trip";
  }

  save_checkpoint("acc_model_a.ckpt", model_a, st.seed);
  CountingModel<float> loaded = load_checkpoint("acc_model_a.ckpt");
  save_checkpoint("acc_model_b.ckpt", loaded, st.seed);
  if (bytes_of("acc_model_a.ckpt") != bytes_of("acc_model_b.ckpt")) {
    ok = false;
    detail = "checkpoint round trip";
  }

  verdict(8, "seeded reruns byte-identical; density and checkpoint files bitwise", ok, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  criterion1_hdsm_oracle();
  criterion2_gtgm_conservation();
  criterion3_attention_properties();
  criterion4_gradient_audit();
  criterion5_freeze_contract();
  criterion6_metric_identities();
  criterion7_directional_generalization();
  criterion8_determinism_and_formats();
  std::printf("================\n%s (%d failed)\n", failures == 0 ? "ALL PASS" : "FAILURES",
              failures);
  return failures == 0 ? 0 : 1;
}
