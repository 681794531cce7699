#include <doctest.h>

#include <cmath>

#include "l2h/ddmem.hpp"
#include "l2h/graph.hpp"
#include "l2h/hfem.hpp"
#include "l2h/model.hpp"
#include "l2h/optim.hpp"
#include "test_util.hpp"

using namespace l2h;
using testutil::random_tensor;
using testutil::tiny_model_config;

namespace {

template <typename T>
Branch<T> make_branch(std::uint64_t seed, int head_in = 4) {
  Rng rng(seed);
  Branch<T> b;
  EncoderConfig cfg;
  cfg.base_channels = 4;
  cfg.stage_channels = {4, 6, 8};
  cfg.out_channels_c1 = 8;
  b.init(cfg, 4, head_in, rng);
  return b;
}

}  // namespace

TEST_CASE("encode: stride law and variable width") {
  Branch<float> b = make_branch<float>(31);
  Rng rng(32);
  const Tensor img320 = random_tensor<float>({3, 320, 320}, rng, 0.0, 1.0);
  const FeaturePyramid<float> p = encode<float>(img320, b, nullptr, false);
  CHECK(p.s1.shape == std::vector<int>{4, 80, 80});
  CHECK(p.s2.shape == std::vector<int>{6, 40, 40});
  CHECK(p.s3.shape == std::vector<int>{8, 20, 20});

  const Tensor wide = random_tensor<float>({3, 320, 384}, rng, 0.0, 1.0);
  const FeaturePyramid<float> pw = encode<float>(wide, b, nullptr, false);
  CHECK(pw.s3.shape == std::vector<int>{8, 20, 24});

  const Tensor zero({3, 64, 64});
  const FeaturePyramid<float> pz = encode<float>(zero, b, nullptr, false);
  for (float v : pz.s3.data) CHECK(std::isfinite(v));

  const Tensor bad({3, 60, 64});
  CHECK_THROWS_AS(encode<float>(bad, b, nullptr, false), Error);
}

TEST_CASE("decode: shape contract, zero propagation, determinism") {
  Branch<float> b = make_branch<float>(33);
  Rng rng(34);
  const Tensor s3 = random_tensor<float>({8, 20, 20}, rng);
  const Tensor out = decode<float>(s3, b, nullptr, false);
  CHECK(out.shape == std::vector<int>{4, 20, 20});

  // Zero input with zero biases and shifts stays zero through conv+norm+ReLU.
  Branch<float> zb = make_branch<float>(35);
  for (auto& blk : zb.decoder.blocks) {
    blk.conv.b.zero();
    blk.bn.beta.zero();
  }
  const Tensor zeros({8, 20, 20});
  const Tensor zout = decode<float>(zeros, zb, nullptr, false);
  for (float v : zout.data) CHECK(v == 0.0f);

  const Tensor a = decode<float>(s3, b, nullptr, false);
  const Tensor c = decode<float>(s3, b, nullptr, false);
  CHECK(a.data == c.data);

  const Tensor wrong({5, 20, 20});
  CHECK_THROWS_AS(decode<float>(wrong, b, nullptr, false), Error);
}

TEST_CASE("density head: non-negative output, fused shape") {
  Rng rng(36);
  Branch<float> b = make_branch<float>(37, 512);
  const Tensor fused = random_tensor<float>({512, 20, 20}, rng, -2.0, 2.0);
  const Tensor out = density_head_forward<float>(fused, b, nullptr);
  CHECK(out.shape == std::vector<int>{1, 20, 20});
  for (float v : out.data) CHECK(v >= 0.0f);

  b.density_head.w.zero();
  b.density_head.b.zero();
  const Tensor z = density_head_forward<float>(fused, b, nullptr);
  for (float v : z.data) CHECK(v == 0.0f);
}

TEST_CASE("attention: uniform rows for zero features, tiny case, oracle") {
  MemoryBank<float> bank = init_memory<float>(2, 1, 7, true);
  bank.v.at2(0, 0) = 0.0f;
  bank.v.at2(0, 1) = 0.0f;
  Tensor f({1, 1});
  const Tensor a = attention_scores(f, bank);
  CHECK(a.at2(0, 0) == doctest::Approx(0.5));
  CHECK(a.at2(0, 1) == doctest::Approx(0.5));

  Rng rng(38);
  MemoryBank<float> bank2 = init_memory<float>(5, 4, 8, true);
  const Tensor f2 = random_tensor<float>({4, 3}, rng);
  const Tensor a2 = attention_scores(f2, bank2);
  // Naive two-loop softmax oracle.
  for (int p = 0; p < 3; ++p) {
    double row[5];
    double mx = -1e300;
    for (int l = 0; l < 5; ++l) {
      double z = 0.0;
      for (int c = 0; c < 4; ++c) z += f2.at2(c, p) * bank2.v.at2(c, l);
      row[l] = z / std::sqrt(4.0);
      mx = std::max(mx, row[l]);
    }
    double sum = 0.0;
    for (double& z : row) {
      z = std::exp(z - mx);
      sum += z;
    }
    for (int l = 0; l < 5; ++l) CHECK(std::abs(a2.at2(p, l) - row[l] / sum) < 1e-6);
  }

  // Zero features -> every row uniform 1/l.
  const Tensor fz({4, 3});
  const Tensor az = attention_scores(fz, bank2);
  for (std::size_t i = 0; i < az.numel(); ++i) CHECK(az[i] == doctest::Approx(0.2));

  Tensor bad({3, 3});
  CHECK_THROWS_AS(attention_scores(bad, bank2), Error);
}

TEST_CASE("reconstruct: single vector, uniform attention, oracle") {
  Rng rng(39);
  MemoryBank<float> one = init_memory<float>(1, 4, 9, true);
  Tensor a({3, 1});
  a.fill(1.0f);
  const Tensor r = reconstruct(one, a);
  for (int p = 0; p < 3; ++p)
    for (int c = 0; c < 4; ++c) CHECK(r.at2(c, p) == one.v.at2(c, 0));

  MemoryBank<float> bank = init_memory<float>(6, 4, 10, true);
  Tensor uni({2, 6});
  uni.fill(1.0f / 6.0f);
  const Tensor ru = reconstruct(bank, uni);
  for (int c = 0; c < 4; ++c) {
    float mean = 0.0f;
    for (int l = 0; l < 6; ++l) mean += bank.v.at2(c, l);
    mean /= 6.0f;
    CHECK(ru.at2(c, 0) == doctest::Approx(mean).epsilon(1e-6));
  }

  const Tensor f = random_tensor<float>({4, 5}, rng);
  const Tensor att = attention_scores(f, bank);
  const Tensor rec = reconstruct(bank, att);
  for (int c = 0; c < 4; ++c)
    for (int p = 0; p < 5; ++p) {
      double acc = 0.0;
      for (int l = 0; l < 6; ++l) acc += bank.v.at2(c, l) * att.at2(p, l);
      CHECK(std::abs(rec.at2(c, p) - acc) < 1e-6);
    }
}

TEST_CASE("reconstructed columns stay inside the memory's coordinate hull") {
  Rng rng(40);
  MemoryBank<float> bank = init_memory<float>(8, 6, 11, true);
  const Tensor f = random_tensor<float>({6, 10}, rng, -3.0, 3.0);
  const Tensor a = attention_scores(f, bank);
  const Tensor r = reconstruct(bank, a);
  for (int c = 0; c < 6; ++c) {
    float lo = bank.v.at2(c, 0), hi = bank.v.at2(c, 0);
    for (int l = 1; l < 8; ++l) {
      lo = std::min(lo, bank.v.at2(c, l));
      hi = std::max(hi, bank.v.at2(c, l));
    }
    for (int p = 0; p < 10; ++p) {
      CHECK(r.at2(c, p) >= lo - 1e-6f);
      CHECK(r.at2(c, p) <= hi + 1e-6f);
    }
  }
}

TEST_CASE("attention sharpens monotonically as features scale up") {
  Rng rng(41);
  MemoryBank<float> bank = init_memory<float>(6, 5, 12, true);
  const Tensor f = random_tensor<float>({5, 4}, rng, -1.0, 1.0);
  double prev_max[4] = {0, 0, 0, 0};
  bool first = true;
  for (const float scale : {1.0f, 2.0f, 5.0f, 10.0f, 30.0f}) {
    Tensor fs = f;
    for (auto& v : fs.data) v *= scale;
    const Tensor a = attention_scores(fs, bank);
    for (int p = 0; p < 4; ++p) {
      float mx = 0.0f;
      for (int l = 0; l < 6; ++l) mx = std::max(mx, a.at2(p, l));
      if (!first) CHECK(mx > prev_max[p]);
      prev_max[p] = mx;
    }
    first = false;
  }
}

TEST_CASE("fuse: concat/add semantics and lossless split") {
  Rng rng(42);
  const Tensor f_ld = random_tensor<float>({4, 6}, rng);
  const Tensor f_hd = random_tensor<float>({4, 6}, rng);

  const Tensor cat = fuse(f_ld, f_hd, FusionKind::concat);
  CHECK(cat.shape == std::vector<int>{8, 6});
  Tensor back_ld, back_hd;
  fuse_backward_concat(cat, back_ld, back_hd);
  CHECK(back_ld.data == f_ld.data);
  CHECK(back_hd.data == f_hd.data);

  Tensor zero({4, 6});
  const Tensor added = fuse(f_ld, zero, FusionKind::add);
  CHECK(added.data == f_ld.data);

  CHECK_THROWS_AS(fuse(f_ld, f_hd, FusionKind::adaptive), Error);
  CHECK_THROWS_AS(parse_fusion("bogus"), Error);
  Tensor wrong({3, 6});
  CHECK_THROWS_AS(fuse(f_ld, wrong, FusionKind::add), Error);
}

TEST_CASE("init_memory: determinism, bounds, seed sensitivity") {
  const MemoryBank<float> a = init_memory<float>(64, 64, 5, true);
  const MemoryBank<float> b = init_memory<float>(64, 64, 5, true);
  CHECK(a.v.data == b.v.data);
  CHECK(a.v.shape == std::vector<int>{64, 64});
  for (float v : a.v.data) CHECK(std::abs(v) <= 1.0f / 8.0f);

  const MemoryBank<float> c = init_memory<float>(64, 64, 6, true);
  CHECK(a.v.data != c.v.data);
  CHECK_THROWS_AS(init_memory<float>(0, 4, 1, true), Error);
}

TEST_CASE("attention/reconstruct gradients match finite differences") {
  Rng rng(43);
  const int c2 = 3, l = 4, hw = 5;
  TensorD f = random_tensor<double>({c2, hw}, rng);
  MemoryBank<double> bank;
  bank.v = random_tensor<double>({c2, l}, rng);
  bank.dv = TensorD({c2, l});
  bank.trainable = true;
  const TensorD coeff = random_tensor<double>({c2, hw}, rng);

  // Scalar objective: sum(coeff .* reconstruct(V, attention(F,V))).
  const auto objective = [&](const TensorD& ft, const TensorD& vt) {
    MemoryBank<double> tmp;
    tmp.v = vt;
    tmp.dv = TensorD({c2, l});
    tmp.trainable = true;
    const TensorD a = attention_scores(ft, tmp);
    const TensorD r = reconstruct(tmp, a);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.numel(); ++i) acc += coeff[i] * r[i];
    return acc;
  };

  const TensorD a = attention_scores(f, bank);
  TensorD df({c2, hw});
  TensorD da = reconstruct_backward(bank, a, coeff);
  attention_backward(f, bank, a, da, df);

  const double eps = 1e-6;
  for (int t = 0; t < 8; ++t) {
    const int i = rng.uniform_int(0, c2 * hw - 1);
    TensorD plus = f, minus = f;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd = (objective(plus, bank.v) - objective(minus, bank.v)) / (2 * eps);
    CHECK(std::abs(fd - df[i]) <= 1e-4 * std::max({1.0, std::abs(fd), std::abs(df[i])}));
  }
  for (int t = 0; t < 8; ++t) {
    const int i = rng.uniform_int(0, c2 * l - 1);
    TensorD plus = bank.v, minus = bank.v;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd = (objective(f, plus) - objective(f, minus)) / (2 * eps);
    CHECK(std::abs(fd - bank.dv[i]) <= 1e-4 * std::max({1.0, std::abs(fd), std::abs(bank.dv[i])}));
  }
}

TEST_CASE("channel pooling: identity, hand case, loop oracle") {
  Tensor single({1, 2, 2});
  single.data = {1.0f, 2.0f, 3.0f, 4.0f};
  const Tensor same = channel_max_pool_map(single);
  CHECK(same.data == std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f});

  Tensor two({2, 1, 2});
  two.data = {1.0f, 2.0f, 3.0f, 0.0f};
  const Tensor pooled = channel_max_pool_map(two);
  CHECK(pooled.data == std::vector<float>{3.0f, 2.0f});

  Rng rng(44);
  const Tensor f = random_tensor<float>({8, 4, 4}, rng);
  const Tensor m = channel_max_pool_map(f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      float best = f.at3(0, y, x);
      for (int c = 1; c < 8; ++c) best = std::max(best, f.at3(c, y, x));
      CHECK(m.at2(y, x) == best);
    }
}

TEST_CASE("upsample: identity, replication, block-mean round trip") {
  Rng rng(45);
  const Tensor m = random_tensor<float>({3, 3}, rng);
  CHECK(upsample_nearest_map(m, 3, 3).data == m.data);

  Tensor one({1, 1});
  one.data = {2.5f};
  const Tensor up = upsample_nearest_map(one, 2, 2);
  for (float v : up.data) CHECK(v == 2.5f);

  const Tensor up48 = upsample_nearest_map(m, 48, 48);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      double mean = 0.0;
      for (int dy = 0; dy < 16; ++dy)
        for (int dx = 0; dx < 16; ++dx) mean += up48.at2(16 * y + dy, 16 * x + dx);
      CHECK(static_cast<float>(mean / 256.0) == doctest::Approx(m.at2(y, x)).epsilon(1e-6));
    }
}

TEST_CASE("build_feature_target: identity, spikes, shared kernel with the image path") {
  Rng rng(46);
  Tensor m = random_tensor<float>({4, 8}, rng);
  CHECK(build_feature_target(m, SimConfig{0, 0.5}).data == m.data);

  Tensor spike({1, 8});
  spike.at2(0, 2) = 1.0f;
  const Tensor t = build_feature_target(spike, SimConfig{3, 0.5});
  REQUIRE(t.shape == std::vector<int>{1, 11});
  CHECK(t.at2(0, 2) == 0.5f);
  CHECK(t.at2(0, 5) == 0.5f);

  // Bitwise identical to the image simulation applied to a 1-channel raster.
  const Tensor map = random_tensor<float>({6, 9}, rng);
  const SimConfig cfg{4, 0.35};
  const Tensor target = build_feature_target(map, cfg);
  Raster as_image(6, 9, 1);
  as_image.values = map.data;
  const Raster sim = simulate_high_density(as_image, cfg);
  CHECK(target.data == sim.values);
}

TEST_CASE("hfem_loss: zero cases, hand value, mask support") {
  Tensor m({1, 2}), target({1, 2}), gt({1, 2});
  m.data = {1.0f, 0.0f};
  gt.data = {1.0f, 0.0f};
  CHECK(hfem_loss(m, m, gt) == 0.0f);

  Tensor gt0({1, 2});
  CHECK(hfem_loss(m, target, gt0) == 0.0f);

  // Masked MSE with mean over 2 pixels: ((1*1 - 0*1)^2 + 0)/2.
  CHECK(hfem_loss(m, target, gt) == doctest::Approx(0.5));

  Tensor wrong({2, 2});
  CHECK_THROWS_AS(hfem_loss(m, target, wrong), Error);

  // Invariance to changes where the mask is zero.
  Rng rng(47);
  Tensor m2 = testutil::random_tensor<float>({4, 4}, rng);
  Tensor t2 = testutil::random_tensor<float>({4, 4}, rng);
  Tensor g2({4, 4});
  g2.at2(1, 1) = 0.7f;
  g2.at2(2, 3) = 0.2f;
  const float base = hfem_loss(m2, t2, g2);
  Tensor m3 = m2;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      if (g2.at2(y, x) == 0.0f) m3.at2(y, x) += 100.0f;
  CHECK(hfem_loss(m3, t2, g2) == base);

  // Binary mask variant counts support, not magnitude.
  const float dens = hfem_loss(m2, t2, g2, HfemMask::density);
  const float bin = hfem_loss(m2, t2, g2, HfemMask::binary);
  CHECK(dens != bin);
}

TEST_CASE("hfem_loss gradient matches finite differences") {
  Rng rng(48);
  TensorD m = random_tensor<double>({4, 4}, rng);
  const TensorD target = random_tensor<double>({4, 4}, rng);
  const TensorD gt = random_tensor<double>({4, 4}, rng, 0.0, 1.0);
  const TensorD grad = hfem_loss_backward(m, target, gt);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < m.numel(); ++i) {
    TensorD plus = m, minus = m;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd = (hfem_loss(plus, target, gt) - hfem_loss(minus, target, gt)) / (2 * eps);
    CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max({1.0, std::abs(fd), std::abs(grad[i])}));
  }
}

TEST_CASE("freeze_branch: immutability under optimizer steps, idempotence") {
  ModelConfig cfg = tiny_model_config();
  cfg.kind = ModelKind::single_memory;
  CountingModel<float> low = build_single_model<float>(cfg, 77);
  freeze_branch(low.high);
  CHECK(low.high.frozen);
  freeze_branch(low.high);
  CHECK(low.high.frozen);

  CountingModel<float> model = build_dual_model<float>(tiny_model_config(), low, 78);

  std::vector<ParamRef<float>> all;
  std::vector<StateRef<float>> state;
  model.all_params(all, state);
  std::vector<std::vector<float>> before;
  for (const auto& p : all) before.push_back(p.value->data);

  // Five optimization steps on random gradients.
  auto trainable = model.trainable_params();
  AdamW<float> opt;
  opt.init(trainable, 0.01);
  Rng rng(79);
  for (int step = 0; step < 5; ++step) {
    for (auto& p : trainable)
      for (auto& g : p.grad->data) g = static_cast<float>(rng.uniform(-1.0, 1.0));
    opt.step(trainable, 1e-2);
  }

  bool low_changed = false, high_changed = false;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool changed = all[i].value->data != before[i];
    if (all[i].name.rfind("low.", 0) == 0 && changed) low_changed = true;
    if (all[i].name.rfind("high.", 0) == 0 && changed) high_changed = true;
  }
  CHECK_FALSE(low_changed);
  CHECK(high_changed);
}
