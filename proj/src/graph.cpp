#include "l2h/graph.hpp"

#include <cmath>

#include "l2h/kernels.hpp"

namespace l2h {

namespace {

template <typename T>
TensorT<T> flatten2(const TensorT<T>& f3d) {
  TensorT<T> f = f3d;
  f.shape = {f3d.dim(0), f3d.dim(1) * f3d.dim(2)};
  return f;
}

template <typename T>
TensorT<T> reshape3(const TensorT<T>& f2d, int h, int w) {
  TensorT<T> f = f2d;
  f.shape = {f2d.dim(0), h, w};
  return f;
}

// One pass of the trainable branch over one view.
template <typename T>
struct BranchPass {
  EncoderActs<T> enc_acts;
  DecoderActs<T> dec_acts;
  FeaturePyramid<T> pyr;
  TensorT<T> f3d;
  DdmemOut<T> dd;
  TensorT<T> pre_relu;    // {1,h,w}
  TensorT<T> pred;        // {h,w}
  TensorT<T> cls_logits;  // {h,w}
};

template <typename T>
BranchPass<T> run_trainable_branch(CountingModel<T>& model, const TensorT<T>& x, bool training,
                                   bool want_heads) {
  BranchPass<T> p;
  p.pyr = encode(x, model.high, &p.enc_acts, training);
  p.f3d = decode(p.pyr.s3, model.high, &p.dec_acts, training);
  p.dd = ddmem_forward(model, p.f3d);
  if (want_heads) {
    p.pred = predict_density(model, p.dd, &p.pre_relu);
    TensorT<T> logits3 = model.high.cls_head.forward(p.dd.cls_in);
    p.cls_logits = logits3;
    p.cls_logits.shape = {logits3.dim(1), logits3.dim(2)};
  }
  return p;
}

template <typename T>
void add_into(TensorT<T>& dst, const TensorT<T>& src) {
  if (!dst.numel()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
}

// Gradient flow from the fused feature (and the con term) back to the
// flattened decoder feature. d_fused3/d_cls3/d_pred may be empty.
template <typename T>
TensorT<T> ddmem_backward(CountingModel<T>& model, const BranchPass<T>& p,
                          const TensorT<T>& d_fused3, const TensorT<T>& d_cls3,
                          const TensorT<T>& d_pred, const TensorT<T>& d_a_ld_extra,
                          const TensorT<T>& d_a_hd_extra) {
  const ModelConfig& cfg = model.cfg;
  const int h = p.f3d.dim(1), w = p.f3d.dim(2);
  const TensorT<T> f = flatten2(p.f3d);
  TensorT<T> df({cfg.c2, h * w});

  const bool adaptive_path = cfg.kind == ModelKind::dual && cfg.banks == BankSelect::both &&
                             cfg.fusion == FusionKind::adaptive;

  TensorT<T> d_r_ld, d_r_hd;  // {c2,hw}
  if (adaptive_path && (d_pred.numel() || d_cls3.numel())) {
    // pred = sel*d_ld + (1-sel)*d_hd; cls/select consume the concat feature.
    TensorT<T> d_sel_z(p.dd.sel_z.shape);
    TensorT<T> d_dld(p.dd.d_ld.shape), d_dhd(p.dd.d_hd.shape);
    for (std::size_t i = 0; i < d_sel_z.numel(); ++i) {
      const T g = d_pred.numel() ? d_pred[i] : T(0);
      d_dld[i] = g * p.dd.sel[i];
      d_dhd[i] = g * (T(1) - p.dd.sel[i]);
      d_sel_z[i] = g * (p.dd.d_ld[i] - p.dd.d_hd[i]) * p.dd.sel[i] * (T(1) - p.dd.sel[i]);
    }
    TensorT<T> d_cat = model.adaptive.select.backward(p.dd.cls_in, d_sel_z, true);
    if (d_cls3.numel()) add_into(d_cat, d_cls3);

    TensorT<T> d_zld, d_zhd;
    relu_backward(p.dd.z_ld, d_dld, d_zld);
    relu_backward(p.dd.z_hd, d_dhd, d_zhd);
    const TensorT<T> r_ld3 = reshape3(p.dd.r_ld, h, w);
    const TensorT<T> r_hd3 = reshape3(p.dd.r_hd, h, w);
    d_r_ld = flatten2(model.adaptive.head_ld.backward(r_ld3, d_zld, true));
    d_r_hd = flatten2(model.adaptive.head_hd.backward(r_hd3, d_zhd, true));
    TensorT<T> d_cat2 = flatten2(d_cat);
    TensorT<T> d_cat_ld, d_cat_hd;
    fuse_backward_concat(d_cat2, d_cat_ld, d_cat_hd);
    add_into(d_r_ld, d_cat_ld);
    add_into(d_r_hd, d_cat_hd);
  } else if (cfg.kind == ModelKind::single_plain ||
             (cfg.kind == ModelKind::dual && cfg.banks == BankSelect::none)) {
    TensorT<T> acc = d_fused3;
    if (d_cls3.numel()) add_into(acc, d_cls3);
    return acc;  // fused feature IS the decoder output
  } else if (d_fused3.numel() || d_cls3.numel()) {
    TensorT<T> d_fused = d_fused3;
    if (d_cls3.numel()) add_into(d_fused, d_cls3);
    TensorT<T> d_fused2 = flatten2(d_fused);
    if (cfg.kind == ModelKind::single_memory) {
      d_r_hd = d_fused2;
    } else if (cfg.banks == BankSelect::ldcm) {
      d_r_ld = d_fused2;
    } else if (cfg.banks == BankSelect::hdcm) {
      d_r_hd = d_fused2;
    } else if (cfg.fusion == FusionKind::concat) {
      fuse_backward_concat(d_fused2, d_r_ld, d_r_hd);
    } else {  // add
      d_r_ld = d_fused2;
      d_r_hd = d_fused2;
    }
  }

  // Reconstruction and attention backward per used bank.
  if (d_r_ld.numel() || d_a_ld_extra.numel()) {
    MemoryBank<T>& bank = model.low.bank;
    TensorT<T> d_a = d_r_ld.numel() ? reconstruct_backward(bank, p.dd.a_ld, d_r_ld)
                                    : TensorT<T>(p.dd.a_ld.shape);
    if (d_a_ld_extra.numel()) add_into(d_a, d_a_ld_extra);
    attention_backward(f, bank, p.dd.a_ld, d_a, df);
  }
  if (d_r_hd.numel() || d_a_hd_extra.numel()) {
    MemoryBank<T>& bank = model.high.bank;
    TensorT<T> d_a = d_r_hd.numel() ? reconstruct_backward(bank, p.dd.a_hd, d_r_hd)
                                    : TensorT<T>(p.dd.a_hd.shape);
    if (d_a_hd_extra.numel()) add_into(d_a, d_a_hd_extra);
    attention_backward(f, bank, p.dd.a_hd, d_a, df);
  }
  return reshape3(df, h, w);
}

template <typename T>
void scale_tensor(TensorT<T>& t, T s) {
  for (auto& v : t.data) v *= s;
}

}  // namespace

template <typename T>
TensorT<T> pad_cols(const TensorT<T>& m, int new_w) {
  const int h = m.dim(0), w = m.dim(1);
  if (new_w == w) return m;
  if (new_w < w) fail(ErrorCode::shape_mismatch, "pad_cols: target narrower than source");
  TensorT<T> out({h, new_w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at2(y, x) = m.at2(y, x);
  return out;
}

template <typename T>
T hfem_scale_term(const TensorT<T>& f_le, const TensorT<T>& f_he, const TensorT<T>& gt_sim,
                  const SimConfig& sim_cfg, const HfemConfig& cfg, int crop_h, int crop_w,
                  T factor, TensorT<T>* d_f_he) {
  const int full_w = gt_sim.dim(1);
  const int channels = f_he.dim(0);
  if (d_f_he && !d_f_he->numel()) *d_f_he = TensorT<T>(f_he.shape);

  // Loss for one pooled-map pair plus its backward into the pooled map grad.
  const auto masked_term = [&](const TensorT<T>& m_le, const TensorT<T>& m_he, T sub_factor,
                               TensorT<T>* d_m_he) -> T {
    TensorT<T> m_le_up = upsample_nearest_map(m_le, crop_h, crop_w);
    TensorT<T> target = pad_cols(build_feature_target(m_le_up, sim_cfg, cfg.overlay), full_w);
    TensorT<T> m_he_up = upsample_nearest_map(m_he, crop_h, full_w);
    const T loss = hfem_loss(m_he_up, target, gt_sim, cfg.mask);
    if (d_m_he) {
      TensorT<T> g = hfem_loss_backward(m_he_up, target, gt_sim, cfg.mask);
      scale_tensor(g, sub_factor);
      TensorT<T> pooled_grad = upsample_nearest_backward(g, m_he.dim(0), m_he.dim(1));
      add_into(*d_m_he, pooled_grad);
    }
    return loss;
  };

  T loss = T(0);
  if (cfg.pool == HfemPool::max || cfg.pool == HfemPool::avg_max) {
    const T sub = cfg.pool == HfemPool::avg_max ? factor / T(2) : factor;
    std::vector<int> argmax_he;
    TensorT<T> m_le = channel_max_pool_map(f_le);
    TensorT<T> m_he = channel_max_pool_map(f_he, d_f_he ? &argmax_he : nullptr);
    TensorT<T> d_m;
    const T part = masked_term(m_le, m_he, sub, d_f_he ? &d_m : nullptr);
    loss += cfg.pool == HfemPool::avg_max ? part / T(2) : part;
    if (d_f_he) {
      TensorT<T> routed = channel_max_pool_backward(d_m, argmax_he, channels);
      add_into(*d_f_he, routed);
    }
  }
  if (cfg.pool == HfemPool::avg || cfg.pool == HfemPool::avg_max) {
    const T sub = cfg.pool == HfemPool::avg_max ? factor / T(2) : factor;
    TensorT<T> m_le, m_he;
    channel_avg_pool(f_le, m_le);
    channel_avg_pool(f_he, m_he);
    TensorT<T> d_m;
    const T part = masked_term(m_le, m_he, sub, d_f_he ? &d_m : nullptr);
    loss += cfg.pool == HfemPool::avg_max ? part / T(2) : part;
    if (d_f_he) {
      // Average pooling spreads the gradient uniformly over channels.
      const T inv = T(1) / static_cast<T>(channels);
      const std::size_t plane = d_m.numel();
      for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
          d_f_he->data[static_cast<std::size_t>(c) * plane + i] += d_m[i] * inv;
    }
  }
  if (cfg.pool == HfemPool::none) {
    // Per-channel masked MSE, averaged over channels.
    const std::size_t plane_le = static_cast<std::size_t>(f_le.dim(1)) * f_le.dim(2);
    const std::size_t plane_he = static_cast<std::size_t>(f_he.dim(1)) * f_he.dim(2);
    const T inv = T(1) / static_cast<T>(channels);
    for (int c = 0; c < channels; ++c) {
      TensorT<T> m_le({f_le.dim(1), f_le.dim(2)});
      TensorT<T> m_he({f_he.dim(1), f_he.dim(2)});
      std::copy_n(f_le.ptr() + c * plane_le, plane_le, m_le.ptr());
      std::copy_n(f_he.ptr() + c * plane_he, plane_he, m_he.ptr());
      TensorT<T> d_m;
      loss += masked_term(m_le, m_he, factor * inv, d_f_he ? &d_m : nullptr) * inv;
      if (d_f_he)
        for (std::size_t i = 0; i < plane_he; ++i)
          d_f_he->data[static_cast<std::size_t>(c) * plane_he + i] += d_m[i];
    }
  }
  return loss;
}

template <typename T>
LossParts item_forward_backward(CountingModel<T>& model, const TrainItem<T>& item,
                                const LossWeights& weights, bool do_backward, T grad_scale,
                                bool update_bn) {
  const ModelConfig& cfg = model.cfg;
  LossParts parts;
  const bool dual = cfg.kind == ModelKind::dual;
  const bool with_con = cfg.uses_attention() && weights.theta_con > 0.0;

  const TensorT<T>& x1 = dual ? item.sim1 : item.view1;
  const TensorT<T>& x2 = dual ? item.sim2 : item.view2;
  const TensorT<T>& gt = dual ? item.gt_sim : item.gt_ori;

  // Frozen low branch: constants for the enhancement targets.
  FeaturePyramid<T> pyr_low;
  if (dual) pyr_low = encode<T>(item.view1, model.low, nullptr, false);

  BranchPass<T> p2;
  if (with_con) p2 = run_trainable_branch(model, x2, true, false);
  BranchPass<T> p1 = run_trainable_branch(model, x1, true, true);

  TensorT<T> gt_pooled = block_sum_pool_map(gt, 16);
  parts.den = static_cast<double>(density_loss(p1.pred, gt_pooled));
  parts.cls = static_cast<double>(patch_cls_loss(p1.cls_logits, gt, cfg.cls_patch));

  int n_banks = 0;
  if (with_con) {
    if (p1.dd.a_ld.numel()) {
      parts.con += static_cast<double>(attention_consistency_loss(p1.dd.a_ld, p2.dd.a_ld));
      ++n_banks;
    }
    if (p1.dd.a_hd.numel()) {
      parts.con += static_cast<double>(attention_consistency_loss(p1.dd.a_hd, p2.dd.a_hd));
      ++n_banks;
    }
    if (n_banks > 0) parts.con /= n_banks;
  }

  // Enhancement term and its gradient into the encoder taps.
  TensorT<T> d_s1_hfem, d_s2_hfem, d_s3_hfem;
  const int crop_h = item.view1.dim(1), crop_w = item.view1.dim(2);
  if (dual && weights.theta_enh > 0.0) {
    const T factor = static_cast<T>(weights.theta_enh) * grad_scale;
    if (cfg.hfem.use_s1)
      parts.enh += static_cast<double>(
          hfem_scale_term(pyr_low.s1, p1.pyr.s1, gt, item.sim_cfg, cfg.hfem, crop_h, crop_w,
                          factor, do_backward ? &d_s1_hfem : nullptr));
    if (cfg.hfem.use_s2)
      parts.enh += static_cast<double>(
          hfem_scale_term(pyr_low.s2, p1.pyr.s2, gt, item.sim_cfg, cfg.hfem, crop_h, crop_w,
                          factor, do_backward ? &d_s2_hfem : nullptr));
    if (cfg.hfem.use_s3)
      parts.enh += static_cast<double>(
          hfem_scale_term(pyr_low.s3, p1.pyr.s3, gt, item.sim_cfg, cfg.hfem, crop_h, crop_w,
                          factor, do_backward ? &d_s3_hfem : nullptr));
  }

  if (!do_backward) return parts;

  const bool adaptive_path = dual && cfg.banks == BankSelect::both &&
                             cfg.fusion == FusionKind::adaptive;

  // Density gradient through the head.
  TensorT<T> d_pred = density_loss_backward(p1.pred, gt_pooled);
  scale_tensor(d_pred, static_cast<T>(weights.theta_den) * grad_scale);
  TensorT<T> d_fused3;
  if (!adaptive_path) {
    TensorT<T> d_pred3 = d_pred;
    d_pred3.shape = {1, p1.pred.dim(0), p1.pred.dim(1)};
    TensorT<T> d_prerelu;
    relu_backward(p1.pre_relu, d_pred3, d_prerelu);
    d_fused3 = model.high.density_head.backward(p1.dd.fused, d_prerelu, true);
  }

  // Classification gradient.
  TensorT<T> d_logits = patch_cls_loss_backward(p1.cls_logits, gt, cfg.cls_patch);
  scale_tensor(d_logits, static_cast<T>(weights.theta_cls) * grad_scale);
  TensorT<T> d_logits3 = d_logits;
  d_logits3.shape = {1, d_logits.dim(0), d_logits.dim(1)};
  TensorT<T> d_cls3 = model.high.cls_head.backward(p1.dd.cls_in, d_logits3, true);

  // Consistency gradient w.r.t. the primary view's attention.
  TensorT<T> d_a_ld_1, d_a_hd_1;
  if (with_con && n_banks > 0) {
    const T cs = static_cast<T>(weights.theta_con) * grad_scale / static_cast<T>(n_banks);
    if (p1.dd.a_ld.numel()) {
      d_a_ld_1 = attention_consistency_backward(p1.dd.a_ld, p2.dd.a_ld);
      scale_tensor(d_a_ld_1, cs);
    }
    if (p1.dd.a_hd.numel()) {
      d_a_hd_1 = attention_consistency_backward(p1.dd.a_hd, p2.dd.a_hd);
      scale_tensor(d_a_hd_1, cs);
    }
  }

  TensorT<T> d_f3d = ddmem_backward(model, p1, d_fused3, d_cls3,
                                    adaptive_path ? d_pred : TensorT<T>(), d_a_ld_1, d_a_hd_1);
  TensorT<T> d_s3 = model.high.decoder.backward(p1.dec_acts, d_f3d, true);
  if (d_s3_hfem.numel()) add_into(d_s3, d_s3_hfem);
  model.high.encoder.backward(p1.enc_acts, d_s1_hfem, d_s2_hfem, d_s3, false);

  // Secondary view: only the consistency term flows back.
  if (with_con && n_banks > 0) {
    const T cs = static_cast<T>(weights.theta_con) * grad_scale / static_cast<T>(n_banks);
    TensorT<T> d_a_ld_2, d_a_hd_2;
    if (p2.dd.a_ld.numel()) {
      d_a_ld_2 = attention_consistency_backward(p2.dd.a_ld, p1.dd.a_ld);
      scale_tensor(d_a_ld_2, cs);
    }
    if (p2.dd.a_hd.numel()) {
      d_a_hd_2 = attention_consistency_backward(p2.dd.a_hd, p1.dd.a_hd);
      scale_tensor(d_a_hd_2, cs);
    }
    TensorT<T> d_f3d_2 = ddmem_backward(model, p2, TensorT<T>(), TensorT<T>(), TensorT<T>(),
                                        d_a_ld_2, d_a_hd_2);
    TensorT<T> d_s3_2 = model.high.decoder.backward(p2.dec_acts, d_f3d_2, true);
    model.high.encoder.backward(p2.enc_acts, TensorT<T>(), TensorT<T>(), d_s3_2, false);
  }

  if (update_bn && !model.high.frozen) {
    model.high.encoder.apply_ema(p1.enc_acts);
    model.high.decoder.apply_ema(p1.dec_acts);
  }
  return parts;
}

#define L2H_INSTANTIATE_GRAPH(T)                                                             \
  template struct TrainItem<T>;                                                              \
  template LossParts item_forward_backward<T>(CountingModel<T>&, const TrainItem<T>&,        \
                                              const LossWeights&, bool, T, bool);            \
  template T hfem_scale_term<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,     \
                                const SimConfig&, const HfemConfig&, int, int, T,            \
                                TensorT<T>*);                                                \
  template TensorT<T> pad_cols<T>(const TensorT<T>&, int);

L2H_INSTANTIATE_GRAPH(float)
L2H_INSTANTIATE_GRAPH(double)

#undef L2H_INSTANTIATE_GRAPH

}  // namespace l2h
