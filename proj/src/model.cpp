#include "l2h/model.hpp"

#include <cmath>

#include "l2h/kernels.hpp"

namespace l2h {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "dual") return ModelKind::dual;
  if (name == "single_memory") return ModelKind::single_memory;
  if (name == "single_plain") return ModelKind::single_plain;
  fail(ErrorCode::config_error, "unknown model kind: " + name);
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::dual: return "dual";
    case ModelKind::single_memory: return "single_memory";
    case ModelKind::single_plain: return "single_plain";
  }
  return "?";
}

BankSelect parse_bank_select(const std::string& name) {
  if (name == "both") return BankSelect::both;
  if (name == "ldcm") return BankSelect::ldcm;
  if (name == "hdcm") return BankSelect::hdcm;
  if (name == "none") return BankSelect::none;
  fail(ErrorCode::config_error, "unknown bank selection: " + name);
}

const char* bank_select_name(BankSelect banks) {
  switch (banks) {
    case BankSelect::both: return "both";
    case BankSelect::ldcm: return "ldcm";
    case BankSelect::hdcm: return "hdcm";
    case BankSelect::none: return "none";
  }
  return "?";
}

void ModelConfig::validate() const {
  encoder.validate();
  if (c2 < 1 || memory_l < 1) fail(ErrorCode::config_error, "c2 and memory size must be >= 1");
  if (cls_patch < 1) fail(ErrorCode::config_error, "cls patch size must be >= 1");
  if (!(gt_sigma > 0.0)) fail(ErrorCode::config_error, "gt sigma must be positive");
}

template <typename T>
void CountingModel<T>::zero_grad() {
  if (has_low) low.zero_grad();
  high.zero_grad();
  if (cfg.fusion == FusionKind::adaptive && cfg.kind == ModelKind::dual) adaptive.zero_grad();
}

template <typename T>
std::vector<ParamRef<T>> CountingModel<T>::trainable_params() {
  std::vector<ParamRef<T>> params;
  std::vector<StateRef<T>> state;
  if (!high.frozen) high.collect("high", params, state);
  // The high branch's bank rides along in collect(); drop it when flagged
  // non-trainable.
  std::erase_if(params, [this](const ParamRef<T>& p) {
    return p.name == "high.bank.v" && !high.bank.trainable;
  });
  if (has_low && low.bank.trainable && low.bank.v.numel())
    params.push_back({"low.bank.v", &low.bank.v, &low.bank.dv});
  if (cfg.kind == ModelKind::dual && cfg.fusion == FusionKind::adaptive &&
      cfg.banks == BankSelect::both)
    adaptive.collect("adaptive", params);
  return params;
}

template <typename T>
void CountingModel<T>::all_params(std::vector<ParamRef<T>>& params,
                                  std::vector<StateRef<T>>& state) {
  if (has_low) low.collect("low", params, state);
  high.collect("high", params, state);
  if (cfg.kind == ModelKind::dual && cfg.fusion == FusionKind::adaptive &&
      cfg.banks == BankSelect::both)
    adaptive.collect("adaptive", params);
}

template <typename T>
CountingModel<T> build_single_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == ModelKind::dual)
    fail(ErrorCode::config_error, "single model requested with dual config");
  cfg.validate();
  CountingModel<T> model;
  model.cfg = cfg;
  Rng rng(derive_seed(seed, "branch-init"));
  model.high.init(cfg.encoder, cfg.c2, cfg.head_channels(), rng);
  if (cfg.kind == ModelKind::single_memory)
    model.high.bank = init_memory<T>(cfg.memory_l, cfg.c2, derive_seed(seed, "bank"), true);
  return model;
}

template <typename T>
CountingModel<T> build_dual_model(const ModelConfig& cfg, const CountingModel<T>& pretrained_low,
                                  std::uint64_t seed) {
  if (cfg.kind != ModelKind::dual) fail(ErrorCode::config_error, "dual config required");
  cfg.validate();
  if (pretrained_low.cfg.kind != ModelKind::single_memory)
    fail(ErrorCode::config_error, "pretrained low branch must be a single_memory model");
  if (pretrained_low.cfg.c2 != cfg.c2 ||
      pretrained_low.cfg.encoder.stage_channels != cfg.encoder.stage_channels)
    fail(ErrorCode::config_error, "pretrained low branch shape mismatch");

  CountingModel<T> model;
  model.cfg = cfg;
  model.has_low = true;
  model.low = pretrained_low.high;
  freeze_branch(model.low);
  model.low.bank.trainable = cfg.ldcm_trainable;

  Rng rng(derive_seed(seed, "hd-branch-init"));
  model.high.init(cfg.encoder, cfg.c2, cfg.head_channels(), rng);
  model.high.cls_head.init(cfg.cls_channels(), 1, 1, 1, 0, rng);
  if (cfg.banks == BankSelect::both || cfg.banks == BankSelect::hdcm)
    model.high.bank = init_memory<T>(cfg.memory_l, cfg.c2, derive_seed(seed, "hdcm"), true);
  if (cfg.fusion == FusionKind::adaptive && cfg.banks == BankSelect::both)
    model.adaptive.init(cfg.c2, rng);
  return model;
}

namespace {

template <typename T>
TensorT<T> flatten_feature(const TensorT<T>& f3d) {
  TensorT<T> f = f3d;
  f.shape = {f3d.dim(0), f3d.dim(1) * f3d.dim(2)};
  return f;
}

template <typename T>
TensorT<T> unflatten_feature(const TensorT<T>& f2d, int h, int w) {
  TensorT<T> f = f2d;
  f.shape = {f2d.dim(0), h, w};
  return f;
}

}  // namespace

template <typename T>
DdmemOut<T> ddmem_forward(const CountingModel<T>& model, const TensorT<T>& f3d) {
  const ModelConfig& cfg = model.cfg;
  const int h = f3d.dim(1), w = f3d.dim(2);
  const TensorT<T> f = flatten_feature(f3d);
  DdmemOut<T> out;

  if (cfg.kind == ModelKind::single_plain) {
    out.fused = f3d;
    out.cls_in = f3d;
    return out;
  }
  if (cfg.kind == ModelKind::single_memory) {
    out.a_hd = attention_scores(f, model.high.bank);
    out.r_hd = reconstruct(model.high.bank, out.a_hd);
    out.fused = unflatten_feature(out.r_hd, h, w);
    out.cls_in = out.fused;
    return out;
  }

  // Dual model.
  const bool use_ld = cfg.banks == BankSelect::both || cfg.banks == BankSelect::ldcm;
  const bool use_hd = cfg.banks == BankSelect::both || cfg.banks == BankSelect::hdcm;
  if (use_ld) {
    out.a_ld = attention_scores(f, model.low.bank);
    out.r_ld = reconstruct(model.low.bank, out.a_ld);
  }
  if (use_hd) {
    out.a_hd = attention_scores(f, model.high.bank);
    out.r_hd = reconstruct(model.high.bank, out.a_hd);
  }

  if (cfg.banks == BankSelect::none) {
    out.fused = f3d;
    out.cls_in = f3d;
  } else if (cfg.banks == BankSelect::ldcm) {
    out.fused = unflatten_feature(out.r_ld, h, w);
    out.cls_in = out.fused;
  } else if (cfg.banks == BankSelect::hdcm) {
    out.fused = unflatten_feature(out.r_hd, h, w);
    out.cls_in = out.fused;
  } else if (cfg.fusion == FusionKind::adaptive) {
    TensorT<T> cat2d = fuse(out.r_ld, out.r_hd, FusionKind::concat);
    out.cls_in = unflatten_feature(cat2d, h, w);
    const TensorT<T> r_ld3 = unflatten_feature(out.r_ld, h, w);
    const TensorT<T> r_hd3 = unflatten_feature(out.r_hd, h, w);
    out.z_ld = model.adaptive.head_ld.forward(r_ld3);
    out.z_hd = model.adaptive.head_hd.forward(r_hd3);
    relu_forward(out.z_ld, out.d_ld);
    relu_forward(out.z_hd, out.d_hd);
    out.sel_z = model.adaptive.select.forward(out.cls_in);
    out.sel = TensorT<T>(out.sel_z.shape);
    for (std::size_t i = 0; i < out.sel_z.numel(); ++i)
      out.sel[i] = T(1) / (T(1) + std::exp(-out.sel_z[i]));
  } else {
    TensorT<T> fused2d = fuse(out.r_ld, out.r_hd, cfg.fusion);
    out.fused = unflatten_feature(fused2d, h, w);
    out.cls_in = out.fused;
  }
  return out;
}

template <typename T>
TensorT<T> predict_density(const CountingModel<T>& model, const DdmemOut<T>& dd,
                           TensorT<T>* pre_relu) {
  if (model.cfg.kind == ModelKind::dual && model.cfg.fusion == FusionKind::adaptive &&
      model.cfg.banks == BankSelect::both) {
    // Per-memory maps blended by the sigmoid selection mask.
    TensorT<T> pred({dd.d_ld.dim(1), dd.d_ld.dim(2)});
    for (std::size_t i = 0; i < pred.numel(); ++i)
      pred[i] = dd.sel[i] * dd.d_ld[i] + (T(1) - dd.sel[i]) * dd.d_hd[i];
    return pred;
  }
  TensorT<T> out = density_head_forward(dd.fused, model.high, pre_relu);
  out.shape = {out.dim(1), out.dim(2)};
  return out;
}

#define L2H_INSTANTIATE_MODEL(T)                                                             \
  template struct CountingModel<T>;                                                          \
  template CountingModel<T> build_single_model<T>(const ModelConfig&, std::uint64_t);        \
  template CountingModel<T> build_dual_model<T>(const ModelConfig&, const CountingModel<T>&, \
                                                std::uint64_t);                              \
  template DdmemOut<T> ddmem_forward<T>(const CountingModel<T>&, const TensorT<T>&);         \
  template TensorT<T> predict_density<T>(const CountingModel<T>&, const DdmemOut<T>&,        \
                                         TensorT<T>*);

L2H_INSTANTIATE_MODEL(float)
L2H_INSTANTIATE_MODEL(double)

#undef L2H_INSTANTIATE_MODEL

}  // namespace l2h
