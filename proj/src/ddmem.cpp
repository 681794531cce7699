#include "l2h/ddmem.hpp"

#include <cmath>

#include "l2h/kernels.hpp"

namespace l2h {

template <typename T>
AttentionMatrix<T> attention_scores(const TensorT<T>& f, const MemoryBank<T>& bank) {
  if (f.rank() != 2 || f.dim(0) != bank.c2())
    fail(ErrorCode::dim_mismatch, "attention: feature/bank channel dims differ");
  TensorT<T> z;
  matmul(f, true, bank.v, false, z);  // {hw, l}
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(bank.c2())));
  for (auto& e : z.data) e *= scale;
  TensorT<T> a;
  softmax_rows(z, a);
  return a;
}

template <typename T>
TensorT<T> reconstruct(const MemoryBank<T>& bank, const AttentionMatrix<T>& a) {
  if (a.rank() != 2 || a.dim(1) != bank.size_l())
    fail(ErrorCode::dim_mismatch, "reconstruct: attention/bank sizes differ");
  TensorT<T> r;
  matmul(bank.v, false, a, true, r);  // {c2, hw}
  return r;
}

template <typename T>
void attention_backward(const TensorT<T>& f, MemoryBank<T>& bank, const AttentionMatrix<T>& a,
                        const TensorT<T>& da, TensorT<T>& df_accum) {
  const int hw = a.dim(0), l = a.dim(1);
  // Softmax rows: dz = (da - <da, a>_row) * a.
  TensorT<T> dz({hw, l});
  for (int r = 0; r < hw; ++r) {
    const T* ar = a.ptr() + static_cast<std::size_t>(r) * l;
    const T* dar = da.ptr() + static_cast<std::size_t>(r) * l;
    T* dzr = dz.ptr() + static_cast<std::size_t>(r) * l;
    T dot = T(0);
    for (int c = 0; c < l; ++c) dot += dar[c] * ar[c];
    for (int c = 0; c < l; ++c) dzr[c] = (dar[c] - dot) * ar[c];
  }
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(bank.c2())));
  TensorT<T> df;
  matmul(bank.v, false, dz, true, df);  // {c2, hw}
  for (std::size_t i = 0; i < df.numel(); ++i) df_accum[i] += df[i] * scale;
  if (bank.trainable) {
    TensorT<T> dv;
    matmul(f, false, dz, false, dv);  // {c2, l}
    for (std::size_t i = 0; i < dv.numel(); ++i) bank.dv[i] += dv[i] * scale;
  }
}

template <typename T>
AttentionMatrix<T> reconstruct_backward(MemoryBank<T>& bank, const AttentionMatrix<T>& a,
                                        const TensorT<T>& dr) {
  if (bank.trainable) {
    TensorT<T> dv;
    matmul(dr, false, a, false, dv);  // {c2, l}
    for (std::size_t i = 0; i < dv.numel(); ++i) bank.dv[i] += dv[i];
  }
  TensorT<T> da;
  matmul(dr, true, bank.v, false, da);  // {hw, l}
  return da;
}

FusionKind parse_fusion(const std::string& name) {
  if (name == "concat") return FusionKind::concat;
  if (name == "add") return FusionKind::add;
  if (name == "adaptive") return FusionKind::adaptive;
  fail(ErrorCode::unknown_strategy, "unknown fusion strategy: " + name);
}

const char* fusion_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::concat: return "concat";
    case FusionKind::add: return "add";
    case FusionKind::adaptive: return "adaptive";
  }
  return "?";
}

template <typename T>
TensorT<T> fuse(const TensorT<T>& f_ld, const TensorT<T>& f_hd, FusionKind kind) {
  if (!f_ld.same_shape(f_hd)) fail(ErrorCode::dim_mismatch, "fuse: input shapes differ");
  switch (kind) {
    case FusionKind::concat: {
      TensorT<T> out({f_ld.dim(0) * 2, f_ld.dim(1)});
      std::copy(f_ld.data.begin(), f_ld.data.end(), out.data.begin());
      std::copy(f_hd.data.begin(), f_hd.data.end(), out.data.begin() + f_ld.numel());
      return out;
    }
    case FusionKind::add: {
      TensorT<T> out = f_ld;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] += f_hd[i];
      return out;
    }
    case FusionKind::adaptive:
      fail(ErrorCode::unknown_strategy,
           "adaptive fusion blends density maps; use AdaptiveFusion in the model path");
  }
  fail(ErrorCode::unknown_strategy, "invalid fusion kind");
}

template <typename T>
void fuse_backward_concat(const TensorT<T>& dfused, TensorT<T>& d_ld, TensorT<T>& d_hd) {
  const int c2 = dfused.dim(0) / 2;
  const int hw = dfused.dim(1);
  d_ld = TensorT<T>({c2, hw});
  d_hd = TensorT<T>({c2, hw});
  std::copy(dfused.data.begin(), dfused.data.begin() + d_ld.numel(), d_ld.data.begin());
  std::copy(dfused.data.begin() + d_ld.numel(), dfused.data.end(), d_hd.data.begin());
}

template <typename T>
void AdaptiveFusion<T>::init(int c2, Rng& rng) {
  head_ld.init(c2, 1, 1, 1, 0, rng);
  head_hd.init(c2, 1, 1, 1, 0, rng);
  select.init(2 * c2, 1, 1, 1, 0, rng);
}

template <typename T>
void AdaptiveFusion<T>::zero_grad() {
  head_ld.zero_grad();
  head_hd.zero_grad();
  select.zero_grad();
}

template <typename T>
void AdaptiveFusion<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params) {
  head_ld.collect(prefix + ".head_ld", params);
  head_hd.collect(prefix + ".head_hd", params);
  select.collect(prefix + ".select", params);
}

#define L2H_INSTANTIATE_DDMEM(T)                                                              \
  template AttentionMatrix<T> attention_scores<T>(const TensorT<T>&, const MemoryBank<T>&);   \
  template TensorT<T> reconstruct<T>(const MemoryBank<T>&, const AttentionMatrix<T>&);        \
  template void attention_backward<T>(const TensorT<T>&, MemoryBank<T>&,                      \
                                      const AttentionMatrix<T>&, const TensorT<T>&,           \
                                      TensorT<T>&);                                           \
  template AttentionMatrix<T> reconstruct_backward<T>(MemoryBank<T>&, const AttentionMatrix<T>&, \
                                                      const TensorT<T>&);                     \
  template TensorT<T> fuse<T>(const TensorT<T>&, const TensorT<T>&, FusionKind);              \
  template void fuse_backward_concat<T>(const TensorT<T>&, TensorT<T>&, TensorT<T>&);         \
  template struct AdaptiveFusion<T>;

L2H_INSTANTIATE_DDMEM(float)
L2H_INSTANTIATE_DDMEM(double)

#undef L2H_INSTANTIATE_DDMEM

}  // namespace l2h
