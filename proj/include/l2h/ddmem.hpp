#pragma once

#include <string>

#include "l2h/network.hpp"
#include "l2h/tensor.hpp"

namespace l2h {

// Attention scores are row-stochastic: every row non-negative, summing to 1.
// Stored as an {hw, l} tensor.
template <typename T>
using AttentionMatrix = TensorT<T>;

// Row-wise softmax of (F^T V) / sqrt(c2). F is the flattened {c2, hw}
// decoder feature, V a {c2, l} memory bank.
template <typename T>
AttentionMatrix<T> attention_scores(const TensorT<T>& f, const MemoryBank<T>& bank);

// V * A^T: every output column is a convex combination of memory vectors.
template <typename T>
TensorT<T> reconstruct(const MemoryBank<T>& bank, const AttentionMatrix<T>& a);

// dA -> accumulates dF and (when the bank is trainable) bank.dv.
// `a` must be the attention matrix produced by attention_scores(f, bank).
template <typename T>
void attention_backward(const TensorT<T>& f, MemoryBank<T>& bank, const AttentionMatrix<T>& a,
                        const TensorT<T>& da, TensorT<T>& df_accum);

// dR -> dA; accumulates bank.dv when trainable.
template <typename T>
AttentionMatrix<T> reconstruct_backward(MemoryBank<T>& bank, const AttentionMatrix<T>& a,
                                        const TensorT<T>& dr);

enum class FusionKind { concat, add, adaptive };

FusionKind parse_fusion(const std::string& name);
const char* fusion_name(FusionKind kind);

// Feature-level fusion: concat -> {2*c2, hw}, add -> elementwise sum.
// The adaptive strategy blends density maps with learned heads and lives in
// AdaptiveFusion below, so it is rejected here.
template <typename T>
TensorT<T> fuse(const TensorT<T>& f_ld, const TensorT<T>& f_hd, FusionKind kind);

// Splits a concat-fused gradient back into the two halves.
template <typename T>
void fuse_backward_concat(const TensorT<T>& dfused, TensorT<T>& d_ld, TensorT<T>& d_hd);

// Per-memory density heads plus a sigmoid selection map that blends the two
// predictions pixelwise.
template <typename T>
struct AdaptiveFusion {
  Conv2d<T> head_ld, head_hd, select;

  void init(int c2, Rng& rng);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params);
};

}  // namespace l2h
