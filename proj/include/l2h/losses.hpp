#pragma once

#include "l2h/tensor.hpp"

namespace l2h {

// Weighting coefficients for the four loss terms; defaults 1, 1, 10, 10.
struct LossWeights {
  double theta_den = 1.0;
  double theta_enh = 1.0;
  double theta_cls = 10.0;
  double theta_con = 10.0;
};

struct LossParts {
  double den = 0.0;
  double enh = 0.0;
  double cls = 0.0;
  double con = 0.0;
};

// theta_den*den + theta_enh*enh + theta_cls*cls + theta_con*con.
// Throws NonFiniteLoss on NaN/inf parts.
double total_loss(const LossParts& parts, const LossWeights& w);

// Pixelwise MSE between equal-shape maps. The ground truth is expected to be
// block-sum-pooled to the prediction's stride-16 resolution beforehand.
template <typename T>
T density_loss(const TensorT<T>& pred, const TensorT<T>& gt_pooled);

template <typename T>
TensorT<T> density_loss_backward(const TensorT<T>& pred, const TensorT<T>& gt_pooled);

// Patch labels: 1 where the patch holds any ground-truth mass. logits is the
// {h/patch, w/patch} grid, gt the full-resolution density map.
template <typename T>
TensorT<T> patch_labels(const TensorT<T>& gt, int patch);

// Mean binary cross-entropy over patches, computed from logits.
template <typename T>
T patch_cls_loss(const TensorT<T>& logits, const TensorT<T>& gt, int patch);

template <typename T>
TensorT<T> patch_cls_loss_backward(const TensorT<T>& logits, const TensorT<T>& gt, int patch);

// Mean squared difference between the attention matrices of a photometric
// augmentation pair at aligned pixels.
template <typename T>
T attention_consistency_loss(const TensorT<T>& a_view1, const TensorT<T>& a_view2);

// Gradient w.r.t. the first argument; negate for the second.
template <typename T>
TensorT<T> attention_consistency_backward(const TensorT<T>& a_view1, const TensorT<T>& a_view2);

// 16x16 block sums preserving total count; {H,W} -> {H/16,W/16}.
template <typename T>
TensorT<T> block_sum_pool_map(const TensorT<T>& m, int factor);

}  // namespace l2h
