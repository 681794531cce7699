#include "l2h/losses.hpp"

#include <cmath>

#include "l2h/kernels.hpp"

namespace l2h {

double total_loss(const LossParts& parts, const LossWeights& w) {
  const double total = w.theta_den * parts.den + w.theta_enh * parts.enh +
                       w.theta_cls * parts.cls + w.theta_con * parts.con;
  if (!std::isfinite(total)) fail(ErrorCode::non_finite_loss, "loss is not finite");
  return total;
}

template <typename T>
T density_loss(const TensorT<T>& pred, const TensorT<T>& gt_pooled) {
  if (!pred.same_shape(gt_pooled)) fail(ErrorCode::shape_mismatch, "density_loss shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt_pooled[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(pred.numel()));
}

template <typename T>
TensorT<T> density_loss_backward(const TensorT<T>& pred, const TensorT<T>& gt_pooled) {
  TensorT<T> grad(pred.shape);
  const T scale = T(2) / static_cast<T>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) grad[i] = scale * (pred[i] - gt_pooled[i]);
  return grad;
}

template <typename T>
TensorT<T> patch_labels(const TensorT<T>& gt, int patch) {
  TensorT<T> pooled;
  block_sum_pool(gt, patch, pooled);
  for (auto& v : pooled.data) v = v > T(0) ? T(1) : T(0);
  return pooled;
}

template <typename T>
T patch_cls_loss(const TensorT<T>& logits, const TensorT<T>& gt, int patch) {
  TensorT<T> labels = patch_labels(gt, patch);
  if (!logits.same_shape(labels))
    fail(ErrorCode::shape_mismatch, "patch_cls_loss: logit grid does not cover the GT");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    // Stable BCE-with-logits: max(z,0) - z*y + log(1 + exp(-|z|)).
    const double z = static_cast<double>(logits[i]);
    const double y = static_cast<double>(labels[i]);
    acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return static_cast<T>(acc / static_cast<double>(logits.numel()));
}

template <typename T>
TensorT<T> patch_cls_loss_backward(const TensorT<T>& logits, const TensorT<T>& gt, int patch) {
  TensorT<T> labels = patch_labels(gt, patch);
  TensorT<T> grad(logits.shape);
  const T scale = T(1) / static_cast<T>(logits.numel());
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const T sig = T(1) / (T(1) + std::exp(-logits[i]));
    grad[i] = scale * (sig - labels[i]);
  }
  return grad;
}

template <typename T>
T attention_consistency_loss(const TensorT<T>& a_view1, const TensorT<T>& a_view2) {
  if (!a_view1.same_shape(a_view2))
    fail(ErrorCode::shape_mismatch, "attention_consistency_loss shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a_view1.numel(); ++i) {
    const double d = static_cast<double>(a_view1[i]) - static_cast<double>(a_view2[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(a_view1.numel()));
}

template <typename T>
TensorT<T> attention_consistency_backward(const TensorT<T>& a_view1, const TensorT<T>& a_view2) {
  TensorT<T> grad(a_view1.shape);
  const T scale = T(2) / static_cast<T>(a_view1.numel());
  for (std::size_t i = 0; i < a_view1.numel(); ++i) grad[i] = scale * (a_view1[i] - a_view2[i]);
  return grad;
}

template <typename T>
TensorT<T> block_sum_pool_map(const TensorT<T>& m, int factor) {
  TensorT<T> out;
  block_sum_pool(m, factor, out);
  return out;
}

#define L2H_INSTANTIATE_LOSSES(T)                                                            \
  template T density_loss<T>(const TensorT<T>&, const TensorT<T>&);                          \
  template TensorT<T> density_loss_backward<T>(const TensorT<T>&, const TensorT<T>&);        \
  template TensorT<T> patch_labels<T>(const TensorT<T>&, int);                               \
  template T patch_cls_loss<T>(const TensorT<T>&, const TensorT<T>&, int);                   \
  template TensorT<T> patch_cls_loss_backward<T>(const TensorT<T>&, const TensorT<T>&, int); \
  template T attention_consistency_loss<T>(const TensorT<T>&, const TensorT<T>&);            \
  template TensorT<T> attention_consistency_backward<T>(const TensorT<T>&, const TensorT<T>&); \
  template TensorT<T> block_sum_pool_map<T>(const TensorT<T>&, int);

L2H_INSTANTIATE_LOSSES(float)
L2H_INSTANTIATE_LOSSES(double)

#undef L2H_INSTANTIATE_LOSSES

}  // namespace l2h
