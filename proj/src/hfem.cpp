#include "l2h/hfem.hpp"

#include <algorithm>

#include "l2h/kernels.hpp"

namespace l2h {

HfemConfig parse_hfem_scale(const std::string& name, HfemConfig base) {
  base.use_s1 = base.use_s2 = base.use_s3 = false;
  if (name == "s1")
    base.use_s1 = true;
  else if (name == "s2")
    base.use_s2 = true;
  else if (name == "s3")
    base.use_s3 = true;
  else if (name == "s2+s3")
    base.use_s2 = base.use_s3 = true;
  else if (name == "s1+s3")
    base.use_s1 = base.use_s3 = true;
  else
    fail(ErrorCode::config_error, "unknown hfem scale: " + name);
  return base;
}

HfemPool parse_hfem_pool(const std::string& name) {
  if (name == "max") return HfemPool::max;
  if (name == "avg") return HfemPool::avg;
  if (name == "none") return HfemPool::none;
  if (name == "avg+max") return HfemPool::avg_max;
  fail(ErrorCode::config_error, "unknown hfem pool: " + name);
}

HfemMask parse_hfem_mask(const std::string& name) {
  if (name == "density") return HfemMask::density;
  if (name == "binary") return HfemMask::binary;
  fail(ErrorCode::config_error, "unknown hfem mask: " + name);
}

HfemOverlay parse_hfem_overlay(const std::string& name) {
  if (name == "blend") return HfemOverlay::blend;
  if (name == "max") return HfemOverlay::max;
  fail(ErrorCode::config_error, "unknown hfem overlay: " + name);
}

std::string hfem_scale_name(const HfemConfig& cfg) {
  std::string s;
  for (const auto& [on, tag] : {std::pair{cfg.use_s1, "s1"}, {cfg.use_s2, "s2"}, {cfg.use_s3, "s3"}})
    if (on) s += (s.empty() ? "" : "+") + std::string(tag);
  return s;
}

const char* hfem_pool_name(HfemPool p) {
  switch (p) {
    case HfemPool::max: return "max";
    case HfemPool::avg: return "avg";
    case HfemPool::none: return "none";
    case HfemPool::avg_max: return "avg+max";
  }
  return "?";
}

const char* hfem_mask_name(HfemMask m) { return m == HfemMask::density ? "density" : "binary"; }
const char* hfem_overlay_name(HfemOverlay o) { return o == HfemOverlay::blend ? "blend" : "max"; }

template <typename T>
SpatialActivationMap<T> channel_max_pool_map(const TensorT<T>& f, std::vector<int>* argmax) {
  TensorT<T> out;
  channel_max_pool(f, out, argmax);
  return out;
}

template <typename T>
SpatialActivationMap<T> upsample_nearest_map(const SpatialActivationMap<T>& m, int out_h,
                                             int out_w) {
  TensorT<T> out;
  upsample_nearest(m, out_h, out_w, out);
  return out;
}

template <typename T>
SpatialActivationMap<T> build_feature_target(const SpatialActivationMap<T>& m_le,
                                             const SimConfig& cfg, HfemOverlay overlay) {
  if (cfg.shift_s < 0) fail(ErrorCode::negative_shift, "shift must be >= 0");
  const int h = m_le.dim(0), w = m_le.dim(1);
  TensorT<T> out({h, w + cfg.shift_s});
  if (overlay == HfemOverlay::blend) {
    pad_overlay(m_le.ptr(), h, w, 1, cfg.shift_s, static_cast<T>(cfg.blend_lambda),
                static_cast<T>(1.0 - cfg.blend_lambda), out.ptr());
  } else {
    const int ow = w + cfg.shift_s;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        const T left = (x >= cfg.shift_s) ? m_le.at2(y, x - cfg.shift_s) : T(0);
        const T right = (x < w) ? m_le.at2(y, x) : T(0);
        out.at2(y, x) = std::max(left, right);
      }
  }
  return out;
}

namespace {

template <typename T>
inline T mask_value(T g, HfemMask mask) {
  return mask == HfemMask::density ? g : (g > T(0) ? T(1) : T(0));
}

}  // namespace

template <typename T>
T hfem_loss(const SpatialActivationMap<T>& m_he, const SpatialActivationMap<T>& target,
            const TensorT<T>& gt_sim, HfemMask mask) {
  if (!m_he.same_shape(target) || !m_he.same_shape(gt_sim))
    fail(ErrorCode::shape_mismatch, "hfem_loss: inputs must share shape");
  const std::size_t n = m_he.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T g = mask_value(gt_sim[i], mask);
    const T d = m_he[i] * g - target[i] * g;
    acc += static_cast<double>(d) * static_cast<double>(d);
  }
  return static_cast<T>(acc / static_cast<double>(n));
}

template <typename T>
SpatialActivationMap<T> hfem_loss_backward(const SpatialActivationMap<T>& m_he,
                                           const SpatialActivationMap<T>& target,
                                           const TensorT<T>& gt_sim, HfemMask mask) {
  if (!m_he.same_shape(target) || !m_he.same_shape(gt_sim))
    fail(ErrorCode::shape_mismatch, "hfem_loss: inputs must share shape");
  const std::size_t n = m_he.numel();
  TensorT<T> grad(m_he.shape);
  const T scale = T(2) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T g = mask_value(gt_sim[i], mask);
    grad[i] = scale * (m_he[i] * g - target[i] * g) * g;
  }
  return grad;
}

template <typename T>
TensorT<T> upsample_nearest_backward(const TensorT<T>& dy, int src_h, int src_w) {
  const int h = dy.dim(0), w = dy.dim(1);
  if (h % src_h != 0 || w % src_w != 0)
    fail(ErrorCode::non_integer_factor, "upsample backward: dims must divide");
  const int fy = h / src_h, fx = w / src_w;
  TensorT<T> out({src_h, src_w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at2(y / fy, x / fx) += dy.at2(y, x);
  return out;
}

template <typename T>
TensorT<T> channel_max_pool_backward(const TensorT<T>& dy, const std::vector<int>& argmax,
                                     int channels) {
  const int h = dy.dim(0), w = dy.dim(1);
  TensorT<T> out({channels, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < plane; ++i)
    out.data[static_cast<std::size_t>(argmax[i]) * plane + i] = dy.data[i];
  return out;
}

#define L2H_INSTANTIATE_HFEM(T)                                                               \
  template SpatialActivationMap<T> channel_max_pool_map<T>(const TensorT<T>&,                 \
                                                           std::vector<int>*);               \
  template SpatialActivationMap<T> upsample_nearest_map<T>(const SpatialActivationMap<T>&,    \
                                                           int, int);                        \
  template SpatialActivationMap<T> build_feature_target<T>(const SpatialActivationMap<T>&,    \
                                                           const SimConfig&, HfemOverlay);   \
  template T hfem_loss<T>(const SpatialActivationMap<T>&, const SpatialActivationMap<T>&,     \
                          const TensorT<T>&, HfemMask);                                      \
  template SpatialActivationMap<T> hfem_loss_backward<T>(const SpatialActivationMap<T>&,      \
                                                         const SpatialActivationMap<T>&,     \
                                                         const TensorT<T>&, HfemMask);       \
  template TensorT<T> upsample_nearest_backward<T>(const TensorT<T>&, int, int);              \
  template TensorT<T> channel_max_pool_backward<T>(const TensorT<T>&, const std::vector<int>&, \
                                                   int);

L2H_INSTANTIATE_HFEM(float)
L2H_INSTANTIATE_HFEM(double)

#undef L2H_INSTANTIATE_HFEM

}  // namespace l2h
