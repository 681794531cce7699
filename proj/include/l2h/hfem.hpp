#pragma once

#include <string>
#include <vector>

#include "l2h/sim.hpp"
#include "l2h/tensor.hpp"

namespace l2h {

// Single-channel spatial activation map, {h, w}.
template <typename T>
using SpatialActivationMap = TensorT<T>;

enum class HfemPool { max, avg, none, avg_max };
enum class HfemMask { density, binary };
enum class HfemOverlay { blend, max };

struct HfemConfig {
  // Encoder scales the loss is applied at; any subset of {s1,s2,s3}.
  bool use_s1 = false;
  bool use_s2 = false;
  bool use_s3 = true;
  HfemPool pool = HfemPool::max;
  HfemMask mask = HfemMask::density;
  HfemOverlay overlay = HfemOverlay::blend;
};

HfemConfig parse_hfem_scale(const std::string& name, HfemConfig base);
HfemPool parse_hfem_pool(const std::string& name);
HfemMask parse_hfem_mask(const std::string& name);
HfemOverlay parse_hfem_overlay(const std::string& name);
std::string hfem_scale_name(const HfemConfig& cfg);
const char* hfem_pool_name(HfemPool p);
const char* hfem_mask_name(HfemMask m);
const char* hfem_overlay_name(HfemOverlay o);

// Per-pixel max over channels; {C,h,w} -> {h,w}.
template <typename T>
SpatialActivationMap<T> channel_max_pool_map(const TensorT<T>& f, std::vector<int>* argmax = nullptr);

// Nearest-neighbour upsampling to an integer-multiple size.
template <typename T>
SpatialActivationMap<T> upsample_nearest_map(const SpatialActivationMap<T>& m, int out_h, int out_w);

// Shift-overlay of the clear branch's pooled map, same transform and weights
// as the image simulation: lambda*padLeft + (1-lambda)*padRight, or the
// elementwise max of the two pads for the max-overlay variant.
template <typename T>
SpatialActivationMap<T> build_feature_target(const SpatialActivationMap<T>& m_le,
                                             const SimConfig& cfg,
                                             HfemOverlay overlay = HfemOverlay::blend);

// MSE(m_he .* gt, target .* gt), mean over all pixels. gt acts as a
// real-valued multiplicative mask (or a 0/1 mask for the binary variant).
template <typename T>
T hfem_loss(const SpatialActivationMap<T>& m_he, const SpatialActivationMap<T>& target,
            const TensorT<T>& gt_sim, HfemMask mask = HfemMask::density);

// d(hfem_loss)/d(m_he), same reduction.
template <typename T>
SpatialActivationMap<T> hfem_loss_backward(const SpatialActivationMap<T>& m_he,
                                           const SpatialActivationMap<T>& target,
                                           const TensorT<T>& gt_sim,
                                           HfemMask mask = HfemMask::density);

// Backward of upsample_nearest_map: block-sums the gradient into source cells.
template <typename T>
TensorT<T> upsample_nearest_backward(const TensorT<T>& dy, int src_h, int src_w);

// Backward of channel_max_pool_map: routes each pixel's gradient to the
// winning channel.
template <typename T>
TensorT<T> channel_max_pool_backward(const TensorT<T>& dy, const std::vector<int>& argmax,
                                     int channels);

}  // namespace l2h
