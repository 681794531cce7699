#pragma once

#include "l2h/losses.hpp"
#include "l2h/model.hpp"
#include "l2h/sim.hpp"

namespace l2h {

// One training sample, already cropped, simulated and padded to multiples
// of 16. For single-branch kinds the sim tensors stay empty.
template <typename T>
struct TrainItem {
  TensorT<T> view1, view2;  // photometric views of the crop {C,H,W}
  TensorT<T> sim1, sim2;    // simulated views {C,H,Wp}
  TensorT<T> gt_ori;        // {H,W}
  TensorT<T> gt_sim;        // {H,Wp}
  SimConfig sim_cfg;
};

// Runs the full forward graph for one item, returns the unweighted loss
// parts, and (when do_backward) accumulates parameter gradients of the
// weighted total scaled by grad_scale. update_bn applies the normalization
// EMA updates from the primary view's pass.
template <typename T>
LossParts item_forward_backward(CountingModel<T>& model, const TrainItem<T>& item,
                                const LossWeights& weights, bool do_backward, T grad_scale,
                                bool update_bn);

// Head-feature-enhancement term for one encoder scale: pools both features
// per cfg, upsamples to full resolution, shift-overlays the clear branch's
// map, masks with gt_sim and takes the MSE. Accumulates factor * dLoss/df_he
// into d_f_he when non-null. f_le comes from the frozen branch (no gradient).
template <typename T>
T hfem_scale_term(const TensorT<T>& f_le, const TensorT<T>& f_he, const TensorT<T>& gt_sim,
                  const SimConfig& sim_cfg, const HfemConfig& cfg, int crop_h, int crop_w,
                  T factor, TensorT<T>* d_f_he);

// Widens a {H,W} map with zero columns on the right.
template <typename T>
TensorT<T> pad_cols(const TensorT<T>& m, int new_w);

}  // namespace l2h
