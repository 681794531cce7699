#pragma once

#include <string>
#include <vector>

#include "l2h/ddmem.hpp"
#include "l2h/hfem.hpp"
#include "l2h/network.hpp"

namespace l2h {

// dual: low (frozen) + high branch with dual-memory encoding, the main model.
// single_memory: one branch re-encoded through its own bank (the low-density
// branch during pretraining). single_plain: one branch, decoder straight into
// the heads (the no-simulation/no-memory baseline).
enum class ModelKind { dual, single_memory, single_plain };

// Which memories the dual model re-encodes with.
enum class BankSelect { both, ldcm, hdcm, none };

ModelKind parse_model_kind(const std::string& name);
const char* model_kind_name(ModelKind kind);
BankSelect parse_bank_select(const std::string& name);
const char* bank_select_name(BankSelect banks);

struct ModelConfig {
  ModelKind kind = ModelKind::dual;
  EncoderConfig encoder;
  int c2 = 64;
  int memory_l = 64;
  FusionKind fusion = FusionKind::concat;
  BankSelect banks = BankSelect::both;
  bool ldcm_trainable = false;
  HfemConfig hfem;
  bool use_hdsm = true;
  double gt_sigma = 4.0;
  int cls_patch = 16;

  // Channels entering the density head / classification head.
  int head_channels() const {
    return kind == ModelKind::dual && banks == BankSelect::both && fusion == FusionKind::concat
               ? 2 * c2
               : c2;
  }
  int cls_channels() const {
    return kind == ModelKind::dual && banks == BankSelect::both && fusion != FusionKind::add
               ? 2 * c2
               : c2;
  }
  bool uses_attention() const {
    return kind == ModelKind::single_memory ||
           (kind == ModelKind::dual && banks != BankSelect::none);
  }
  void validate() const;
};

template <typename T>
struct CountingModel {
  ModelConfig cfg;
  Branch<T> low;   // dual only; frozen, training-time targets + LDCM
  Branch<T> high;  // the inference pathway (the only branch for single kinds)
  AdaptiveFusion<T> adaptive;
  bool has_low = false;

  void zero_grad();
  std::vector<ParamRef<T>> trainable_params();
  void all_params(std::vector<ParamRef<T>>& params, std::vector<StateRef<T>>& state);
};

// Fresh single-branch model (pretraining or baseline).
template <typename T>
CountingModel<T> build_single_model(const ModelConfig& cfg, std::uint64_t seed);

// Dual model around a pretrained single_memory model: its branch becomes the
// frozen low branch, its bank the (frozen by default) LDCM; the high branch
// and HDCM are freshly initialized.
template <typename T>
CountingModel<T> build_dual_model(const ModelConfig& cfg, const CountingModel<T>& pretrained_low,
                                  std::uint64_t seed);

// Memory re-encoding outputs for one flattened decoder feature.
template <typename T>
struct DdmemOut {
  TensorT<T> a_ld, a_hd;    // attention matrices {hw,l}; empty when unused
  TensorT<T> r_ld, r_hd;    // reconstructions {c2,hw}
  TensorT<T> fused;         // head input {head_ch,h,w} (empty for adaptive)
  TensorT<T> cls_in;        // cls head input {cls_ch,h,w}
  // Adaptive fusion intermediates.
  TensorT<T> z_ld, z_hd, d_ld, d_hd, sel_z, sel;
};

// f3d is the {c2,h,w} decoder output.
template <typename T>
DdmemOut<T> ddmem_forward(const CountingModel<T>& model, const TensorT<T>& f3d);

// Final density map {h,w} (+ optional pre-ReLU cache for backward).
template <typename T>
TensorT<T> predict_density(const CountingModel<T>& model, const DdmemOut<T>& dd,
                           TensorT<T>* pre_relu = nullptr);

}  // namespace l2h
