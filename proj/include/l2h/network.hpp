#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "l2h/layers.hpp"
#include "l2h/raster.hpp"

namespace l2h {

// Three-stage encoder with taps at strides 4, 8 and 16. Stage 1 downsamples
// twice, stages 2 and 3 once each. out_channels_c1 always equals
// stage_channels[2] (the S3 tap is the c1-channel feature).
struct EncoderConfig {
  int in_channels = 3;
  int base_channels = 32;
  std::array<int, 3> stage_channels{32, 64, 128};
  int out_channels_c1 = 128;

  void validate() const {
    if (out_channels_c1 != stage_channels[2])
      fail(ErrorCode::config_error, "out_channels_c1 must equal stage_channels[2]");
    for (int c : stage_channels)
      if (c < 1) fail(ErrorCode::config_error, "stage channels must be >= 1");
  }
};

template <typename T>
struct FeaturePyramid {
  TensorT<T> s1, s2, s3;  // strides 4, 8, 16
};

template <typename T>
struct EncoderActs {
  std::array<BlockCache<T>, 6> blocks;
};

template <typename T>
struct Encoder {
  EncoderConfig cfg;
  std::array<ConvBnRelu<T>, 6> blocks;

  void init(const EncoderConfig& cfg_, Rng& rng);
  // Input {C,H,W} with H and W multiples of 16.
  FeaturePyramid<T> forward(const TensorT<T>& x, bool training, EncoderActs<T>* acts) const;
  // d_s1/d_s2 may be empty when only the S3 tap carries gradient.
  TensorT<T> backward(const EncoderActs<T>& acts, const TensorT<T>& d_s1,
                      const TensorT<T>& d_s2, const TensorT<T>& d_s3, bool want_dx);
  void apply_ema(const EncoderActs<T>& acts);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<StateRef<T>>& state);
};

template <typename T>
struct DecoderActs {
  std::array<BlockCache<T>, 7> blocks;
};

// Six 3x3 conv layers plus one 1x1, each conv + batch-norm + ReLU, constant
// hidden width c2.
template <typename T>
struct Decoder {
  int in_ch = 0, c2 = 0;
  std::array<ConvBnRelu<T>, 7> blocks;

  void init(int in_channels, int c2_, Rng& rng);
  TensorT<T> forward(const TensorT<T>& s3, bool training, DecoderActs<T>* acts) const;
  TensorT<T> backward(const DecoderActs<T>& acts, const TensorT<T>& dy, bool want_dx);
  void apply_ema(const DecoderActs<T>& acts);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<StateRef<T>>& state);
};

// Learnable memory: l vectors of dimension c2, stored as a c2 x l matrix.
template <typename T>
struct MemoryBank {
  TensorT<T> v, dv;  // {c2, l}
  bool trainable = true;

  int c2() const { return v.numel() ? v.dim(0) : 0; }
  int size_l() const { return v.numel() ? v.dim(1) : 0; }
  void zero_grad() { dv.zero(); }
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params) {
    params.push_back({prefix + ".v", &v, &dv});
  }
};

// Entries i.i.d. uniform in [-1/sqrt(c2), +1/sqrt(c2)], deterministic per seed.
template <typename T>
MemoryBank<T> init_memory(int l, int c2, std::uint64_t seed, bool trainable);

// One complete encoder -> decoder -> head pathway plus its memory bank.
// `frozen` excludes every contained parameter from optimization and switches
// normalization to running statistics.
template <typename T>
struct Branch {
  Encoder<T> encoder;
  Decoder<T> decoder;
  MemoryBank<T> bank;
  Conv2d<T> density_head;  // 1x1, ReLU applied by the caller
  Conv2d<T> cls_head;      // 1x1, raw logits
  bool frozen = false;

  // Instrumentation for the inference-path purity tests.
  mutable std::uint64_t encode_calls = 0;
  mutable std::uint64_t decode_calls = 0;

  void init(const EncoderConfig& enc_cfg, int c2, int head_in_ch, Rng& rng);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<StateRef<T>>& state);
};

// Spec-level branch operations.
template <typename T>
FeaturePyramid<T> encode(const TensorT<T>& img, const Branch<T>& branch,
                         EncoderActs<T>* acts = nullptr, bool training = false);

template <typename T>
TensorT<T> decode(const TensorT<T>& s3, const Branch<T>& branch,
                  DecoderActs<T>* acts = nullptr, bool training = false);

// 1x1 conv + ReLU; single-channel non-negative map at the feature resolution.
template <typename T>
TensorT<T> density_head_forward(const TensorT<T>& fused, const Branch<T>& branch,
                                TensorT<T>* pre_relu = nullptr);

template <typename T>
void freeze_branch(Branch<T>& branch) {
  branch.frozen = true;
}

// Raster (HWC, [0,1]) to network input {C,H,W}; grayscale replicated across
// the encoder's input channels.
template <typename T>
TensorT<T> raster_to_input(const Raster& img, int in_channels);

}  // namespace l2h
