#include "l2h/network.hpp"

#include "l2h/kernels.hpp"

namespace l2h {

template <typename T>
void Encoder<T>::init(const EncoderConfig& cfg_, Rng& rng) {
  cfg = cfg_;
  cfg.validate();
  const auto [c_s1, c_s2, c_s3] = cfg.stage_channels;
  blocks[0].init(cfg.in_channels, c_s1, 3, 2, rng);
  blocks[1].init(c_s1, c_s1, 3, 2, rng);  // stride 4 tap
  blocks[2].init(c_s1, c_s2, 3, 2, rng);
  blocks[3].init(c_s2, c_s2, 3, 1, rng);  // stride 8 tap
  blocks[4].init(c_s2, c_s3, 3, 2, rng);
  blocks[5].init(c_s3, c_s3, 3, 1, rng);  // stride 16 tap
}

template <typename T>
FeaturePyramid<T> Encoder<T>::forward(const TensorT<T>& x, bool training,
                                      EncoderActs<T>* acts) const {
  if (x.dim(1) % 16 != 0 || x.dim(2) % 16 != 0)
    fail(ErrorCode::shape_error, "encoder input dims must be multiples of 16");
  FeaturePyramid<T> pyr;
  TensorT<T> cur = x;
  for (int i = 0; i < 6; ++i) {
    cur = blocks[i].forward(cur, training, acts ? &acts->blocks[i] : nullptr);
    if (i == 1) pyr.s1 = cur;
    if (i == 3) pyr.s2 = cur;
  }
  pyr.s3 = std::move(cur);
  return pyr;
}

template <typename T>
TensorT<T> Encoder<T>::backward(const EncoderActs<T>& acts, const TensorT<T>& d_s1,
                                const TensorT<T>& d_s2, const TensorT<T>& d_s3, bool want_dx) {
  TensorT<T> grad = d_s3;
  for (int i = 5; i >= 0; --i) {
    const bool need_dx = want_dx || i > 0;
    grad = blocks[i].backward(acts.blocks[i], grad, need_dx);
    // Taps feed extra gradient into the running upstream.
    if (i == 4 && d_s2.numel()) {
      for (std::size_t j = 0; j < grad.numel(); ++j) grad[j] += d_s2[j];
    }
    if (i == 2 && d_s1.numel()) {
      for (std::size_t j = 0; j < grad.numel(); ++j) grad[j] += d_s1[j];
    }
  }
  return grad;
}

template <typename T>
void Encoder<T>::apply_ema(const EncoderActs<T>& acts) {
  for (int i = 0; i < 6; ++i) blocks[i].apply_ema(acts.blocks[i]);
}

template <typename T>
void Encoder<T>::zero_grad() {
  for (auto& b : blocks) b.zero_grad();
}

template <typename T>
void Encoder<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                         std::vector<StateRef<T>>& state) {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), params, state);
}

template <typename T>
void Decoder<T>::init(int in_channels, int c2_, Rng& rng) {
  in_ch = in_channels;
  c2 = c2_;
  blocks[0].init(in_channels, c2, 3, 1, rng);
  for (int i = 1; i < 6; ++i) blocks[i].init(c2, c2, 3, 1, rng);
  blocks[6].init(c2, c2, 1, 1, rng);
}

template <typename T>
TensorT<T> Decoder<T>::forward(const TensorT<T>& s3, bool training, DecoderActs<T>* acts) const {
  if (s3.dim(0) != in_ch) fail(ErrorCode::shape_error, "decoder input channels");
  TensorT<T> cur = s3;
  for (int i = 0; i < 7; ++i)
    cur = blocks[i].forward(cur, training, acts ? &acts->blocks[i] : nullptr);
  return cur;
}

template <typename T>
TensorT<T> Decoder<T>::backward(const DecoderActs<T>& acts, const TensorT<T>& dy, bool want_dx) {
  TensorT<T> grad = dy;
  for (int i = 6; i >= 0; --i)
    grad = blocks[i].backward(acts.blocks[i], grad, want_dx || i > 0);
  return grad;
}

template <typename T>
void Decoder<T>::apply_ema(const DecoderActs<T>& acts) {
  for (int i = 0; i < 7; ++i) blocks[i].apply_ema(acts.blocks[i]);
}

template <typename T>
void Decoder<T>::zero_grad() {
  for (auto& b : blocks) b.zero_grad();
}

template <typename T>
void Decoder<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                         std::vector<StateRef<T>>& state) {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), params, state);
}

template <typename T>
MemoryBank<T> init_memory(int l, int c2, std::uint64_t seed, bool trainable) {
  if (l < 1 || c2 < 1) fail(ErrorCode::bad_dims, "memory bank dims must be >= 1");
  MemoryBank<T> bank;
  bank.v = TensorT<T>({c2, l});
  bank.dv = TensorT<T>({c2, l});
  bank.trainable = trainable;
  Rng rng(derive_seed(seed, "memory-bank"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(c2));
  for (auto& e : bank.v.data) e = static_cast<T>(rng.uniform(-bound, bound));
  return bank;
}

template <typename T>
void Branch<T>::init(const EncoderConfig& enc_cfg, int c2, int head_in_ch, Rng& rng) {
  encoder.init(enc_cfg, rng);
  decoder.init(enc_cfg.out_channels_c1, c2, rng);
  density_head.init(head_in_ch, 1, 1, 1, 0, rng);
  cls_head.init(head_in_ch, 1, 1, 1, 0, rng);
}

template <typename T>
void Branch<T>::zero_grad() {
  encoder.zero_grad();
  decoder.zero_grad();
  bank.zero_grad();
  density_head.zero_grad();
  cls_head.zero_grad();
}

template <typename T>
void Branch<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                        std::vector<StateRef<T>>& state) {
  encoder.collect(prefix + ".enc", params, state);
  decoder.collect(prefix + ".dec", params, state);
  if (bank.v.numel()) bank.collect(prefix + ".bank", params);
  density_head.collect(prefix + ".head", params);
  cls_head.collect(prefix + ".cls", params);
}

template <typename T>
FeaturePyramid<T> encode(const TensorT<T>& img, const Branch<T>& branch, EncoderActs<T>* acts,
                         bool training) {
  ++branch.encode_calls;
  return branch.encoder.forward(img, training && !branch.frozen, acts);
}

template <typename T>
TensorT<T> decode(const TensorT<T>& s3, const Branch<T>& branch, DecoderActs<T>* acts,
                  bool training) {
  ++branch.decode_calls;
  return branch.decoder.forward(s3, training && !branch.frozen, acts);
}

template <typename T>
TensorT<T> density_head_forward(const TensorT<T>& fused, const Branch<T>& branch,
                                TensorT<T>* pre_relu) {
  TensorT<T> z = branch.density_head.forward(fused);
  TensorT<T> out;
  relu_forward(z, out);
  if (pre_relu) *pre_relu = std::move(z);
  return out;
}

template <typename T>
TensorT<T> raster_to_input(const Raster& img, int in_channels) {
  if (img.channels != 1 && img.channels != in_channels)
    fail(ErrorCode::shape_error, "image channels incompatible with encoder input");
  TensorT<T> out({in_channels, img.height, img.width});
  for (int c = 0; c < in_channels; ++c) {
    const int src_c = img.channels == 1 ? 0 : c;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at3(c, y, x) = static_cast<T>(img.at(y, x, src_c));
  }
  return out;
}

#define L2H_INSTANTIATE_NET(T)                                                              \
  template struct Encoder<T>;                                                               \
  template struct Decoder<T>;                                                               \
  template struct Branch<T>;                                                                \
  template MemoryBank<T> init_memory<T>(int, int, std::uint64_t, bool);                     \
  template FeaturePyramid<T> encode<T>(const TensorT<T>&, const Branch<T>&, EncoderActs<T>*, \
                                       bool);                                              \
  template TensorT<T> decode<T>(const TensorT<T>&, const Branch<T>&, DecoderActs<T>*, bool); \
  template TensorT<T> density_head_forward<T>(const TensorT<T>&, const Branch<T>&,          \
                                              TensorT<T>*);                                \
  template TensorT<T> raster_to_input<T>(const Raster&, int);

L2H_INSTANTIATE_NET(float)
L2H_INSTANTIATE_NET(double)

#undef L2H_INSTANTIATE_NET

}  // namespace l2h
