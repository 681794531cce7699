#pragma once

#include <string>
#include <vector>

#include "l2h/rng.hpp"
#include "l2h/tensor.hpp"

namespace l2h {

// Named views over a module's parameters, used by the optimizer, the
// checkpoint writer and the gradient audit.
template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* value;
  TensorT<T>* grad;
};

// Non-trainable persistent state (normalization running statistics).
template <typename T>
struct StateRef {
  std::string name;
  TensorT<T>* value;
};

template <typename T>
struct Conv2d {
  TensorT<T> w, b, dw, db;
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;

  void init(int in_c, int out_c, int k, int stride_, int pad_, Rng& rng);
  TensorT<T> forward(const TensorT<T>& x) const;
  // Accumulates dw/db; returns dx when want_dx.
  TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy, bool want_dx);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params);
};

// Per-channel normalization over the spatial extent of a single sample
// (batch-of-one semantics; items are processed independently at desk scale).
template <typename T>
struct BatchNorm2d {
  TensorT<T> gamma, beta, dgamma, dbeta;
  TensorT<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  void init(int channels);
  // Training mode: batch statistics, optionally reported to the caller for
  // the EMA update. Const so forward stays pure.
  TensorT<T> forward_train(const TensorT<T>& x, TensorT<T>* save_mean = nullptr,
                           TensorT<T>* save_var = nullptr) const;
  // Eval/frozen mode: running statistics.
  TensorT<T> forward_eval(const TensorT<T>& x) const;
  void ema_update(const TensorT<T>& mean, const TensorT<T>& var);
  TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<StateRef<T>>& state);
};

template <typename T>
struct BlockCache {
  TensorT<T> x, conv_out, bn_out;
  TensorT<T> bn_mean, bn_var;
};

// conv 3x3/1x1 + batch-norm + ReLU, the unit both the encoder and decoder
// are assembled from.
template <typename T>
struct ConvBnRelu {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;

  void init(int in_c, int out_c, int k, int stride, Rng& rng);
  // training=false uses running stats. cache may be null for inference.
  TensorT<T> forward(const TensorT<T>& x, bool training, BlockCache<T>* cache) const;
  TensorT<T> backward(const BlockCache<T>& cache, const TensorT<T>& dy, bool want_dx);
  void apply_ema(const BlockCache<T>& cache);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<StateRef<T>>& state);
};

}  // namespace l2h
