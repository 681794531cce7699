#include "l2h/layers.hpp"

#include <cmath>

#include "l2h/kernels.hpp"

namespace l2h {

template <typename T>
void Conv2d<T>::init(int in_c, int out_c, int k, int stride_, int pad_, Rng& rng) {
  in_ch = in_c;
  out_ch = out_c;
  ksize = k;
  stride = stride_;
  pad = pad_;
  w = TensorT<T>({out_c, in_c, k, k});
  b = TensorT<T>({out_c});
  dw = TensorT<T>({out_c, in_c, k, k});
  db = TensorT<T>({out_c});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * k * k);
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
  for (auto& v : b.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
TensorT<T> Conv2d<T>::forward(const TensorT<T>& x) const {
  if (x.dim(0) != in_ch) fail(ErrorCode::shape_error, "conv input channels");
  TensorT<T> out;
  conv2d_forward(x, w, b, stride, pad, out);
  return out;
}

template <typename T>
TensorT<T> Conv2d<T>::backward(const TensorT<T>& x, const TensorT<T>& dy, bool want_dx) {
  conv2d_backward_params(x, dy, stride, pad, ksize, dw, db);
  TensorT<T> dx;
  if (want_dx) conv2d_backward_input(w, dy, stride, pad, x.dim(1), x.dim(2), dx);
  return dx;
}

template <typename T>
void Conv2d<T>::zero_grad() {
  dw.zero();
  db.zero();
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params) {
  params.push_back({prefix + ".w", &w, &dw});
  params.push_back({prefix + ".b", &b, &db});
}

template <typename T>
void BatchNorm2d<T>::init(int channels) {
  gamma = TensorT<T>({channels});
  beta = TensorT<T>({channels});
  dgamma = TensorT<T>({channels});
  dbeta = TensorT<T>({channels});
  running_mean = TensorT<T>({channels});
  running_var = TensorT<T>({channels});
  gamma.fill(T(1));
  running_var.fill(T(1));
}

template <typename T>
TensorT<T> BatchNorm2d<T>::forward_train(const TensorT<T>& x, TensorT<T>* save_mean,
                                         TensorT<T>* save_var) const {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  TensorT<T> out(x.shape);
  TensorT<T> mean({c}), var({c});
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.ptr() + ch * n;
    T mu = T(0);
    for (std::size_t i = 0; i < n; ++i) mu += src[i];
    mu /= static_cast<T>(n);
    T v = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = src[i] - mu;
      v += d * d;
    }
    v /= static_cast<T>(n);
    mean[ch] = mu;
    var[ch] = v;
    const T inv = T(1) / std::sqrt(v + eps);
    T* dst = out.ptr() + ch * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = gamma[ch] * ((src[i] - mu) * inv) + beta[ch];
  }
  if (save_mean) *save_mean = std::move(mean);
  if (save_var) *save_var = std::move(var);
  return out;
}

template <typename T>
TensorT<T> BatchNorm2d<T>::forward_eval(const TensorT<T>& x) const {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  TensorT<T> out(x.shape);
  for (int ch = 0; ch < c; ++ch) {
    const T inv = T(1) / std::sqrt(running_var[ch] + eps);
    const T* src = x.ptr() + ch * n;
    T* dst = out.ptr() + ch * n;
    for (std::size_t i = 0; i < n; ++i)
      dst[i] = gamma[ch] * ((src[i] - running_mean[ch]) * inv) + beta[ch];
  }
  return out;
}

template <typename T>
void BatchNorm2d<T>::ema_update(const TensorT<T>& mean, const TensorT<T>& var) {
  for (std::size_t i = 0; i < running_mean.numel(); ++i) {
    running_mean[i] = (T(1) - momentum) * running_mean[i] + momentum * mean[i];
    running_var[i] = (T(1) - momentum) * running_var[i] + momentum * var[i];
  }
}

template <typename T>
TensorT<T> BatchNorm2d<T>::backward(const TensorT<T>& x, const TensorT<T>& dy) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  TensorT<T> dx(x.shape);
  for (int ch = 0; ch < c; ++ch) {
    const T* xp = x.ptr() + ch * n;
    const T* gp = dy.ptr() + ch * n;
    T* dp = dx.ptr() + ch * n;

    T mu = T(0);
    for (std::size_t i = 0; i < n; ++i) mu += xp[i];
    mu /= static_cast<T>(n);
    T v = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = xp[i] - mu;
      v += d * d;
    }
    v /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(v + eps);

    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T xhat = (xp[i] - mu) * inv;
      sum_dy += gp[i];
      sum_dy_xhat += gp[i] * xhat;
    }
    dbeta[ch] += sum_dy;
    dgamma[ch] += sum_dy_xhat;

    const T g = gamma[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const T xhat = (xp[i] - mu) * inv;
      dp[i] = g * inv / static_cast<T>(n) *
              (static_cast<T>(n) * gp[i] - sum_dy - xhat * sum_dy_xhat);
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::zero_grad() {
  dgamma.zero();
  dbeta.zero();
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                             std::vector<StateRef<T>>& state) {
  params.push_back({prefix + ".gamma", &gamma, &dgamma});
  params.push_back({prefix + ".beta", &beta, &dbeta});
  state.push_back({prefix + ".running_mean", &running_mean});
  state.push_back({prefix + ".running_var", &running_var});
}

template <typename T>
void ConvBnRelu<T>::init(int in_c, int out_c, int k, int stride, Rng& rng) {
  conv.init(in_c, out_c, k, stride, k == 3 ? 1 : 0, rng);
  bn.init(out_c);
}

template <typename T>
TensorT<T> ConvBnRelu<T>::forward(const TensorT<T>& x, bool training, BlockCache<T>* cache) const {
  TensorT<T> conv_out = conv.forward(x);
  TensorT<T> bn_out = training
                          ? bn.forward_train(conv_out, cache ? &cache->bn_mean : nullptr,
                                             cache ? &cache->bn_var : nullptr)
                          : bn.forward_eval(conv_out);
  TensorT<T> y;
  relu_forward(bn_out, y);
  if (cache) {
    cache->x = x;
    cache->conv_out = std::move(conv_out);
    cache->bn_out = std::move(bn_out);
  }
  return y;
}

template <typename T>
TensorT<T> ConvBnRelu<T>::backward(const BlockCache<T>& cache, const TensorT<T>& dy, bool want_dx) {
  TensorT<T> d_bn_out;
  relu_backward(cache.bn_out, dy, d_bn_out);
  TensorT<T> d_conv_out = bn.backward(cache.conv_out, d_bn_out);
  return conv.backward(cache.x, d_conv_out, want_dx);
}

template <typename T>
void ConvBnRelu<T>::apply_ema(const BlockCache<T>& cache) {
  bn.ema_update(cache.bn_mean, cache.bn_var);
}

template <typename T>
void ConvBnRelu<T>::zero_grad() {
  conv.zero_grad();
  bn.zero_grad();
}

template <typename T>
void ConvBnRelu<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                            std::vector<StateRef<T>>& state) {
  conv.collect(prefix + ".conv", params);
  bn.collect(prefix + ".bn", params, state);
}

template struct Conv2d<float>;
template struct Conv2d<double>;
template struct BatchNorm2d<float>;
template struct BatchNorm2d<double>;
template struct ConvBnRelu<float>;
template struct ConvBnRelu<double>;

}  // namespace l2h
