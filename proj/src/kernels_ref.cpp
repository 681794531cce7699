#include "l2h/kernels_ref.hpp"

#include <algorithm>
#include <cmath>

namespace l2h::ref {

template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                    int stride, int pad, TensorT<T>& out) {
  const int ic = in.dim(0), h = in.dim(1), wid = in.dim(2);
  const int oc = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (wid + 2 * pad - k) / stride + 1;
  out = TensorT<T>({oc, oh, ow});
  for (int o = 0; o < oc; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = b.numel() ? b[o] : T(0);
        for (int c = 0; c < ic; ++c) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wid) continue;
              acc += w.data[((static_cast<std::size_t>(o) * ic + c) * k + ky) * k + kx] *
                     in.data[(static_cast<std::size_t>(c) * h + iy) * wid + ix];
            }
          }
        }
        out.data[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

template <typename T>
void matmul(const TensorT<T>& a, bool trans_a, const TensorT<T>& b, bool trans_b,
            TensorT<T>& out) {
  const int m = trans_a ? a.dim(1) : a.dim(0);
  const int k = trans_a ? a.dim(0) : a.dim(1);
  const int n = trans_b ? b.dim(0) : b.dim(1);
  out = TensorT<T>({m, n});
  const int lda = a.dim(1), ldb = b.dim(1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) {
        const T av = trans_a ? a.data[static_cast<std::size_t>(p) * lda + i]
                             : a.data[static_cast<std::size_t>(i) * lda + p];
        const T bv = trans_b ? b.data[static_cast<std::size_t>(j) * ldb + p]
                             : b.data[static_cast<std::size_t>(p) * ldb + j];
        acc += av * bv;
      }
      out.data[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

template <typename T>
void softmax_rows(const TensorT<T>& z, TensorT<T>& out) {
  const int rows = z.dim(0), cols = z.dim(1);
  out = TensorT<T>({rows, cols});
  for (int r = 0; r < rows; ++r) {
    const T* zr = z.ptr() + static_cast<std::size_t>(r) * cols;
    T* orow = out.ptr() + static_cast<std::size_t>(r) * cols;
    T mx = zr[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, zr[c]);
    T sum = T(0);
    for (int c = 0; c < cols; ++c) {
      const T e = std::exp(zr[c] - mx);
      orow[c] = e;
      sum += e;
    }
    for (int c = 0; c < cols; ++c) orow[c] /= sum;
  }
}

template <typename T>
void channel_max_pool(const TensorT<T>& f, TensorT<T>& out, std::vector<int>* argmax) {
  const int ch = f.dim(0), h = f.dim(1), w = f.dim(2);
  out = TensorT<T>({h, w});
  if (argmax) argmax->assign(static_cast<std::size_t>(h) * w, 0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < h * w; ++i) {
    T best = f.data[i];
    int arg = 0;
    for (int c = 1; c < ch; ++c) {
      const T v = f.data[static_cast<std::size_t>(c) * plane + i];
      if (v > best) {
        best = v;
        arg = c;
      }
    }
    out.data[i] = best;
    if (argmax) (*argmax)[i] = arg;
  }
}

template <typename T>
void upsample_nearest(const TensorT<T>& m, int out_h, int out_w, TensorT<T>& out) {
  const int h = m.dim(0), w = m.dim(1);
  if (h <= 0 || w <= 0 || out_h % h != 0 || out_w % w != 0)
    fail(ErrorCode::non_integer_factor, "upsample_nearest: output dims must be integer multiples");
  const int fy = out_h / h, fx = out_w / w;
  out = TensorT<T>({out_h, out_w});
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      out.data[static_cast<std::size_t>(y) * out_w + x] =
          m.data[static_cast<std::size_t>(y / fy) * w + x / fx];
}

template <typename T>
void block_sum_pool(const TensorT<T>& m, int factor, TensorT<T>& out) {
  const int h = m.dim(0), w = m.dim(1);
  const int oh = h / factor, ow = w / factor;
  out = TensorT<T>({oh, ow});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T acc = T(0);
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          acc += m.data[static_cast<std::size_t>(oy * factor + dy) * w + ox * factor + dx];
      out.data[static_cast<std::size_t>(oy) * ow + ox] = acc;
    }
  }
}

template <typename T>
void pad_overlay(const T* src, int h, int w, int c, int shift, T wl, T wr, T* dst) {
  const int ow = w + shift;
  for (int y = 0; y < h; ++y) {
    const T* srow = src + static_cast<std::size_t>(y) * w * c;
    T* drow = dst + static_cast<std::size_t>(y) * ow * c;
    for (int x = 0; x < ow; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const T left = (x >= shift) ? srow[(x - shift) * c + ch] : T(0);
        const T right = (x < w) ? srow[x * c + ch] : T(0);
        drow[x * c + ch] = wl * left + wr * right;
      }
    }
  }
}

#define L2H_INSTANTIATE_REF(T)                                                                \
  template void conv2d_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,    \
                                  int, int, TensorT<T>&);                                     \
  template void matmul<T>(const TensorT<T>&, bool, const TensorT<T>&, bool, TensorT<T>&);     \
  template void softmax_rows<T>(const TensorT<T>&, TensorT<T>&);                              \
  template void channel_max_pool<T>(const TensorT<T>&, TensorT<T>&, std::vector<int>*);       \
  template void upsample_nearest<T>(const TensorT<T>&, int, int, TensorT<T>&);                \
  template void block_sum_pool<T>(const TensorT<T>&, int, TensorT<T>&);                       \
  template void pad_overlay<T>(const T*, int, int, int, int, T, T, T*);

L2H_INSTANTIATE_REF(float)
L2H_INSTANTIATE_REF(double)

#undef L2H_INSTANTIATE_REF

}  // namespace l2h::ref
