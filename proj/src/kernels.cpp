#include "l2h/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace l2h {

// Accumulates row-at-a-time so the inner loop over output x vectorizes.
// Each output element still accumulates its (c,ky,kx) terms in the same
// order as the serial reference, which keeps the results bitwise equal.
template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                    int stride, int pad, TensorT<T>& out) {
  const int ic = in.dim(0), h = in.dim(1), wid = in.dim(2);
  const int oc = w.dim(0), k = w.dim(2);
  if (w.dim(1) != ic) fail(ErrorCode::shape_mismatch, "conv2d: weight/input channels");
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (wid + 2 * pad - k) / stride + 1;
  out = TensorT<T>({oc, oh, ow});
  const T* src = in.ptr();
  const T* wp = w.ptr();
  T* dst = out.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < oc; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      T* acc = dst + (static_cast<std::size_t>(o) * oh + oy) * ow;
      const T bias = b.numel() ? b[o] : T(0);
      for (int ox = 0; ox < ow; ++ox) acc[ox] = bias;
      const int iy0 = oy * stride - pad;
      for (int c = 0; c < ic; ++c) {
        const T* plane = src + static_cast<std::size_t>(c) * h * wid;
        const T* ker = wp + ((static_cast<std::size_t>(o) * ic + c) * k) * k;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= h) continue;
          const T* row = plane + static_cast<std::size_t>(iy) * wid;
          for (int kx = 0; kx < k; ++kx) {
            // Output x range whose input column ox*stride - pad + kx is valid.
            int lo = 0;
            while (lo < ow && lo * stride - pad + kx < 0) ++lo;
            int hi = ow;
            while (hi > lo && (hi - 1) * stride - pad + kx >= wid) --hi;
            const T kw = ker[ky * k + kx];
            const T* rofs = row - pad + kx;
            if (stride == 1) {
              for (int ox = lo; ox < hi; ++ox) acc[ox] += kw * rofs[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) acc[ox] += kw * rofs[ox * stride];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const TensorT<T>& w, const TensorT<T>& dout,
                           int stride, int pad, int in_h, int in_w, TensorT<T>& din) {
  const int oc = w.dim(0), ic = w.dim(1), k = w.dim(2);
  const int oh = dout.dim(1), ow = dout.dim(2);
  din = TensorT<T>({ic, in_h, in_w});
  const T* wp = w.ptr();
  const T* gp = dout.ptr();
  T* dst = din.ptr();

  if (stride == 1) {
    // Full correlation with the flipped kernel; inner loop over ix vectorizes.
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < ic; ++c) {
      for (int iy = 0; iy < in_h; ++iy) {
        T* acc = dst + (static_cast<std::size_t>(c) * in_h + iy) * in_w;
        for (int o = 0; o < oc; ++o) {
          const T* ker = wp + ((static_cast<std::size_t>(o) * ic + c) * k) * k;
          const T* gplane = gp + static_cast<std::size_t>(o) * oh * ow;
          for (int ky = 0; ky < k; ++ky) {
            const int oy = iy + pad - ky;
            if (oy < 0 || oy >= oh) continue;
            const T* grow = gplane + static_cast<std::size_t>(oy) * ow;
            for (int kx = 0; kx < k; ++kx) {
              int lo = 0;
              while (lo < in_w && lo + pad - kx < 0) ++lo;
              int hi = in_w;
              while (hi > lo && (hi - 1) + pad - kx >= ow) --hi;
              const T kw = ker[ky * k + kx];
              const T* gofs = grow + pad - kx;
              for (int ix = lo; ix < hi; ++ix) acc[ix] += kw * gofs[ix];
            }
          }
        }
      }
    }
    return;
  }

  // Strided case: one thread owns each input pixel and gathers every
  // (o,ky,kx) that read it.
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < ic; ++c) {
    for (int iy = 0; iy < in_h; ++iy) {
      for (int ix = 0; ix < in_w; ++ix) {
        T acc = T(0);
        for (int o = 0; o < oc; ++o) {
          const T* ker = wp + ((static_cast<std::size_t>(o) * ic + c) * k) * k;
          const T* gplane = gp + static_cast<std::size_t>(o) * oh * ow;
          for (int ky = 0; ky < k; ++ky) {
            const int num = iy + pad - ky;
            if (num < 0 || num % stride != 0) continue;
            const int oy = num / stride;
            if (oy >= oh) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int numx = ix + pad - kx;
              if (numx < 0 || numx % stride != 0) continue;
              const int ox = numx / stride;
              if (ox >= ow) continue;
              acc += ker[ky * k + kx] * gplane[static_cast<std::size_t>(oy) * ow + ox];
            }
          }
        }
        dst[(static_cast<std::size_t>(c) * in_h + iy) * in_w + ix] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const TensorT<T>& in, const TensorT<T>& dout,
                            int stride, int pad, int ksize, TensorT<T>& dw, TensorT<T>& db) {
  const int ic = in.dim(0), h = in.dim(1), wid = in.dim(2);
  const int oc = dout.dim(0), oh = dout.dim(1), ow = dout.dim(2);
  const T* src = in.ptr();
  const T* gp = dout.ptr();
  T* dwp = dw.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < oc; ++o) {
    for (int c = 0; c < ic; ++c) {
      const T* gplane = gp + static_cast<std::size_t>(o) * oh * ow;
      const T* plane = src + static_cast<std::size_t>(c) * h * wid;
      for (int ky = 0; ky < ksize; ++ky) {
        for (int kx = 0; kx < ksize; ++kx) {
          int lo = 0;
          while (lo < ow && lo * stride - pad + kx < 0) ++lo;
          int hi = ow;
          while (hi > lo && (hi - 1) * stride - pad + kx >= wid) --hi;
          T acc = T(0);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const T* grow = gplane + static_cast<std::size_t>(oy) * ow;
            const T* irow = plane + static_cast<std::size_t>(iy) * wid - pad + kx;
            if (stride == 1) {
              for (int ox = lo; ox < hi; ++ox) acc += grow[ox] * irow[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) acc += grow[ox] * irow[ox * stride];
            }
          }
          dwp[((static_cast<std::size_t>(o) * ic + c) * ksize + ky) * ksize + kx] += acc;
        }
      }
    }
  }

  for (int o = 0; o < oc; ++o) {
    T acc = T(0);
    const T* gplane = gp + static_cast<std::size_t>(o) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) acc += gplane[i];
    db[o] += acc;
  }
}

template <typename T>
void matmul(const TensorT<T>& a, bool trans_a, const TensorT<T>& b, bool trans_b,
            TensorT<T>& out) {
  const int m = trans_a ? a.dim(1) : a.dim(0);
  const int k = trans_a ? a.dim(0) : a.dim(1);
  const int kb = trans_b ? b.dim(1) : b.dim(0);
  const int n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) fail(ErrorCode::dim_mismatch, "matmul: inner dimensions");
  out = TensorT<T>({m, n});
  const T* ap = a.ptr();
  const T* bp = b.ptr();
  T* op = out.ptr();
  const int lda = a.dim(1), ldb = b.dim(1);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) {
        const T av = trans_a ? ap[static_cast<std::size_t>(p) * lda + i]
                             : ap[static_cast<std::size_t>(i) * lda + p];
        const T bv = trans_b ? bp[static_cast<std::size_t>(j) * ldb + p]
                             : bp[static_cast<std::size_t>(p) * ldb + j];
        acc += av * bv;
      }
      op[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

template <typename T>
void softmax_rows(const TensorT<T>& z, TensorT<T>& out) {
  const int rows = z.dim(0), cols = z.dim(1);
  out = TensorT<T>({rows, cols});
  const T* zp = z.ptr();
  T* op = out.ptr();

#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const T* zr = zp + static_cast<std::size_t>(r) * cols;
    T* orow = op + static_cast<std::size_t>(r) * cols;
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
  const T* fp = f.ptr();
  T* op = out.ptr();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < h * w; ++i) {
    T best = fp[i];
    int arg = 0;
    for (int c = 1; c < ch; ++c) {
      const T v = fp[static_cast<std::size_t>(c) * plane + i];
      if (v > best) {
        best = v;
        arg = c;
      }
    }
    op[i] = best;
    if (argmax) (*argmax)[i] = arg;
  }
}

template <typename T>
void channel_avg_pool(const TensorT<T>& f, TensorT<T>& out) {
  const int ch = f.dim(0), h = f.dim(1), w = f.dim(2);
  out = TensorT<T>({h, w});
  const T* fp = f.ptr();
  T* op = out.ptr();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < h * w; ++i) {
    T acc = T(0);
    for (int c = 0; c < ch; ++c) acc += fp[static_cast<std::size_t>(c) * plane + i];
    op[i] = acc / static_cast<T>(ch);
  }
}

template <typename T>
void upsample_nearest(const TensorT<T>& m, int out_h, int out_w, TensorT<T>& out) {
  const int h = m.dim(0), w = m.dim(1);
  if (h <= 0 || w <= 0 || out_h % h != 0 || out_w % w != 0)
    fail(ErrorCode::non_integer_factor, "upsample_nearest: output dims must be integer multiples");
  const int fy = out_h / h, fx = out_w / w;
  out = TensorT<T>({out_h, out_w});
  const T* mp = m.ptr();
  T* op = out.ptr();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) {
    const T* srow = mp + static_cast<std::size_t>(y / fy) * w;
    T* drow = op + static_cast<std::size_t>(y) * out_w;
    for (int x = 0; x < out_w; ++x) drow[x] = srow[x / fx];
  }
}

template <typename T>
void block_sum_pool(const TensorT<T>& m, int factor, TensorT<T>& out) {
  const int h = m.dim(0), w = m.dim(1);
  if (factor <= 0 || h % factor != 0 || w % factor != 0)
    fail(ErrorCode::non_integer_factor, "block_sum_pool: dims must divide by factor");
  const int oh = h / factor, ow = w / factor;
  out = TensorT<T>({oh, ow});
  const T* mp = m.ptr();
  T* op = out.ptr();

#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T acc = T(0);
      for (int dy = 0; dy < factor; ++dy) {
        const T* row = mp + static_cast<std::size_t>(oy * factor + dy) * w + ox * factor;
        for (int dx = 0; dx < factor; ++dx) acc += row[dx];
      }
      op[static_cast<std::size_t>(oy) * ow + ox] = acc;
    }
  }
}

template <typename T>
void pad_overlay(const T* src, int h, int w, int c, int shift, T wl, T wr, T* dst) {
  const int ow = w + shift;

#pragma omp parallel for schedule(static)
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

template <typename T>
void relu_forward(const TensorT<T>& x, TensorT<T>& out) {
  out = TensorT<T>(x.shape);
  const T* xp = x.ptr();
  T* op = out.ptr();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.numel());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? xp[i] : T(0);
}

template <typename T>
void relu_backward(const TensorT<T>& x, const TensorT<T>& dy, TensorT<T>& dx) {
  dx = TensorT<T>(x.shape);
  const T* xp = x.ptr();
  const T* gp = dy.ptr();
  T* op = dx.ptr();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.numel());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? gp[i] : T(0);
}

#define L2H_INSTANTIATE(T)                                                                   \
  template void conv2d_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,   \
                                  int, int, TensorT<T>&);                                    \
  template void conv2d_backward_input<T>(const TensorT<T>&, const TensorT<T>&, int, int,     \
                                         int, int, TensorT<T>&);                             \
  template void conv2d_backward_params<T>(const TensorT<T>&, const TensorT<T>&, int, int,    \
                                          int, TensorT<T>&, TensorT<T>&);                    \
  template void matmul<T>(const TensorT<T>&, bool, const TensorT<T>&, bool, TensorT<T>&);    \
  template void softmax_rows<T>(const TensorT<T>&, TensorT<T>&);                             \
  template void channel_max_pool<T>(const TensorT<T>&, TensorT<T>&, std::vector<int>*);      \
  template void channel_avg_pool<T>(const TensorT<T>&, TensorT<T>&);                         \
  template void upsample_nearest<T>(const TensorT<T>&, int, int, TensorT<T>&);               \
  template void block_sum_pool<T>(const TensorT<T>&, int, TensorT<T>&);                      \
  template void pad_overlay<T>(const T*, int, int, int, int, T, T, T*);                      \
  template void relu_forward<T>(const TensorT<T>&, TensorT<T>&);                             \
  template void relu_backward<T>(const TensorT<T>&, const TensorT<T>&, TensorT<T>&);

L2H_INSTANTIATE(float)
L2H_INSTANTIATE(double)

#undef L2H_INSTANTIATE

}  // namespace l2h
