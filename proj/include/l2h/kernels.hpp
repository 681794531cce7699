#pragma once

#include <vector>

#include "l2h/tensor.hpp"

// OpenMP-parallel compute kernels. Every kernel parallelizes over independent
// output elements and keeps the per-output accumulation order identical to the
// serial reference in kernels_ref.hpp, so results are bitwise equal to the
// reference for any thread count.
namespace l2h {

// in {IC,H,W}, w {OC,IC,K,K}, b {OC} -> out {OC,OH,OW} with zero padding.
// OH = (H + 2*pad - K)/stride + 1, likewise OW.
template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                    int stride, int pad, TensorT<T>& out);

// din {IC,H,W} from dout {OC,OH,OW}; overwrites din.
template <typename T>
void conv2d_backward_input(const TensorT<T>& w, const TensorT<T>& dout,
                           int stride, int pad, int in_h, int in_w, TensorT<T>& din);

// Accumulates into dw {OC,IC,K,K} and db {OC}.
template <typename T>
void conv2d_backward_params(const TensorT<T>& in, const TensorT<T>& dout,
                            int stride, int pad, int ksize, TensorT<T>& dw, TensorT<T>& db);

// out = op(A) * op(B), op controlled by the transpose flags. A {m,k} or {k,m}.
template <typename T>
void matmul(const TensorT<T>& a, bool trans_a, const TensorT<T>& b, bool trans_b,
            TensorT<T>& out);

// Row-wise softmax with per-row max subtraction.
template <typename T>
void softmax_rows(const TensorT<T>& z, TensorT<T>& out);

// f {C,H,W} -> out {H,W}; argmax (if non-null) gets the winning channel per pixel.
template <typename T>
void channel_max_pool(const TensorT<T>& f, TensorT<T>& out, std::vector<int>* argmax = nullptr);

// f {C,H,W} -> out {H,W}, per-pixel mean over channels.
template <typename T>
void channel_avg_pool(const TensorT<T>& f, TensorT<T>& out);

// m {h,w} -> out {out_h,out_w}; out dims must be integer multiples of m's.
template <typename T>
void upsample_nearest(const TensorT<T>& m, int out_h, int out_w, TensorT<T>& out);

// m {H,W} -> out {H/f,W/f}, each cell the sum of its f x f block. H,W must divide.
template <typename T>
void block_sum_pool(const TensorT<T>& m, int factor, TensorT<T>& out);

// Shift-overlay of a {H,W,C}-strided buffer: out(y,x,c) =
// wl*src(y,x-S,c) + wr*src(y,x,c), treating out-of-range reads as zero.
// Output width is w + shift. Works on raw buffers so rasters and single
// channel maps share one implementation.
template <typename T>
void pad_overlay(const T* src, int h, int w, int c, int shift, T wl, T wr, T* dst);

template <typename T>
void relu_forward(const TensorT<T>& x, TensorT<T>& out);

// dx = dy where x > 0 else 0.
template <typename T>
void relu_backward(const TensorT<T>& x, const TensorT<T>& dy, TensorT<T>& dx);

}  // namespace l2h
