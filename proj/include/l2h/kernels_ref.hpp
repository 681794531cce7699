#pragma once

#include <vector>

#include "l2h/tensor.hpp"

// Serial reference implementations of the OpenMP kernels. Kept for testing
// (unit tests assert bitwise equality against l2h::) and for the kernel
// benchmark. Plain nested loops, no pragmas.
namespace l2h::ref {

template <typename T>
void conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                    int stride, int pad, TensorT<T>& out);

template <typename T>
void matmul(const TensorT<T>& a, bool trans_a, const TensorT<T>& b, bool trans_b,
            TensorT<T>& out);

template <typename T>
void softmax_rows(const TensorT<T>& z, TensorT<T>& out);

template <typename T>
void channel_max_pool(const TensorT<T>& f, TensorT<T>& out, std::vector<int>* argmax = nullptr);

template <typename T>
void upsample_nearest(const TensorT<T>& m, int out_h, int out_w, TensorT<T>& out);

template <typename T>
void block_sum_pool(const TensorT<T>& m, int factor, TensorT<T>& out);

template <typename T>
void pad_overlay(const T* src, int h, int w, int c, int shift, T wl, T wr, T* dst);

}  // namespace l2h::ref
