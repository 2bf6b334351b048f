#pragma once

#include <cstddef>
#include <vector>

#include "fgfm/tensor.hpp"

namespace fgfm {

// Differentiable primitives. Each op computes eagerly and, when a tape is
// active and an input requires grad, records one backward step onto it.
// Shapes are exactly what the model needs; no general broadcasting.

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// out[i,:] = x[i,:] + bias
Tensor add_rowvec(const Tensor& x, const Tensor& bias);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

// Softmax along the last axis of a 1-D or 2-D tensor, max-subtracted.
Tensor softmax(const Tensor& x);

// Per-row mean-0/var-1 normalization of the last axis, then gamma/beta.
// Variance uses 1/D and epsilon 1e-5.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

Tensor gelu(const Tensor& x);

// Centered 1-D convolution with zero padding; kernel width must be odd.
// out[i] = sum_d kernel[c+d] * signal[i+d] with c = (w-1)/2.
Tensor conv1d_same(const Tensor& signal, const Tensor& kernel);

// Per-channel (depthwise) centered convolution along the row axis of x[N,C],
// zero padded; kernel is [C,w] with w odd, bias is [C].
Tensor depthwise_conv_same(const Tensor& x, const Tensor& kernel,
                           const Tensor& bias);

// Strided valid convolution for the frontend: x[Tin,Cin] * w[Cout,Cin,kw]
// -> [Tout,Cout] with Tout = (Tin - kw)/stride + 1.
Tensor conv1d_strided(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      std::size_t stride);

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Copying reshape; product of extents must match.
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);

// -log softmax(logits)[label], numerically stable.
Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t label);

// Indices of the k largest entries; ties broken toward the smaller index,
// result sorted ascending. Not differentiable.
std::vector<std::size_t> topk_indices(const std::vector<double>& x,
                                      std::size_t k);
std::vector<std::size_t> topk_indices(const Tensor& x, std::size_t k);

}  // namespace fgfm
