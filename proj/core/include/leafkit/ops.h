#pragma once

#include <cstddef>
#include <span>

#include "leafkit/tensor.h"

namespace leafkit::ops {

// Elementwise binary ops. Operands must have equal shapes, or one of them must
// be a scalar (one element) or match a trailing suffix of the other's shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// Reductions to a one-element tensor, accumulated in f64.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[B,in] * weight[out,in]^T + bias[out] -> [B,out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Concatenate two rank-2 tensors along the last axis: [B,p],[B,q] -> [B,p+q].
Tensor concat_last(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, const Shape& shape);

struct Conv2DGeometry {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};

// Cross-correlation. x[B,C,H,W], weight[O,C,kh,kw], bias[O] -> [B,O,H',W'].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2DGeometry& geometry);

// Max pooling; gradient goes to the first maximal element of each window.
Tensor maxpool2d(const Tensor& x, std::size_t window, std::size_t stride);

// [B,C,H,W] -> [B,C] spatial mean.
Tensor global_avg_pool(const Tensor& x);

// [B,C,H,W] -> [B,H,W*C]. Row r becomes time step r; feature index w*C + c.
Tensor sequence_reshape(const Tensor& x);

// Inverse of sequence_reshape: [B,H,W*C] -> [B,C,H,W].
Tensor sequence_unreshape(const Tensor& seq, std::size_t channels);

// seq[B,T,F] -> [B,F] at step t.
Tensor time_step(const Tensor& seq, std::size_t t);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace leafkit::ops
