#pragma once

#include <cstdint>
#include <span>

#include "leafkit/ops.h"
#include "leafkit/rng.h"
#include "leafkit/tensor.h"

namespace leafkit {

// Samples N(0, 2 / fan_in) (Kaiming/He for ReLU networks).
Tensor he_init(std::size_t fan_in, const Shape& shape, Rng& rng);

struct Conv2DParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 3, kernel_w = 3;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
  Tensor weight;  // [out, in, kh, kw]
  Tensor bias;    // [out]

  static Conv2DParams create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                             std::size_t stride, std::size_t padding, Rng& rng);
};

struct DenseParams {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  static DenseParams create(std::size_t in_features, std::size_t out_features, Rng& rng);
};

// Gate weights act on the concatenation [h_{t-1}, x_t], hidden part first.
struct LSTMParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_f, w_i, w_c, w_o;  // [hidden, hidden + input]
  Tensor b_f, b_i, b_c, b_o;  // [hidden]

  // Glorot-uniform gate weights, zero biases except the forget gate at 1.
  static LSTMParams create(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static LSTMParams zeros(std::size_t input_size, std::size_t hidden_size);
};

struct LSTMState {
  Tensor h;  // [B, hidden]
  Tensor c;  // [B, hidden]

  static LSTMState zeros(std::size_t batch, std::size_t hidden);
};

Tensor conv2d(const Tensor& x, const Conv2DParams& p);

Tensor dense(const Tensor& x, const DenseParams& p);

// One LSTM cell update:
//   f = sigmoid(w_f [h, x] + b_f)     c~ = tanh(w_c [h, x] + b_c)
//   i = sigmoid(w_i [h, x] + b_i)     c  = f * c_prev + i * c~
//   o = sigmoid(w_o [h, x] + b_o)     h  = tanh(c) * o
LSTMState lstm_step(const Tensor& x_t, const LSTMState& state, const LSTMParams& p);

// Unrolls lstm_step over seq[B,T,F] from the zero state and returns h_T.
Tensor lstm_forward(const Tensor& seq, const LSTMParams& p);

}  // namespace leafkit
