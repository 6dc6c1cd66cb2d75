#include "leafkit/layers.h"

#include <cmath>

#include "leafkit/error.h"

namespace leafkit {

Tensor he_init(std::size_t fan_in, const Shape& shape, Rng& rng) {
  if (fan_in == 0) throw ParameterError("he_init: fan_in must be at least 1");
  Tensor t = Tensor::zeros(shape);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (float& v : t.data()) v = static_cast<float>(normal(rng));
  return t;
}

Conv2DParams Conv2DParams::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                  std::size_t stride, std::size_t padding, Rng& rng) {
  Conv2DParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.kernel_h = p.kernel_w = kernel;
  p.stride_h = p.stride_w = stride;
  p.pad_h = p.pad_w = padding;
  p.weight = he_init(in_channels * kernel * kernel, {out_channels, in_channels, kernel, kernel}, rng);
  p.bias = Tensor::zeros({out_channels});
  p.weight.set_requires_grad(true);
  p.bias.set_requires_grad(true);
  return p;
}

DenseParams DenseParams::create(std::size_t in_features, std::size_t out_features, Rng& rng) {
  DenseParams p;
  p.weight = he_init(in_features, {out_features, in_features}, rng);
  p.bias = Tensor::zeros({out_features});
  p.weight.set_requires_grad(true);
  p.bias.set_requires_grad(true);
  return p;
}

LSTMParams LSTMParams::create(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  LSTMParams p = zeros(input_size, hidden_size);
  const std::size_t fan_in = input_size + hidden_size;
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + hidden_size));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  for (Tensor* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) {
    for (float& v : w->data()) v = static_cast<float>(uniform(rng));
  }
  for (float& v : p.b_f.data()) v = 1.0f;
  return p;
}

LSTMParams LSTMParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  LSTMParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const Shape ws{hidden_size, hidden_size + input_size};
  for (Tensor* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) *w = Tensor::zeros(ws).set_requires_grad(true);
  for (Tensor* b : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) *b = Tensor::zeros({hidden_size}).set_requires_grad(true);
  return p;
}

LSTMState LSTMState::zeros(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

Tensor conv2d(const Tensor& x, const Conv2DParams& p) {
  return ops::conv2d(x, p.weight, p.bias, {p.stride_h, p.stride_w, p.pad_h, p.pad_w});
}

Tensor dense(const Tensor& x, const DenseParams& p) { return ops::linear(x, p.weight, p.bias); }

LSTMState lstm_step(const Tensor& x_t, const LSTMState& state, const LSTMParams& p) {
  if (x_t.rank() != 2 || x_t.dim(1) != p.input_size) {
    throw ShapeError("lstm_step: input " + shape_to_string(x_t.shape()) + " for input_size " +
                     std::to_string(p.input_size));
  }
  const Shape expected{x_t.dim(0), p.hidden_size};
  if (state.h.shape() != expected || state.c.shape() != expected) {
    throw ShapeError("lstm_step: state " + shape_to_string(state.h.shape()) + "/" + shape_to_string(state.c.shape()) +
                     ", expected " + shape_to_string(expected));
  }
  const Tensor hx = ops::concat_last(state.h, x_t);
  const Tensor f = ops::sigmoid(ops::linear(hx, p.w_f, p.b_f));
  const Tensor candidate = ops::tanh(ops::linear(hx, p.w_c, p.b_c));
  const Tensor i = ops::sigmoid(ops::linear(hx, p.w_i, p.b_i));
  const Tensor c = ops::add(ops::mul(f, state.c), ops::mul(i, candidate));
  const Tensor o = ops::sigmoid(ops::linear(hx, p.w_o, p.b_o));
  const Tensor h = ops::mul(ops::tanh(c), o);
  return {h, c};
}

Tensor lstm_forward(const Tensor& seq, const LSTMParams& p) {
  if (seq.rank() != 3) throw ShapeError("lstm_forward expects [B,T,F], got " + shape_to_string(seq.shape()));
  // Shapes never carry zero dims, so T == 0 can only arrive through a bad reshape upstream.
  if (seq.dim(1) == 0) throw ShapeError("lstm_forward: empty sequence");
  LSTMState state = LSTMState::zeros(seq.dim(0), p.hidden_size);
  for (std::size_t t = 0; t < seq.dim(1); ++t) state = lstm_step(ops::time_step(seq, t), state, p);
  return state.h;
}

}  // namespace leafkit
