#include "leafkit/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gemm.h"
#include "leafkit/error.h"

namespace leafkit::ops {

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Broadcast layout of a binary op: the output has `out` shape; operand
// element for output index i is at i % period.
struct Broadcast {
  Shape out;
  std::size_t period_a;
  std::size_t period_b;
};

Broadcast plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return {sa, a.numel(), b.numel()};
  if (b.numel() == 1 || is_suffix(sb, sa)) return {sa, a.numel(), b.numel()};
  if (a.numel() == 1 || is_suffix(sa, sb)) return {sb, a.numel(), b.numel()};
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(sa) + " and " +
                   shape_to_string(sb));
}

// Adds g[i] * scale[i] (scale may be null meaning 1) into target folded by period.
void fold_into(TensorImpl* target, std::span<const float> g, std::size_t period, const float* scale, float sign) {
  float* out = target->grad_buffer();
  if (period == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += sign * g[i] * (scale ? scale[i] : 1.0f);
    return;
  }
  std::vector<double> acc(period, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    acc[i % period] += static_cast<double>(g[i]) * (scale ? scale[i] : 1.0f);
  }
  for (std::size_t j = 0; j < period; ++j) out[j] += sign * static_cast<float>(acc[j]);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast bc = plan_broadcast(a, b, "add");
  const std::size_t n = shape_numel(bc.out);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i % bc.period_a] + db[i % bc.period_b];
  return Tensor::make_result(bc.out, std::move(out), OpKind::kAdd, {a, b}, [a, b, bc](const TensorImpl& o) {
    if (a.requires_grad()) fold_into(a.impl(), o.grad, bc.period_a, nullptr, 1.0f);
    if (b.requires_grad()) fold_into(b.impl(), o.grad, bc.period_b, nullptr, 1.0f);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast bc = plan_broadcast(a, b, "sub");
  const std::size_t n = shape_numel(bc.out);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i % bc.period_a] - db[i % bc.period_b];
  return Tensor::make_result(bc.out, std::move(out), OpKind::kSub, {a, b}, [a, b, bc](const TensorImpl& o) {
    if (a.requires_grad()) fold_into(a.impl(), o.grad, bc.period_a, nullptr, 1.0f);
    if (b.requires_grad()) fold_into(b.impl(), o.grad, bc.period_b, nullptr, -1.0f);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = plan_broadcast(a, b, "mul");
  const std::size_t n = shape_numel(bc.out);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i % bc.period_a] * db[i % bc.period_b];
  return Tensor::make_result(bc.out, std::move(out), OpKind::kMul, {a, b}, [a, b, bc, n](const TensorImpl& o) {
    // Expand each operand to the output length so fold_into can scale by it.
    auto expand = [n](const Tensor& t, std::size_t period) {
      std::vector<float> e(n);
      const auto d = t.data();
      for (std::size_t i = 0; i < n; ++i) e[i] = d[i % period];
      return e;
    };
    if (a.requires_grad()) {
      const auto eb = expand(b, bc.period_b);
      fold_into(a.impl(), o.grad, bc.period_a, eb.data(), 1.0f);
    }
    if (b.requires_grad()) {
      const auto ea = expand(a, bc.period_a);
      fold_into(b.impl(), o.grad, bc.period_b, ea.data(), 1.0f);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    out[i] = static_cast<float>(v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)));
  }
  return Tensor::make_result(x.shape(), std::move(out), OpKind::kSigmoid, {x}, [x](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    for (std::size_t i = 0; i < o.data.size(); ++i) {
      const float s = o.data[i];
      g[i] += o.grad[i] * s * (1.0f - s);
    }
  });
}

Tensor tanh(const Tensor& x) {
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<float>(std::tanh(static_cast<double>(in[i])));
  return Tensor::make_result(x.shape(), std::move(out), OpKind::kTanh, {x}, [x](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    for (std::size_t i = 0; i < o.data.size(); ++i) {
      const float t = o.data[i];
      g[i] += o.grad[i] * (1.0f - t * t);
    }
  });
}

Tensor relu(const Tensor& x) {
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
  return Tensor::make_result(x.shape(), std::move(out), OpKind::kRelu, {x}, [x](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    const auto in = x.data();
    for (std::size_t i = 0; i < o.data.size(); ++i) {
      if (in[i] > 0.0f) g[i] += o.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (float v : x.data()) s += v;
  return Tensor::make_result({1}, {static_cast<float>(s)}, OpKind::kSum, {x}, [x](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    const float up = o.grad[0];
    for (std::size_t i = 0; i < x.numel(); ++i) g[i] += up;
  });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (float v : x.data()) s += v;
  const double n = static_cast<double>(x.numel());
  return Tensor::make_result({1}, {static_cast<float>(s / n)}, OpKind::kMean, {x}, [x, n](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    const float up = static_cast<float>(o.grad[0] / n);
    for (std::size_t i = 0; i < x.numel(); ++i) g[i] += up;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " + shape_to_string(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  std::vector<float> out(M * N);
  detail::gemm(false, false, M, N, K, a.data().data(), b.data().data(), out.data(), false);
  return Tensor::make_result({M, N}, std::move(out), OpKind::kMatmul, {a, b}, [a, b, M, N, K](const TensorImpl& o) {
    if (a.requires_grad()) {  // dA = dC * B^T
      detail::gemm(false, true, M, K, N, o.grad.data(), b.data().data(), a.impl()->grad_buffer(), true);
    }
    if (b.requires_grad()) {  // dB = A^T * dC
      detail::gemm(true, false, K, N, M, a.data().data(), o.grad.data(), b.impl()->grad_buffer(), true);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || weight.dim(1) != x.dim(1) ||
      bias.dim(0) != weight.dim(0)) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + ", weight " + shape_to_string(weight.shape()) +
                     ", bias " + shape_to_string(bias.shape()));
  }
  const std::size_t B = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  std::vector<float> out(B * out_dim);
  detail::gemm(false, true, B, out_dim, in, x.data().data(), weight.data().data(), out.data(), false);
  const auto bd = bias.data();
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t j = 0; j < out_dim; ++j) out[r * out_dim + j] += bd[j];
  }
  return Tensor::make_result(
      {B, out_dim}, std::move(out), OpKind::kLinear, {x, weight, bias},
      [x, weight, bias, B, in, out_dim](const TensorImpl& o) {
        if (x.requires_grad()) {  // dX = dY * W
          detail::gemm(false, false, B, in, out_dim, o.grad.data(), weight.data().data(), x.impl()->grad_buffer(),
                       true);
        }
        if (weight.requires_grad()) {  // dW = dY^T * X
          detail::gemm(true, false, out_dim, in, B, o.grad.data(), x.data().data(), weight.impl()->grad_buffer(),
                       true);
        }
        if (bias.requires_grad()) {
          float* gb = bias.impl()->grad_buffer();
          for (std::size_t j = 0; j < out_dim; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < B; ++r) s += o.grad[r * out_dim + j];
            gb[j] += static_cast<float>(s);
          }
        }
      });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("concat: " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  const std::size_t B = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<float> out(B * (p + q));
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t r = 0; r < B; ++r) {
    std::copy_n(da.begin() + r * p, p, out.begin() + r * (p + q));
    std::copy_n(db.begin() + r * q, q, out.begin() + r * (p + q) + p);
  }
  return Tensor::make_result({B, p + q}, std::move(out), OpKind::kConcat, {a, b}, [a, b, B, p, q](const TensorImpl& o) {
    if (a.requires_grad()) {
      float* g = a.impl()->grad_buffer();
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < p; ++j) g[r * p + j] += o.grad[r * (p + q) + j];
    }
    if (b.requires_grad()) {
      float* g = b.impl()->grad_buffer();
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < q; ++j) g[r * q + j] += o.grad[r * (p + q) + p + j];
    }
  });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape.empty() || shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  auto values = x.to_vector();
  return Tensor::make_result(shape, std::move(values), OpKind::kReshape, {x}, [x](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor sequence_reshape(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("sequence_reshape expects [B,C,H,W], got " + shape_to_string(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto in = x.data();
  std::vector<float> out(in.size());
  // out[b][h][w*C + c] = in[b][c][h][w]
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          out[((b * H + h) * W + w) * C + c] = in[((b * C + c) * H + h) * W + w];
  return Tensor::make_result({B, H, W * C}, std::move(out), OpKind::kSequenceReshape, {x},
                             [x, B, C, H, W](const TensorImpl& o) {
                               if (!x.requires_grad()) return;
                               float* g = x.impl()->grad_buffer();
                               for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t c = 0; c < C; ++c)
                                   for (std::size_t h = 0; h < H; ++h)
                                     for (std::size_t w = 0; w < W; ++w)
                                       g[((b * C + c) * H + h) * W + w] += o.grad[((b * H + h) * W + w) * C + c];
                             });
}

Tensor sequence_unreshape(const Tensor& seq, std::size_t channels) {
  if (seq.rank() != 3 || channels == 0 || seq.dim(2) % channels != 0) {
    throw ShapeError("sequence_unreshape: " + shape_to_string(seq.shape()) + " with " + std::to_string(channels) +
                     " channels");
  }
  const std::size_t B = seq.dim(0), H = seq.dim(1), C = channels, W = seq.dim(2) / channels;
  const auto in = seq.data();
  std::vector<float> out(in.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          out[((b * C + c) * H + h) * W + w] = in[((b * H + h) * W + w) * C + c];
  return Tensor::make_result({B, C, H, W}, std::move(out), OpKind::kSequenceUnreshape, {seq},
                             [seq, B, C, H, W](const TensorImpl& o) {
                               if (!seq.requires_grad()) return;
                               float* g = seq.impl()->grad_buffer();
                               for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t c = 0; c < C; ++c)
                                   for (std::size_t h = 0; h < H; ++h)
                                     for (std::size_t w = 0; w < W; ++w)
                                       g[((b * H + h) * W + w) * C + c] += o.grad[((b * C + c) * H + h) * W + w];
                             });
}

Tensor time_step(const Tensor& seq, std::size_t t) {
  if (seq.rank() != 3 || t >= seq.dim(1)) {
    throw ShapeError("time_step " + std::to_string(t) + " of " + shape_to_string(seq.shape()));
  }
  const std::size_t B = seq.dim(0), T = seq.dim(1), F = seq.dim(2);
  std::vector<float> out(B * F);
  const auto in = seq.data();
  for (std::size_t b = 0; b < B; ++b) std::copy_n(in.begin() + (b * T + t) * F, F, out.begin() + b * F);
  return Tensor::make_result({B, F}, std::move(out), OpKind::kTimeStep, {seq}, [seq, B, T, F, t](const TensorImpl& o) {
    if (!seq.requires_grad()) return;
    float* g = seq.impl()->grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < F; ++f) g[(b * T + t) * F + f] += o.grad[b * F + f];
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_to_string(logits.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw LabelError("label " + std::to_string(y) + " outside [0," + std::to_string(K) + ")");
    }
  }
  const auto z = logits.data();
  std::vector<float> probs(B * K);
  double total = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    const float* row = z.data() + r * K;
    double mx = row[0];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(row[k] - mx);
    const double log_denom = std::log(denom);
    for (std::size_t k = 0; k < K; ++k) probs[r * K + k] = static_cast<float>(std::exp(row[k] - mx - log_denom));
    total += log_denom + mx - row[labels[r]];
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return Tensor::make_result(
      {1}, {static_cast<float>(total / static_cast<double>(B))}, OpKind::kSoftmaxCrossEntropy, {logits},
      [logits, probs = std::move(probs), ys = std::move(ys), B, K](const TensorImpl& o) {
        if (!logits.requires_grad()) return;
        float* g = logits.impl()->grad_buffer();
        const double scale = static_cast<double>(o.grad[0]) / static_cast<double>(B);
        for (std::size_t r = 0; r < B; ++r) {
          for (std::size_t k = 0; k < K; ++k) {
            const double onehot = (static_cast<int>(k) == ys[r]) ? 1.0 : 0.0;
            g[r * K + k] += static_cast<float>((probs[r * K + k] - onehot) * scale);
          }
        }
      });
}

}  // namespace leafkit::ops
