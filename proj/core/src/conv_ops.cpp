#include <limits>
#include <vector>

#include "gemm.h"
#include "leafkit/error.h"
#include "leafkit/ops.h"

namespace leafkit::ops {

namespace {

struct ConvDims {
  std::size_t B, C, H, W;
  std::size_t O, kh, kw;
  std::size_t Ho, Wo;
  Conv2DGeometry g;
};

// Unfolds one image [C,H,W] into columns [C*kh*kw, Ho*Wo].
void im2col(const float* img, const ConvDims& d, float* cols) {
  const std::size_t P = d.Ho * d.Wo;
  for (std::size_t c = 0; c < d.C; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        float* row = cols + ((c * d.kh + ki) * d.kw + kj) * P;
        for (std::size_t oy = 0; oy < d.Ho; ++oy) {
          const long iy = static_cast<long>(oy * d.g.stride_h + ki) - static_cast<long>(d.g.pad_h);
          for (std::size_t ox = 0; ox < d.Wo; ++ox) {
            const long ix = static_cast<long>(ox * d.g.stride_w + kj) - static_cast<long>(d.g.pad_w);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(d.H) && ix < static_cast<long>(d.W);
            row[oy * d.Wo + ox] = inside ? img[(c * d.H + static_cast<std::size_t>(iy)) * d.W + static_cast<std::size_t>(ix)] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatters columns back into an image gradient, accumulating.
void col2im(const float* cols, const ConvDims& d, float* img) {
  const std::size_t P = d.Ho * d.Wo;
  for (std::size_t c = 0; c < d.C; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const float* row = cols + ((c * d.kh + ki) * d.kw + kj) * P;
        for (std::size_t oy = 0; oy < d.Ho; ++oy) {
          const long iy = static_cast<long>(oy * d.g.stride_h + ki) - static_cast<long>(d.g.pad_h);
          if (iy < 0 || iy >= static_cast<long>(d.H)) continue;
          for (std::size_t ox = 0; ox < d.Wo; ++ox) {
            const long ix = static_cast<long>(ox * d.g.stride_w + kj) - static_cast<long>(d.g.pad_w);
            if (ix < 0 || ix >= static_cast<long>(d.W)) continue;
            img[(c * d.H + static_cast<std::size_t>(iy)) * d.W + static_cast<std::size_t>(ix)] += row[oy * d.Wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2DGeometry& geometry) {
  if (x.rank() != 4 || weight.rank() != 4 || bias.rank() != 1) {
    throw ShapeError("conv2d: input " + shape_to_string(x.shape()) + ", weight " + shape_to_string(weight.shape()));
  }
  if (weight.dim(1) != x.dim(1) || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: channel mismatch between input " + shape_to_string(x.shape()) + ", weight " +
                     shape_to_string(weight.shape()) + " and bias " + shape_to_string(bias.shape()));
  }
  if (geometry.stride_h == 0 || geometry.stride_w == 0) throw ShapeError("conv2d: stride must be positive");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), weight.dim(3), 0, 0, geometry};
  const std::size_t padded_h = d.H + 2 * geometry.pad_h;
  const std::size_t padded_w = d.W + 2 * geometry.pad_w;
  if (d.kh > padded_h || d.kw > padded_w) {
    throw ShapeError("conv2d: kernel " + shape_to_string({d.kh, d.kw}) + " exceeds padded input " +
                     shape_to_string({padded_h, padded_w}));
  }
  d.Ho = (padded_h - d.kh) / geometry.stride_h + 1;
  d.Wo = (padded_w - d.kw) / geometry.stride_w + 1;

  const std::size_t P = d.Ho * d.Wo;
  const std::size_t CKK = d.C * d.kh * d.kw;
  std::vector<float> out(d.B * d.O * P);
  std::vector<float> cols(CKK * P);
  const float* xd = x.data().data();
  const float* wd = weight.data().data();
  const auto bd = bias.data();
  for (std::size_t b = 0; b < d.B; ++b) {
    im2col(xd + b * d.C * d.H * d.W, d, cols.data());
    float* ob = out.data() + b * d.O * P;
    detail::gemm(false, false, d.O, P, CKK, wd, cols.data(), ob, false);
    for (std::size_t o = 0; o < d.O; ++o) {
      for (std::size_t p = 0; p < P; ++p) ob[o * P + p] += bd[o];
    }
  }

  return Tensor::make_result(
      {d.B, d.O, d.Ho, d.Wo}, std::move(out), OpKind::kConv2D, {x, weight, bias},
      [x, weight, bias, d](const TensorImpl& o) {
        const std::size_t P = d.Ho * d.Wo;
        const std::size_t CKK = d.C * d.kh * d.kw;
        std::vector<float> cols(CKK * P);
        const float* xd = x.data().data();
        for (std::size_t b = 0; b < d.B; ++b) {
          const float* gout = o.grad.data() + b * d.O * P;
          if (weight.requires_grad()) {  // dW += dOut * cols^T
            im2col(xd + b * d.C * d.H * d.W, d, cols.data());
            detail::gemm(false, true, d.O, CKK, P, gout, cols.data(), weight.impl()->grad_buffer(), true);
          }
          if (x.requires_grad()) {  // dcols = W^T * dOut
            detail::gemm(true, false, CKK, P, d.O, weight.data().data(), gout, cols.data(), false);
            col2im(cols.data(), d, x.impl()->grad_buffer() + b * d.C * d.H * d.W);
          }
        }
        if (bias.requires_grad()) {
          float* gb = bias.impl()->grad_buffer();
          for (std::size_t oc = 0; oc < d.O; ++oc) {
            double s = 0.0;
            for (std::size_t b = 0; b < d.B; ++b) {
              const float* gout = o.grad.data() + (b * d.O + oc) * P;
              for (std::size_t p = 0; p < P; ++p) s += gout[p];
            }
            gb[oc] += static_cast<float>(s);
          }
        }
      });
}

Tensor maxpool2d(const Tensor& x, std::size_t window, std::size_t stride) {
  if (x.rank() != 4) throw ShapeError("maxpool2d expects [B,C,H,W], got " + shape_to_string(x.shape()));
  if (window == 0 || stride == 0) throw ShapeError("maxpool2d: window and stride must be positive");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (window > H || window > W) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " exceeds input " + shape_to_string(x.shape()));
  }
  const std::size_t Ho = (H - window) / stride + 1;
  const std::size_t Wo = (W - window) / stride + 1;
  const auto in = x.data();
  std::vector<float> out(B * C * Ho * Wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const float* plane = in.data() + bc * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = (oy * stride) * W + ox * stride;
        float best_v = plane[best];
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = (oy * stride + i) * W + ox * stride + j;
            if (plane[idx] > best_v) {  // strict: first occurrence wins ties
              best_v = plane[idx];
              best = idx;
            }
          }
        }
        const std::size_t oi = (bc * Ho + oy) * Wo + ox;
        out[oi] = best_v;
        argmax[oi] = bc * H * W + best;
      }
    }
  }
  return Tensor::make_result({B, C, Ho, Wo}, std::move(out), OpKind::kMaxPool2D, {x},
                             [x, argmax = std::move(argmax)](const TensorImpl& o) {
                               if (!x.requires_grad()) return;
                               float* g = x.impl()->grad_buffer();
                               for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += o.grad[i];
                             });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool expects [B,C,H,W], got " + shape_to_string(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const auto in = x.data();
  std::vector<float> out(B * C);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double s = 0.0;
    for (std::size_t i = 0; i < HW; ++i) s += in[bc * HW + i];
    out[bc] = static_cast<float>(s / static_cast<double>(HW));
  }
  return Tensor::make_result({B, C}, std::move(out), OpKind::kGlobalAvgPool, {x}, [x, B, C, HW](const TensorImpl& o) {
    if (!x.requires_grad()) return;
    float* g = x.impl()->grad_buffer();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const float share = static_cast<float>(static_cast<double>(o.grad[bc]) / static_cast<double>(HW));
      for (std::size_t i = 0; i < HW; ++i) g[bc * HW + i] += share;
    }
  });
}

}  // namespace leafkit::ops
