// Analytic gradients against central differences for every differentiable op,
// every layer kind and a composed hybrid network at toy sizes.
//
// Everything is evaluated in f32, which puts a floor of roughly 1e-7 * |f| on
// each function value. Three things keep that floor well below 1e-3 of the
// gradients being checked:
//
//  * Losses are centred: sum((y - y0) * w) with y0 the output at the starting
//    point. The gradient is unchanged but the scalar stays near zero, so its own
//    rounding stops dominating the difference quotient.
//  * Piecewise-linear and quadratic ops use a coarse step. Central differences
//    are exact for them, so the step only has to respect kink and tie margins.
//  * The recurrent checks use a sign-consistent regime (positive inputs,
//    weights and loss weights, gates away from saturation) so no gradient
//    coordinate is the near-cancelling sum of large opposite terms.

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <limits>
#include <chrono>
#include <cmath>
#include <functional>

#include "fixtures.h"
#include "leafkit/gradcheck.h"
#include "leafkit/layers.h"
#include "leafkit/model.h"
#include "leafkit/ops.h"

using namespace leafkit;
using fixtures::random_tensor;
using fixtures::weighted_sum;

namespace {

constexpr double kTolerance = 1e-3;
constexpr double kExactStep = 1.0 / 4.0;    // linear / quadratic in the probed value
constexpr double kSmoothStep = 1.0 / 32.0;  // sigmoid, tanh, softmax
constexpr double kRecurrentStep = 1.0 / 64.0;
constexpr int kTrials = 12;

using TensorFn = std::function<Tensor(const Tensor&)>;

// Values in +-[lo, hi]. With lo > kExactStep relu never switches under the probe.
Tensor away_from_zero(const Shape& shape, Rng& rng, float lo = 0.5f, float hi = 2.0f) {
  std::uniform_real_distribution<float> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Tensor::from(shape, std::move(v));
}

Tensor positive(const Shape& shape, Rng& rng, float lo, float hi) { return random_tensor(shape, rng, lo, hi); }

void fill_uniform(Tensor t, Rng& rng, float lo, float hi) {
  std::uniform_real_distribution<float> u(lo, hi);
  for (float& v : t.data()) v = u(rng);
}

// A shuffled evenly spaced grid in [-2, 2]: every pair of values differs by at
// least `gap`, so a maxpool window never has a near tie.
Tensor distinct_values(const Shape& shape, Rng& rng) {
  const std::size_t n = shape_numel(shape);
  const float gap = 4.0f / static_cast<float>(std::max<std::size_t>(n, 1));
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = -2.0f + gap * static_cast<float>(i);
  std::shuffle(v.begin(), v.end(), rng);
  return Tensor::from(shape, std::move(v));
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor reference_output(const std::function<Tensor()>& out) {
  NoGradGuard no_grad;
  return out().clone();
}

// t -> sum((out(t) - out(at)) * w)
TensorFn centred(TensorFn out, const Tensor& at, Tensor w) {
  Tensor y0 = reference_output([&] { return out(at); });
  return [out = std::move(out), y0, w](const Tensor& t) { return weighted_sum(ops::sub(out(t), y0), w); };
}

// Same for a loss over captured parameters.
std::function<Tensor()> centred(std::function<Tensor()> out, Tensor w) {
  Tensor y0 = reference_output(out);
  return [out = std::move(out), y0, w] { return weighted_sum(ops::sub(out(), y0), w); };
}

double check(const TensorFn& out, const Tensor& x, const Tensor& w, double step) {
  return finite_diff_check(centred(out, x, w), x, step);
}

}  // namespace

TEST(GradCheck, HarnessAgreesOnKnownGradient) {
  const Tensor x = Tensor::from({3}, {0.5f, -1.0f, 2.0f});
  const double err = finite_diff_check([](const Tensor& t) { return ops::sum(ops::mul(t, t)); }, x, kExactStep);
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, HarnessDetectsWrongGradient) {
  // detach() cuts the tape, so the analytic gradient of sum(detach(x)*x) is x
  // while the true derivative is 2x.
  const Tensor x = Tensor::from({2}, {1.0f, 2.0f});
  const double err =
      finite_diff_check([](const Tensor& t) { return ops::sum(ops::mul(t.detach(), t)); }, x, kExactStep);
  EXPECT_GT(err, 0.4);
}

TEST(GradCheck, ReluSumAwayFromKink) {
  const Tensor x = Tensor::from({4}, {-1.5f, -0.3f, 0.4f, 2.0f});
  EXPECT_LT(finite_diff_check([](const Tensor& t) { return ops::sum(ops::relu(t)); }, x, 1e-3), kTolerance);
}

TEST(GradCheck, ElementwiseOps) {
  Rng rng(1);
  for (int trial = 0; trial < kTrials; ++trial) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 5)};
    const Tensor w = away_from_zero(s, rng);
    const Tensor other = away_from_zero(s, rng);
    const Tensor x = away_from_zero(s, rng);
    const Tensor mid = random_tensor(s, rng, -2.0f, 2.0f);
    EXPECT_LT(check([](const Tensor& t) { return ops::sigmoid(t); }, mid, w, kSmoothStep), kTolerance);
    EXPECT_LT(check([](const Tensor& t) { return ops::tanh(t); }, mid, w, kSmoothStep), kTolerance);
    EXPECT_LT(check([](const Tensor& t) { return ops::relu(t); }, x, w, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::mul(t, other); }, x, w, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::mul(t, t); }, x, w, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::sub(other, t); }, x, w, kExactStep), kTolerance);
    const Tensor row = away_from_zero({s[1]}, rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::add(x, t); }, row, w, kExactStep), kTolerance);
    EXPECT_LT(finite_diff_check([&](const Tensor& t) { return ops::mean(ops::mul(t, t)); }, x, kExactStep), kTolerance);
    EXPECT_LT(finite_diff_check([&](const Tensor& t) { return ops::sum(ops::mul(t, w)); }, x, kExactStep), kTolerance);
  }
}

TEST(GradCheck, MatmulLinearConcat) {
  Rng rng(2);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t M = pick(rng, 1, 3), K = pick(rng, 1, 5), N = pick(rng, 1, 4);
    const Tensor a = random_tensor({M, K}, rng, -2.0f, 2.0f), b = random_tensor({K, N}, rng, -2.0f, 2.0f);
    const Tensor w = away_from_zero({M, N}, rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::matmul(t, b); }, a, w, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::matmul(a, t); }, b, w, kExactStep), kTolerance);

    const Tensor wt = random_tensor({N, K}, rng, -2.0f, 2.0f), bias = random_tensor({N}, rng, -2.0f, 2.0f);
    EXPECT_LT(check([&](const Tensor& t) { return ops::linear(a, t, bias); }, wt, w, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::linear(t, wt, bias); }, a, w, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::linear(a, wt, t); }, bias, w, kExactStep), kTolerance);

    const Tensor c = random_tensor({M, N}, rng, -2.0f, 2.0f), wc = away_from_zero({M, K + N}, rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::concat_last(t, c); }, a, wc, kExactStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return ops::concat_last(a, t); }, c, wc, kExactStep), kTolerance);
  }
}

TEST(GradCheck, Conv2DSingleChannelTwoFilters) {
  Rng rng(30);
  const Tensor x = random_tensor({1, 1, 4, 4}, rng, -2.0f, 2.0f);
  const Tensor wt = random_tensor({2, 1, 3, 3}, rng, -1.0f, 1.0f), bias = random_tensor({2}, rng);
  const ops::Conv2DGeometry g{1, 1, 1, 1};
  const Tensor w = away_from_zero({1, 2, 4, 4}, rng);
  EXPECT_LT(check([&](const Tensor& t) { return ops::conv2d(t, wt, bias, g); }, x, w, kExactStep), kTolerance);
  EXPECT_LT(check([&](const Tensor& t) { return ops::conv2d(x, t, bias, g); }, wt, w, kExactStep), kTolerance);
}

TEST(GradCheck, Conv2DRandomGeometry) {
  Rng rng(3);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), C = pick(rng, 1, 3), O = pick(rng, 1, 3);
    const std::size_t k = pick(rng, 1, 3), stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
    const std::size_t H = pick(rng, k, 6), W = pick(rng, k, 6);
    const Tensor x = random_tensor({B, C, H, W}, rng, -2.0f, 2.0f);
    const Tensor wt = random_tensor({O, C, k, k}, rng, -2.0f, 2.0f), bias = random_tensor({O}, rng, -2.0f, 2.0f);
    const ops::Conv2DGeometry g{stride, stride, pad, pad};
    const Tensor w = away_from_zero(ops::conv2d(x, wt, bias, g).shape(), rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::conv2d(t, wt, bias, g); }, x, w, kExactStep), kTolerance)
        << "input, trial " << trial;
    EXPECT_LT(check([&](const Tensor& t) { return ops::conv2d(x, t, bias, g); }, wt, w, kExactStep), kTolerance)
        << "weight, trial " << trial;
    EXPECT_LT(check([&](const Tensor& t) { return ops::conv2d(x, wt, t, g); }, bias, w, kExactStep), kTolerance)
        << "bias, trial " << trial;
  }
}

TEST(GradCheck, MaxPoolAndGlobalAveragePool) {
  Rng rng(4);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), C = pick(rng, 1, 2), H = pick(rng, 2, 4), W = pick(rng, 2, 4);
    const Tensor x = distinct_values({B, C, H, W}, rng);
    // Probe well inside half the grid spacing so no window changes its winner.
    const double step = std::exp2(std::floor(std::log2(2.0 / static_cast<double>(x.numel())))) / 2.0;
    const std::size_t window = pick(rng, 1, std::min<std::size_t>({H, W, 3})), stride = pick(rng, 1, 2);
    const Tensor wp = away_from_zero(ops::maxpool2d(x, window, stride).shape(), rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::maxpool2d(t, window, stride); }, x, wp, step), kTolerance)
        << "trial " << trial;
    const Tensor wg = away_from_zero({B, C}, rng);
    EXPECT_LT(check([](const Tensor& t) { return ops::global_avg_pool(t); }, x, wg, kExactStep), kTolerance);
  }
}

TEST(GradCheck, SequenceReshapeAndTimeStep) {
  Rng rng(5);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), C = pick(rng, 1, 3), H = pick(rng, 1, 4), W = pick(rng, 1, 4);
    const Tensor x = random_tensor({B, C, H, W}, rng, -2.0f, 2.0f);
    const Tensor ws = away_from_zero({B, H, W * C}, rng);
    EXPECT_LT(check([](const Tensor& t) { return ops::sequence_reshape(t); }, x, ws, kExactStep), kTolerance);
    const Tensor seq = random_tensor({B, H, W * C}, rng, -2.0f, 2.0f);
    const Tensor wu = away_from_zero({B, C, H, W}, rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::sequence_unreshape(t, C); }, seq, wu, kExactStep), kTolerance);
    const std::size_t step = pick(rng, 0, H - 1);
    const Tensor wt = away_from_zero({B, W * C}, rng);
    EXPECT_LT(check([&](const Tensor& t) { return ops::time_step(t, step); }, seq, wt, kExactStep), kTolerance);
  }
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  Rng rng(6);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), K = pick(rng, 2, 4);
    const Tensor logits = random_tensor({B, K}, rng, -2.0f, 2.0f);
    std::vector<int> labels(B);
    for (auto& l : labels) l = static_cast<int>(pick(rng, 0, K - 1));
    EXPECT_LT(
        finite_diff_check([&](const Tensor& t) { return ops::softmax_cross_entropy(t, labels); }, logits, kSmoothStep),
        kTolerance);
  }
  const Tensor logits = random_tensor({2, 3}, rng, -2.0f, 2.0f);
  const std::vector<int> labels{1, 2};
  EXPECT_LT(
      finite_diff_check([&](const Tensor& t) { return ops::softmax_cross_entropy(t, labels); }, logits, kSmoothStep),
      kTolerance);
}

TEST(GradCheck, DenseLayer) {
  Rng rng(7);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), in = pick(rng, 1, 6), out = pick(rng, 1, 5);
    DenseParams p = DenseParams::create(in, out, rng);
    const Tensor x = random_tensor({B, in}, rng, -2.0f, 2.0f);
    const Tensor w = away_from_zero({B, out}, rng);
    auto loss = centred([&] { return dense(x, p); }, w);
    EXPECT_LT(check([&](const Tensor& t) { return dense(t, p); }, x, w, kExactStep), kTolerance);
    EXPECT_LT(finite_diff_check_param(loss, p.weight, kExactStep), kTolerance);
    EXPECT_LT(finite_diff_check_param(loss, p.bias, kExactStep), kTolerance);
  }
}

namespace {

// Positive gate weights, scaled per input block so pre-activations stay
// around [0, 1]: sigmoid slopes above 0.19, tanh far from saturation. The
// recurrent block gets half the weight of the input block, which keeps the
// states from drifting upwards over longer sequences.
void sign_consistent_lstm(LSTMParams& p, Rng& rng) {
  const std::size_t hidden = p.w_f.shape()[0], fan = p.w_f.shape()[1], features = fan - hidden;
  std::uniform_real_distribution<float> u(0.2f, 0.6f);
  for (Tensor* t : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) {
    auto v = t->data();
    for (std::size_t j = 0; j < hidden; ++j) {
      for (std::size_t k = 0; k < fan; ++k) {
        v[j * fan + k] = k < hidden ? 0.5f * u(rng) / static_cast<float>(hidden) : u(rng) / static_cast<float>(features);
      }
    }
  }
  for (Tensor* t : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) fill_uniform(*t, rng, 0.0f, 0.2f);
}

}  // namespace

TEST(GradCheck, LstmStepAllInputsAndParameters) {
  Rng rng(8);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), F = pick(rng, 1, 5), Hd = pick(rng, 1, 8);
    LSTMParams p = LSTMParams::create(F, Hd, rng);
    sign_consistent_lstm(p, rng);
    const Tensor x = positive({B, F}, rng, 0.5f, 1.0f);
    const Tensor h0 = positive({B, Hd}, rng, 0.5f, 1.0f), c0 = positive({B, Hd}, rng, 0.5f, 1.0f);
    const Tensor wh = positive({B, Hd}, rng, 0.5f, 1.0f), wc = positive({B, Hd}, rng, 0.5f, 1.0f);
    const Tensor w = ops::concat_last(wh, wc);
    auto out = [&](const Tensor& xt, const Tensor& h, const Tensor& c) {
      const LSTMState s = lstm_step(xt, LSTMState{h, c}, p);
      return ops::concat_last(s.h, s.c);
    };
    EXPECT_LT(check([&](const Tensor& t) { return out(t, h0, c0); }, x, w, kRecurrentStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return out(x, t, c0); }, h0, w, kRecurrentStep), kTolerance);
    EXPECT_LT(check([&](const Tensor& t) { return out(x, h0, t); }, c0, w, kRecurrentStep), kTolerance);
    auto loss = centred([&] { return out(x, h0, c0); }, w);
    for (Tensor* t : {&p.w_f, &p.w_i, &p.w_c, &p.w_o, &p.b_f, &p.b_i, &p.b_c, &p.b_o}) {
      EXPECT_LT(finite_diff_check_param(loss, *t, kRecurrentStep), kTolerance) << "trial " << trial;
    }
  }
}

TEST(GradCheck, LstmSumOfFinalHiddenState) {
  // B=1, T=3, F=4, hidden=3 with a plain sum(h_T) loss.
  Rng rng(90);
  LSTMParams p = LSTMParams::create(4, 3, rng);
  sign_consistent_lstm(p, rng);
  const Tensor seq = positive({1, 3, 4}, rng, 0.5f, 1.0f);
  const Tensor ones = Tensor::full({1, 3}, 1.0f);
  EXPECT_LT(check([&](const Tensor& t) { return lstm_forward(t, p); }, seq, ones, kRecurrentStep), kTolerance);
  auto loss = centred([&] { return lstm_forward(seq, p); }, ones);
  for (Tensor* t : {&p.w_f, &p.w_i, &p.w_c, &p.w_o, &p.b_f, &p.b_i, &p.b_c, &p.b_o}) {
    EXPECT_LT(finite_diff_check_param(loss, *t, kRecurrentStep), kTolerance);
  }
}

TEST(GradCheck, LstmUnrolledThroughTime) {
  Rng rng(9);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t B = pick(rng, 1, 2), T = pick(rng, 1, 5), F = pick(rng, 1, 4), Hd = pick(rng, 1, 8);
    LSTMParams p = LSTMParams::create(F, Hd, rng);
    sign_consistent_lstm(p, rng);
    const Tensor seq = positive({B, T, F}, rng, 0.5f, 1.0f);
    const Tensor w = positive({B, Hd}, rng, 0.5f, 1.0f);
    EXPECT_LT(check([&](const Tensor& t) { return lstm_forward(t, p); }, seq, w, kRecurrentStep), kTolerance);
    auto loss = centred([&] { return lstm_forward(seq, p); }, w);
    for (Tensor* t : {&p.w_f, &p.w_i, &p.w_c, &p.w_o, &p.b_f, &p.b_i, &p.b_c, &p.b_o}) {
      EXPECT_LT(finite_diff_check_param(loss, *t, kRecurrentStep), kTolerance) << "trial " << trial;
    }
  }
}

namespace {

// Toy version of the hybrid: conv -> pool -> conv -> sequence -> LSTM -> dense -> logits.
ModelSpec toy_hybrid_spec() {
  ModelSpec s;
  s.architecture = Architecture::kCustom;
  s.channels = 3;
  s.height = 8;
  s.width = 8;
  s.num_classes = 3;
  s.layers = {
      {"conv1", Conv2DConfig{4, 3, 1, 1, Activation::kRelu}},
      {"pool1", MaxPoolConfig{2, 2}},
      {"conv2", Conv2DConfig{4, 3, 1, 1, Activation::kRelu}},
      {"sequence", SequenceReshapeConfig{}},
      {"lstm", LstmConfig{8}},
      {"dense1", DenseConfig{6, Activation::kRelu}},
      {"logits", DenseConfig{3, Activation::kNone}},
  };
  return s;
}

Tensor param(const Model& m, const std::string& name) {
  for (const auto& p : m.parameters())
    if (p.name == name) return p.tensor;
  throw std::runtime_error("no parameter " + name);
}

// Puts the toy model in the sign-consistent regime: every weight positive and
// scaled by its fan-in so activations stay O(1) from layer to layer. conv1 is
// dominated by its centre tap so that, fed by bright_per_window(), each pooling
// window has a clear winner.
void positive_weights(Model& m, Rng& rng) {
  for (const auto& p : m.parameters()) {
    const Shape& s = p.tensor.shape();
    if (s.size() < 2) {
      fill_uniform(p.tensor, rng, 0.0f, 0.2f);
      continue;
    }
    const float fan = static_cast<float>(p.tensor.numel() / s[0]);
    fill_uniform(p.tensor, rng, 0.2f / fan, 1.5f / fan);
    if (p.name == "conv1.weight") {
      const std::size_t taps = s[2] * s[3];
      std::uniform_real_distribution<float> centre(0.5f / s[1], 1.0f / s[1]);
      Tensor w = p.tensor;
      for (std::size_t i = 0; i < w.numel(); i += taps) w.data()[i + taps / 2] = centre(rng);
    }
  }
}

// One bright pixel per 2x2 pooling window, the rest dim.
Tensor bright_per_window(std::size_t batch, std::size_t channels, std::size_t size, Rng& rng) {
  Tensor x = random_tensor({batch, channels, size, size}, rng, 0.1f, 0.3f);
  std::uniform_real_distribution<float> bright(0.8f, 1.0f);
  auto v = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t r = 0; r < size; r += 2) {
      for (std::size_t c = 0; c < size; c += 2) {
        const std::size_t dr = pick(rng, 0, 1), dc = pick(rng, 0, 1);
        for (std::size_t ch = 0; ch < channels; ++ch) v[((b * channels + ch) * size + r + dr) * size + c + dc] = bright(rng);
      }
    }
  }
  return x;
}

// Smallest gap between the largest and second-largest value over all 2x2
// windows of live (not identically zero) channels.
float min_pool_gap(const Tensor& a) {
  const Shape& s = a.shape();
  const auto v = a.data();
  float gap = std::numeric_limits<float>::infinity();
  for (std::size_t bc = 0; bc < s[0] * s[1]; ++bc) {
    const float* plane = v.data() + bc * s[2] * s[3];
    if (std::all_of(plane, plane + s[2] * s[3], [](float z) { return z == 0.0f; })) continue;
    for (std::size_t r = 0; r + 1 < s[2]; r += 2) {
      for (std::size_t c = 0; c + 1 < s[3]; c += 2) {
        std::array<float, 4> w{plane[r * s[3] + c], plane[r * s[3] + c + 1], plane[(r + 1) * s[3] + c],
                               plane[(r + 1) * s[3] + c + 1]};
        std::sort(w.begin(), w.end());
        gap = std::min(gap, w[3] - w[2]);
      }
    }
  }
  return gap;
}

// Relu units alternate between always-on (bias +margin; inputs are
// non-negative so the pre-activation is at least the margin) and always-off
// (bias -(bound + margin), where bound is the largest reachable w . x). The
// dead units keep the relu zero branch under test; the margin keeps every unit
// far from its kink relative to the probe step.
void separate_relu_units(Model& m, const Tensor& x, float margin) {
  for (const std::string layer : {"conv1", "conv2", "dense1"}) {
    const auto idx = *m.layer_index(layer);
    Tensor input = x;
    if (idx > 0) m.forward(x, m.spec().layers[idx - 1].name, input);
    float max_in = 0.0f;
    for (float v : input.data()) max_in = std::max(max_in, std::abs(v));
    Tensor w = param(m, layer + ".weight"), b = param(m, layer + ".bias");
    const std::size_t units = b.numel(), fan = w.numel() / units;
    for (std::size_t u = 0; u < units; ++u) {
      float bound = 0.0f;
      for (std::size_t j = 0; j < fan; ++j) bound += std::abs(w.data()[u * fan + j]) * max_in;
      b.data()[u] = u % 2 == 0 ? margin : -(bound + margin);
    }
  }
}

}  // namespace

// Every parameter of the toy network, i.e. the chain rule through the whole
// stack down to conv1. The image itself is not probed: one pixel moves the
// output by ~1e-5 per unit, below what an f32 forward pass resolves, and each
// layer's input gradient is already checked on its own above.
TEST(GradCheck, ComposedHybridModelEveryParameter) {
  const auto start = std::chrono::steady_clock::now();
  const ModelSpec spec = toy_hybrid_spec();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Model m = Model::build(spec, seed);
    positive_weights(m, rng);
    const Tensor x = bright_per_window(2, 3, 8, rng);
    separate_relu_units(m, x, 0.5f);
    Tensor conv1_out;
    m.forward(x, "conv1", conv1_out);
    // A probe moves any conv1 output by well under this, so no window changes winner.
    ASSERT_GT(min_pool_gap(conv1_out), 0.1f) << "seed " << seed;
    const Tensor w = positive({2, 3}, rng, 0.5f, 1.0f);
    auto loss = centred([&] { return m.forward(x); }, w);
    for (const auto& p : m.parameters()) {
      m.zero_grad();
      EXPECT_LT(finite_diff_check_param(loss, p.tensor, kSmoothStep), kTolerance) << p.name << " seed " << seed;
    }

    // The actual training loss too. Softmax mixes gradient signs, so only the
    // final layer (where that cannot cancel) is probed through it.
    const std::vector<int> labels{0, 2};
    auto ce = [&] { return ops::softmax_cross_entropy(m.forward(x), labels); };
    EXPECT_LT(finite_diff_check_param(ce, param(m, "logits.weight"), kSmoothStep), kTolerance);
    EXPECT_LT(finite_diff_check_param(ce, param(m, "logits.bias"), kSmoothStep), kTolerance);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 60.0);
}
