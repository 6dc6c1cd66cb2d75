#include "leafkit/explain.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "leafkit/error.h"
#include "leafkit/ops.h"

namespace leafkit {

namespace {

constexpr float kViridis[256][3] = {
#include "viridis_lut.inc"
};

}  // namespace

std::string last_conv_layer(const ModelSpec& spec) {
  for (auto it = spec.layers.rbegin(); it != spec.layers.rend(); ++it) {
    if (std::holds_alternative<Conv2DConfig>(it->params)) return it->name;
  }
  throw ConfigError("model has no convolutional layer");
}

Heatmap gradcam(const Model& model, const Tensor& image, int target_class, std::string_view layer) {
  const ModelSpec& spec = model.spec();
  const std::string name = layer.empty() ? last_conv_layer(spec) : std::string(layer);
  const auto index = model.layer_index(name);
  if (!index) throw ConfigError("unknown layer '" + name + "'");
  if (!std::holds_alternative<Conv2DConfig>(spec.layers[*index].params)) {
    throw ConfigError("layer '" + name + "' is not a convolution");
  }
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= spec.num_classes) {
    throw LabelError("target class " + std::to_string(target_class) + " outside [0, " +
                     std::to_string(spec.num_classes) + ")");
  }
  if (image.rank() != 4 || image.dim(0) != 1) throw ShapeError("gradcam expects one image [1,C,H,W]");

  Model work = model.clone();
  Tensor activations;
  const Tensor logits = work.forward(image, name, activations);
  std::vector<float> onehot(spec.num_classes, 0.0f);
  onehot[static_cast<std::size_t>(target_class)] = 1.0f;
  const Tensor target = ops::sum(ops::mul(logits, Tensor::from({1, spec.num_classes}, onehot)));
  target.backward();

  const std::size_t C = activations.dim(1), H = activations.dim(2), W = activations.dim(3);
  const auto A = activations.data();
  std::vector<float> dA(A.size(), 0.0f);
  if (activations.has_grad()) std::copy(activations.grad().begin(), activations.grad().end(), dA.begin());

  Heatmap hm;
  hm.height = H;
  hm.width = W;
  hm.layer = name;
  hm.target_class = target_class;
  std::vector<double> acc(H * W, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double w = 0.0;
    for (std::size_t i = 0; i < H * W; ++i) w += dA[c * H * W + i];
    w /= static_cast<double>(H * W);
    for (std::size_t i = 0; i < H * W; ++i) acc[i] += w * A[c * H * W + i];
  }
  hm.values.resize(H * W);
  for (std::size_t i = 0; i < H * W; ++i) hm.values[i] = static_cast<float>(std::max(0.0, acc[i]));
  const auto [lo, hi] = std::minmax_element(hm.values.begin(), hm.values.end());
  hm.min = *lo;
  hm.max = *hi;
  return hm;
}

std::array<float, 3> viridis(double t) {
  const double c = std::isfinite(t) ? std::clamp(t, 0.0, 1.0) : 0.0;
  const auto i = static_cast<std::size_t>(std::lround(c * 255.0));
  return {kViridis[i][0], kViridis[i][1], kViridis[i][2]};
}

Image render_overlay(const Heatmap& heatmap, const Image& image, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0, 1]");
  if (heatmap.values.size() != heatmap.height * heatmap.width || heatmap.values.empty()) {
    throw ShapeError("heatmap is empty or inconsistent");
  }
  const double range = static_cast<double>(heatmap.max) - heatmap.min;
  Image grid = Image::filled(heatmap.width, heatmap.height, 0.0f);
  for (std::size_t y = 0; y < heatmap.height; ++y)
    for (std::size_t x = 0; x < heatmap.width; ++x) {
      const float t = range > 0.0 ? static_cast<float>((heatmap.at(y, x) - heatmap.min) / range) : 0.0f;
      for (std::size_t c = 0; c < kImageChannels; ++c) grid.at(c, y, x) = t;
    }
  const Image up = resize_bilinear(grid, image.width, image.height);

  Image out = image;
  const auto a = static_cast<float>(alpha);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x) {
      const auto color = viridis(up.at(0, y, x));
      for (std::size_t c = 0; c < kImageChannels; ++c) {
        out.at(c, y, x) = (1.0f - a) * image.at(c, y, x) + a * color[c];
      }
    }
  return out;
}

std::string heatmap_json(const Heatmap& heatmap) {
  nlohmann::ordered_json j;
  j["layer"] = heatmap.layer;
  j["target_class"] = heatmap.target_class;
  j["height"] = heatmap.height;
  j["width"] = heatmap.width;
  j["min"] = heatmap.min;
  j["max"] = heatmap.max;
  j["values"] = heatmap.values;
  return j.dump(2) + "\n";
}

}  // namespace leafkit
