#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "leafkit/image.h"
#include "leafkit/model.h"

namespace leafkit {

struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;  // row-major, all >= 0
  std::string layer;
  int target_class = 0;
  float min = 0.0f;
  float max = 0.0f;

  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

// Name of the deepest convolutional layer, the default Grad-CAM target.
std::string last_conv_layer(const ModelSpec& spec);

// Gradient-weighted class activation map of `layer` (a conv layer) for one
// image [1, C, H, W]. The model is not modified. An empty layer name selects
// last_conv_layer().
Heatmap gradcam(const Model& model, const Tensor& image, int target_class, std::string_view layer = {});

// 256-entry viridis lookup; t is clamped to [0, 1].
std::array<float, 3> viridis(double t);

// Upsamples the normalized map to the image size, colors it and blends:
// out = (1 - alpha) * image + alpha * color. Zero-range maps color as 0.
Image render_overlay(const Heatmap& heatmap, const Image& image, double alpha);

std::string heatmap_json(const Heatmap& heatmap);

}  // namespace leafkit
