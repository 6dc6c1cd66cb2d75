#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "leafkit/tensor.h"

namespace leafkit {

// Planar RGB image with values in [0,1]; pixels[(c * height + y) * width + x].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  static Image filled(std::size_t width, std::size_t height, float value);

  float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

  bool operator==(const Image&) const = default;
};

inline constexpr std::size_t kImageChannels = 3;

// Decodes PNG or JPEG (detected from the file signature). Grayscale and alpha
// inputs are converted to RGB. Throws IoError / FormatError.
Image load_image(const std::filesystem::path& path);

// Reads only the header; returns (width, height) or nullopt if undecodable.
std::optional<std::pair<std::size_t, std::size_t>> probe_image(const std::filesystem::path& path);

// 8-bit RGB PNG; values are clamped and rounded to the nearest level.
void save_png(const Image& image, const std::filesystem::path& path);

// Bilinear resampling with pixel-center alignment; same-size resize is exact.
Image resize_bilinear(const Image& image, std::size_t width, std::size_t height);

// Samples channel c at continuous coordinates, clamping to the border.
float sample_bilinear(const Image& image, std::size_t c, double y, double x);

// Rounds every value to the nearest of 256 levels (what a PNG round trip keeps).
Image quantize8(Image image);

// [1,3,H,W] tensor view of an image.
Tensor image_to_tensor(const Image& image);

}  // namespace leafkit
