#include "leafkit/augment.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "leafkit/error.h"

namespace leafkit {

namespace {

using R = AugmentationRanges;

// Mirrors v into [0, max] (reflection without repeating the edge sample).
double reflect(double v, double max) {
  if (max <= 0.0) return 0.0;
  const double period = 2.0 * max;
  v = std::fmod(std::abs(v), period);
  return v > max ? period - v : v;
}

Image rotate_exact(const Image& img, int quarter_turns) {
  const std::size_t W = img.width, H = img.height;
  Image out = img;
  for (std::size_t c = 0; c < kImageChannels; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        switch (quarter_turns) {
          case 1: out.at(c, y, x) = img.at(c, x, W - 1 - y); break;
          case 2: out.at(c, y, x) = img.at(c, H - 1 - y, W - 1 - x); break;
          case 3: out.at(c, y, x) = img.at(c, H - 1 - x, y); break;
          default: break;
        }
      }
  return out;
}

}  // namespace

std::string_view augmentation_name(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::kBrightness: return "brightness";
    case AugmentationKind::kCrop: return "crop";
    case AugmentationKind::kFlip: return "flip";
    case AugmentationKind::kRotation: return "rotation";
    case AugmentationKind::kCombination: return "combination";
  }
  return "unknown";
}

std::optional<AugmentationKind> parse_augmentation(std::string_view name) {
  for (AugmentationKind k : kAllAugmentations) {
    if (augmentation_name(k) == name) return k;
  }
  return std::nullopt;
}

Image augment_brightness(const Image& img, double factor, RangeCheck check) {
  const double lo = check == RangeCheck::kStrict ? R::kBrightnessMin : 1.0;
  if (!(factor >= lo && factor <= R::kBrightnessMax)) {
    throw ParameterError("brightness factor " + std::to_string(factor) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(R::kBrightnessMax) + "]");
  }
  Image out = img;
  const auto f = static_cast<float>(factor);
  for (float& v : out.pixels) v = std::min(1.0f, v * f);
  return out;
}

Image augment_flip(const Image& img, FlipAxis axis) {
  Image out = img;
  for (std::size_t c = 0; c < kImageChannels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        out.at(c, y, x) = axis == FlipAxis::kHorizontal ? img.at(c, y, img.width - 1 - x)
                                                        : img.at(c, img.height - 1 - y, x);
      }
  return out;
}

Image augment_crop(const Image& img, double fraction, CropAnchor anchor, RangeCheck check) {
  const double hi = check == RangeCheck::kStrict ? R::kCropMax : 1.0;
  if (!(fraction >= R::kCropMin && fraction <= hi)) {
    throw ParameterError("crop fraction " + std::to_string(fraction) + " outside [" + std::to_string(R::kCropMin) +
                         ", " + std::to_string(hi) + "]");
  }
  if (!(anchor.x >= 0.0 && anchor.x <= 1.0 && anchor.y >= 0.0 && anchor.y <= 1.0)) {
    throw ParameterError("crop anchor must lie in [0,1]^2");
  }
  const double cw = fraction * static_cast<double>(img.width);
  const double ch = fraction * static_cast<double>(img.height);
  const double x0 = anchor.x * (static_cast<double>(img.width) - cw);
  const double y0 = anchor.y * (static_cast<double>(img.height) - ch);
  const double sx = cw / static_cast<double>(img.width);
  const double sy = ch / static_cast<double>(img.height);
  Image out = img;
  for (std::size_t c = 0; c < kImageChannels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        out.at(c, y, x) = sample_bilinear(img, c, y0 + (static_cast<double>(y) + 0.5) * sy - 0.5,
                                          x0 + (static_cast<double>(x) + 0.5) * sx - 0.5);
      }
  return out;
}

Image augment_rotate(const Image& img, double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  if (a == 0.0) return img;
  if (a == 180.0) return rotate_exact(img, 2);
  if ((a == 90.0 || a == 270.0) && img.width == img.height) return rotate_exact(img, a == 90.0 ? 1 : 3);

  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double maxx = static_cast<double>(img.width) - 1.0;
  const double maxy = static_cast<double>(img.height) - 1.0;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      // Inverse map (y axis points down, rotation is visually counter-clockwise).
      const double src_x = reflect(cs * dx - sn * dy + cx, maxx);
      const double src_y = reflect(sn * dx + cs * dy + cy, maxy);
      for (std::size_t c = 0; c < kImageChannels; ++c) out.at(c, y, x) = sample_bilinear(img, c, src_y, src_x);
    }
  }
  return out;
}

std::size_t CombinationPlan::size() const {
  return (brightness ? 1 : 0) + (crop ? 1 : 0) + (flip ? 1 : 0) + (rotation_deg ? 1 : 0);
}

double sample_brightness(Rng& rng) {
  return std::uniform_real_distribution<double>(R::kBrightnessMin, R::kBrightnessMax)(rng);
}

std::pair<double, CropAnchor> sample_crop(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fraction = std::uniform_real_distribution<double>(R::kCropMin, R::kCropMax)(rng);
  CropAnchor anchor;
  anchor.x = unit(rng);
  anchor.y = unit(rng);
  return {fraction, anchor};
}

double sample_rotation(Rng& rng) {
  const double magnitude = std::uniform_real_distribution<double>(R::kRotationMinDeg, R::kRotationMaxDeg)(rng);
  return std::bernoulli_distribution(0.5)(rng) ? magnitude : -magnitude;
}

CombinationPlan plan_combination(std::uint64_t seed) {
  Rng rng(seed);
  const int count = std::uniform_int_distribution<int>(1, 3)(rng);
  std::array<int, 4> ops{0, 1, 2, 3};
  std::shuffle(ops.begin(), ops.end(), rng);
  std::array<bool, 4> chosen{};
  for (int i = 0; i < count; ++i) chosen[static_cast<std::size_t>(ops[static_cast<std::size_t>(i)])] = true;

  CombinationPlan plan;
  if (chosen[0]) plan.brightness = sample_brightness(rng);
  if (chosen[1]) plan.crop = sample_crop(rng);
  if (chosen[2]) plan.flip = std::bernoulli_distribution(0.5)(rng) ? FlipAxis::kHorizontal : FlipAxis::kVertical;
  if (chosen[3]) plan.rotation_deg = sample_rotation(rng);
  return plan;
}

Image apply_combination(const Image& img, const CombinationPlan& plan) {
  Image out = img;
  if (plan.brightness) out = augment_brightness(out, *plan.brightness);
  if (plan.crop) out = augment_crop(out, plan.crop->first, plan.crop->second);
  if (plan.flip) out = augment_flip(out, *plan.flip);
  if (plan.rotation_deg) out = augment_rotate(out, *plan.rotation_deg);
  return out;
}

Image augment_combination(const Image& img, std::uint64_t seed) { return apply_combination(img, plan_combination(seed)); }

}  // namespace leafkit
