#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "leafkit/image.h"
#include "leafkit/rng.h"

namespace leafkit {

enum class AugmentationKind { kBrightness, kCrop, kFlip, kRotation, kCombination };

inline constexpr AugmentationKind kAllAugmentations[] = {AugmentationKind::kBrightness, AugmentationKind::kCrop,
                                                         AugmentationKind::kFlip, AugmentationKind::kRotation,
                                                         AugmentationKind::kCombination};

std::string_view augmentation_name(AugmentationKind kind);
std::optional<AugmentationKind> parse_augmentation(std::string_view name);

// Sampling ranges for the materialized training sets.
struct AugmentationRanges {
  static constexpr double kBrightnessMin = 1.1;
  static constexpr double kBrightnessMax = 1.5;
  static constexpr double kCropMin = 0.7;
  static constexpr double kCropMax = 0.9;
  static constexpr double kRotationMinDeg = 2.0;
  static constexpr double kRotationMaxDeg = 30.0;
};

// Strict rejects parameters outside the sampling ranges. Relaxed additionally
// admits the identity boundaries (brightness 1.0, crop 1.0, rotation 0) used
// to check the transforms themselves.
enum class RangeCheck { kStrict, kRelaxed };

enum class FlipAxis { kHorizontal, kVertical };

// Multiplies every value by factor and clamps to 1.
Image augment_brightness(const Image& img, double factor, RangeCheck check = RangeCheck::kStrict);

// Horizontal mirrors columns (left-right); vertical mirrors rows.
Image augment_flip(const Image& img, FlipAxis axis);

// Crops a window of `fraction` x the image size whose top-left corner sits at
// anchor (each in [0,1]) of the free range, then resizes back to the input size.
struct CropAnchor {
  double x = 0.5;
  double y = 0.5;
};
Image augment_crop(const Image& img, double fraction, CropAnchor anchor, RangeCheck check = RangeCheck::kStrict);

// Rotates counter-clockwise (as displayed) about the image center, keeping the
// canvas size; samples outside the source are reflected back inside. Angles
// that are multiples of 90 degrees on square images (or of 180 on any image)
// use an exact pixel permutation.
Image augment_rotate(const Image& img, double angle_deg);

// The parameters drawn for one combination sample. Operations are applied in
// the fixed order brightness, crop, flip, rotation.
struct CombinationPlan {
  std::optional<double> brightness;
  std::optional<std::pair<double, CropAnchor>> crop;
  std::optional<FlipAxis> flip;
  std::optional<double> rotation_deg;

  std::size_t size() const;
};

CombinationPlan plan_combination(std::uint64_t seed);
Image apply_combination(const Image& img, const CombinationPlan& plan);
Image augment_combination(const Image& img, std::uint64_t seed);

// Parameter draws for the single-technique sets.
double sample_brightness(Rng& rng);
std::pair<double, CropAnchor> sample_crop(Rng& rng);
double sample_rotation(Rng& rng);

}  // namespace leafkit
