#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.h"
#include "leafkit/augment.h"
#include "leafkit/error.h"

using namespace leafkit;

namespace {

Image random_image(std::size_t w, std::size_t h, Rng& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img = Image::filled(w, h, 0.0f);
  for (float& v : img.pixels) v = u(rng);
  return img;
}

// Bright disk with a smooth radial falloff that reaches zero well inside the
// canvas, so neither aliasing nor the reflected border shows up.
Image smooth_disk(std::size_t size) {
  Image img = Image::filled(size, size, 0.0f);
  const double c = (static_cast<double>(size) - 1.0) / 2.0, radius = 0.3 * static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double r2 = (std::pow(x - c, 2) + std::pow(y - c, 2)) / (radius * radius);
      const float v = r2 < 1.0 ? static_cast<float>((1.0 - r2) * (1.0 - r2)) : 0.0f;
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(ch, y, x) = v;
    }
  return img;
}

float max_abs_diff(const Image& a, const Image& b) {
  float d = 0.0f;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) d = std::max(d, std::abs(a.pixels[i] - b.pixels[i]));
  return d;
}

bool in_unit_range(const Image& img) {
  return std::all_of(img.pixels.begin(), img.pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

}  // namespace

TEST(Brightness, ArithmeticClampAndIdentity) {
  const Image gray = Image::filled(4, 4, 0.5f);
  for (float v : augment_brightness(gray, 1.4).pixels) EXPECT_NEAR(v, 0.7f, 1e-6);
  const Image white = Image::filled(3, 2, 1.0f);
  EXPECT_EQ(augment_brightness(white, 1.5), white);
  Rng rng(1);
  const Image img = random_image(5, 5, rng);
  EXPECT_EQ(augment_brightness(img, 1.0, RangeCheck::kRelaxed), img);
}

TEST(Brightness, OutOfRangeFactorRejected) {
  const Image img = Image::filled(2, 2, 0.5f);
  EXPECT_THROW(augment_brightness(img, 1.0), ParameterError);
  EXPECT_THROW(augment_brightness(img, 1.6), ParameterError);
  EXPECT_THROW(augment_brightness(img, 0.9, RangeCheck::kRelaxed), ParameterError);
}

TEST(Flip, DefinitionOnTwoByTwo) {
  Image img = Image::filled(2, 2, 0.0f);
  const float a = 0.1f, b = 0.2f, c = 0.3f, d = 0.4f;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    img.at(ch, 0, 0) = a;
    img.at(ch, 0, 1) = b;
    img.at(ch, 1, 0) = c;
    img.at(ch, 1, 1) = d;
  }
  const Image h = augment_flip(img, FlipAxis::kHorizontal);
  EXPECT_EQ(h.at(0, 0, 0), b);
  EXPECT_EQ(h.at(0, 0, 1), a);
  EXPECT_EQ(h.at(0, 1, 0), d);
  EXPECT_EQ(h.at(0, 1, 1), c);
  const Image v = augment_flip(img, FlipAxis::kVertical);
  EXPECT_EQ(v.at(2, 0, 0), c);
  EXPECT_EQ(v.at(2, 1, 1), b);
}

TEST(Flip, InvolutionAndSymmetricInput) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Image img = random_image(1 + rng() % 9, 1 + rng() % 9, rng);
    for (FlipAxis axis : {FlipAxis::kHorizontal, FlipAxis::kVertical})
      EXPECT_EQ(augment_flip(augment_flip(img, axis), axis), img);
  }
  Image sym = Image::filled(4, 3, 0.0f);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) sym.at(ch, y, x) = sym.at(ch, y, 3 - x) = 0.1f * (y + x + ch);
  EXPECT_EQ(augment_flip(sym, FlipAxis::kHorizontal), sym);
}

TEST(Crop, FullCentredCropIsIdentityAndDimensionsKept) {
  Rng rng(3);
  const Image img = random_image(12, 10, rng);
  const Image same = augment_crop(img, 1.0, {0.5, 0.5}, RangeCheck::kRelaxed);
  EXPECT_LT(max_abs_diff(same, img), 1e-6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [fraction, anchor] = sample_crop(rng);
    EXPECT_GE(fraction, 0.7);
    EXPECT_LE(fraction, 0.9);
    const Image out = augment_crop(img, fraction, anchor);
    EXPECT_EQ(out.width, img.width);
    EXPECT_EQ(out.height, img.height);
    EXPECT_TRUE(in_unit_range(out));
  }
}

TEST(Crop, ConstantImageStaysConstantAndRangeEnforced) {
  const Image img = Image::filled(16, 16, 0.3f);
  for (float v : augment_crop(img, 0.75, {0.2, 0.9}).pixels) EXPECT_NEAR(v, 0.3f, 1e-6);
  EXPECT_THROW(augment_crop(img, 0.5, {0.5, 0.5}), ParameterError);
  EXPECT_THROW(augment_crop(img, 1.0, {0.5, 0.5}), ParameterError);
  EXPECT_THROW(augment_crop(img, 0.8, {1.5, 0.5}), ParameterError);
}

TEST(Rotate, ZeroDegreesIsIdentity) {
  Rng rng(4);
  const Image img = random_image(7, 5, rng);
  EXPECT_EQ(augment_rotate(img, 0.0), img);
}

TEST(Rotate, FourQuarterTurnsIsIdentity) {
  Rng rng(5);
  const Image img = random_image(6, 6, rng);
  Image out = img;
  for (int i = 0; i < 4; ++i) out = augment_rotate(out, 90.0);
  EXPECT_EQ(out, img);
  EXPECT_NE(augment_rotate(img, 90.0), img);
}

TEST(Rotate, QuarterTurnIsCounterClockwise) {
  Image img = Image::filled(3, 3, 0.0f);
  img.at(0, 0, 2) = 1.0f;  // top-right corner
  const Image out = augment_rotate(img, 90.0);
  EXPECT_EQ(out.at(0, 0, 0), 1.0f);  // moves to top-left
}

TEST(Rotate, SmoothDiskIsNearlyInvariant) {
  const Image disk = smooth_disk(64);
  for (double angle : {2.0, -7.5, 17.0, 30.0, -30.0}) {
    const Image out = augment_rotate(disk, angle);
    EXPECT_LT(max_abs_diff(out, disk), 2.0f / 255.0f) << angle;
  }
}

TEST(Rotate, SampledAnglesAvoidDeadZone) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double a = std::abs(sample_rotation(rng));
    EXPECT_GE(a, 2.0);
    EXPECT_LE(a, 30.0);
  }
}

TEST(Augment, EveryOpKeepsDimensionsAndRange) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = random_image(5 + rng() % 20, 5 + rng() % 20, rng);
    std::vector<Image> outs{augment_brightness(img, sample_brightness(rng)),
                            augment_rotate(img, sample_rotation(rng)), augment_combination(img, rng())};
    const auto [fraction, anchor] = sample_crop(rng);
    outs.push_back(augment_crop(img, fraction, anchor));
    for (const Image& out : outs) {
      EXPECT_EQ(out.width, img.width);
      EXPECT_EQ(out.height, img.height);
      EXPECT_TRUE(in_unit_range(out));
    }
  }
}

TEST(Combination, DeterministicSubsetSizes) {
  Rng rng(8);
  const Image img = random_image(16, 16, rng);
  std::set<std::size_t> sizes;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const CombinationPlan plan = plan_combination(seed);
    EXPECT_GE(plan.size(), 1u);
    EXPECT_LE(plan.size(), 3u);
    sizes.insert(plan.size());
  }
  EXPECT_EQ(sizes.size(), 3u);
  EXPECT_EQ(augment_combination(img, 99), augment_combination(img, 99));
}

TEST(Combination, FlipOnlyPlanEqualsFlip) {
  Rng rng(9);
  const Image img = random_image(9, 7, rng);
  CombinationPlan plan;
  plan.flip = FlipAxis::kVertical;
  EXPECT_EQ(apply_combination(img, plan), augment_flip(img, FlipAxis::kVertical));
  // Find a drawn plan that consists of a flip alone.
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const CombinationPlan p = plan_combination(seed);
    if (p.size() == 1 && p.flip) {
      EXPECT_EQ(augment_combination(img, seed), augment_flip(img, *p.flip));
      return;
    }
  }
  FAIL() << "no flip-only plan in 500 seeds";
}

TEST(Augmentation, NamesRoundTrip) {
  for (AugmentationKind k : kAllAugmentations) EXPECT_EQ(parse_augmentation(augmentation_name(k)), k);
  EXPECT_FALSE(parse_augmentation("original"));
  EXPECT_FALSE(parse_augmentation("blur"));
}
