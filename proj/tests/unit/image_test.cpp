#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.h"
#include "leafkit/error.h"
#include "leafkit/image.h"

using namespace leafkit;
using fixtures::TempDir;

namespace {

Image gradient_image(std::size_t w, std::size_t h) {
  Image img = Image::filled(w, h, 0.0f);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        img.at(c, y, x) = static_cast<float>((x * 7 + y * 13 + c * 50) % 256) / 255.0f;
  return img;
}

}  // namespace

TEST(Image, PngRoundTripKeeps8BitLevels) {
  TempDir dir("image");
  const Image img = gradient_image(9, 5);
  save_png(img, dir / "a.png");
  const Image back = load_image(dir / "a.png");
  EXPECT_EQ(back, quantize8(img));
  EXPECT_EQ(back, img);  // already on the 8-bit grid
  const auto size = probe_image(dir / "a.png");
  ASSERT_TRUE(size);
  EXPECT_EQ(size->first, 9u);
  EXPECT_EQ(size->second, 5u);
}

TEST(Image, SaveClampsOutOfRangeValues) {
  TempDir dir("image");
  Image img = Image::filled(2, 1, 0.5f);
  img.at(0, 0, 0) = 1.7f;
  img.at(1, 0, 1) = -0.3f;
  save_png(img, dir / "c.png");
  const Image back = load_image(dir / "c.png");
  EXPECT_EQ(back.at(0, 0, 0), 1.0f);
  EXPECT_EQ(back.at(1, 0, 1), 0.0f);
}

TEST(Image, UndecodableFilesAreReported) {
  TempDir dir("image");
  {
    std::ofstream(dir / "junk.png") << "definitely not a png";
  }
  EXPECT_FALSE(probe_image(dir / "junk.png"));
  EXPECT_THROW(load_image(dir / "junk.png"), Error);
  EXPECT_THROW(load_image(dir / "missing.png"), IoError);
}

TEST(Resize, SameSizeIsExact) {
  const Image img = gradient_image(7, 6);
  EXPECT_EQ(resize_bilinear(img, 7, 6), img);
}

TEST(Resize, ConstantStaysConstant) {
  const Image img = Image::filled(13, 9, 0.42f);
  const Image out = resize_bilinear(img, 5, 17);
  EXPECT_EQ(out.width, 5u);
  EXPECT_EQ(out.height, 17u);
  for (float v : out.pixels) EXPECT_NEAR(v, 0.42f, 1e-6);
}

TEST(Resize, HorizontalRampDownsamplesToCellCentres) {
  // Value equals the column index; a 2x downsample samples at pixel-centre
  // aligned positions 0.5, 2.5, ... which bilinear reads as their average.
  Image img = Image::filled(8, 1, 0.0f);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t x = 0; x < 8; ++x) img.at(c, 0, x) = static_cast<float>(x);
  const Image out = resize_bilinear(img, 4, 1);
  for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(out.at(0, 0, x), 2.0 * x + 0.5, 1e-6);
}

TEST(Image, TensorViewIsPlanar) {
  const Image img = gradient_image(3, 2);
  const Tensor t = image_to_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 2, 3}));
  EXPECT_TRUE(std::equal(img.pixels.begin(), img.pixels.end(), t.data().begin()));
}
