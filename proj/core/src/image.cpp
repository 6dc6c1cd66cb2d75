#include "leafkit/image.h"

#include <png.h>
#include <stdio.h>
// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>

#include "leafkit/error.h"

namespace leafkit {

namespace {

enum class FileKind { kPng, kJpeg, kUnknown };

FileKind sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  if (in.gcount() >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) return FileKind::kPng;
  if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return FileKind::kJpeg;
  return FileKind::kUnknown;
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

Image from_interleaved(const std::vector<unsigned char>& rgb, std::size_t width, std::size_t height) {
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.resize(kImageChannels * width * height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < kImageChannels; ++c)
        img.at(c, y, x) = static_cast<float>(rgb[(y * width + x) * kImageChannels + c]) / 255.0f;
  return img;
}

// ---- PNG ----

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

Image read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!g.png) throw IoError("libpng initialization failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw IoError("libpng initialization failed");
  std::vector<unsigned char> rgb;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  if (setjmp(png_jmpbuf(g.png))) throw FormatError("corrupt PNG " + path.string());
  png_init_io(g.png, f.get());
  png_read_info(g.png, g.info);
  width = png_get_image_width(g.png, g.info);
  height = png_get_image_height(g.png, g.info);
  const int color = png_get_color_type(g.png, g.info);
  const int depth = png_get_bit_depth(g.png, g.info);
  if (depth == 16) png_set_strip_16(g.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(g.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(g.png);
  if (png_get_valid(g.png, g.info, PNG_INFO_tRNS)) png_set_strip_alpha(g.png);
  png_read_update_info(g.png, g.info);
  if (png_get_rowbytes(g.png, g.info) != width * kImageChannels) throw FormatError("unsupported PNG layout " + path.string());
  rgb.resize(static_cast<std::size_t>(width) * height * kImageChannels);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * width * kImageChannels;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);
  return from_interleaved(rgb, width, height);
}

// ---- JPEG ----

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

struct JpegGuard {
  jpeg_decompress_struct cinfo{};
  bool created = false;
  ~JpegGuard() {
    if (created) jpeg_destroy_decompress(&cinfo);
  }
};

Image read_jpeg(const std::filesystem::path& path, bool header_only, std::size_t* out_w, std::size_t* out_h) {
  FilePtr f = open_file(path, "rb");
  JpegGuard g;
  JpegErrorManager err;
  g.cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_silent;
  std::vector<unsigned char> rgb;
  if (setjmp(err.jump)) throw FormatError("corrupt JPEG " + path.string() + ": " + err.message);
  jpeg_create_decompress(&g.cinfo);
  g.created = true;
  jpeg_stdio_src(&g.cinfo, f.get());
  jpeg_read_header(&g.cinfo, TRUE);
  if (header_only) {
    *out_w = g.cinfo.image_width;
    *out_h = g.cinfo.image_height;
    return {};
  }
  g.cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&g.cinfo);
  const std::size_t width = g.cinfo.output_width, height = g.cinfo.output_height;
  if (g.cinfo.output_components != 3) throw FormatError("unsupported JPEG components in " + path.string());
  rgb.resize(width * height * kImageChannels);
  while (g.cinfo.output_scanline < g.cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(g.cinfo.output_scanline) * width * kImageChannels;
    jpeg_read_scanlines(&g.cinfo, &row, 1);
  }
  jpeg_finish_decompress(&g.cinfo);
  return from_interleaved(rgb, width, height);
}

}  // namespace

Image Image::filled(std::size_t width, std::size_t height, float value) {
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.assign(kImageChannels * width * height, value);
  return img;
}

Image load_image(const std::filesystem::path& path) {
  switch (sniff(path)) {
    case FileKind::kPng: return read_png(path);
    case FileKind::kJpeg: {
      std::size_t w = 0, h = 0;
      return read_jpeg(path, false, &w, &h);
    }
    case FileKind::kUnknown: break;
  }
  throw FormatError("unrecognized image format: " + path.string());
}

std::optional<std::pair<std::size_t, std::size_t>> probe_image(const std::filesystem::path& path) {
  try {
    switch (sniff(path)) {
      case FileKind::kPng: {
        const Image img = read_png(path);
        return std::make_pair(img.width, img.height);
      }
      case FileKind::kJpeg: {
        std::size_t w = 0, h = 0;
        read_jpeg(path, true, &w, &h);
        if (w == 0 || h == 0) return std::nullopt;
        return std::make_pair(w, h);
      }
      case FileKind::kUnknown: break;
    }
  } catch (const Error&) {
  }
  return std::nullopt;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  if (image.width == 0 || image.height == 0) throw IoError("cannot write an empty image");
  std::vector<unsigned char> rgb(image.width * image.height * kImageChannels);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < kImageChannels; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        rgb[(y * image.width + x) * kImageChannels + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(image.height);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = rgb.data() + y * image.width * kImageChannels;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

float sample_bilinear(const Image& image, std::size_t c, double y, double x) {
  const double maxx = static_cast<double>(image.width - 1);
  const double maxy = static_cast<double>(image.height - 1);
  x = std::clamp(x, 0.0, maxx);
  y = std::clamp(y, 0.0, maxy);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, image.width - 1);
  const std::size_t y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  if (fx == 0.0 && fy == 0.0) return image.at(c, y0, x0);
  const double top = image.at(c, y0, x0) * (1.0 - fx) + image.at(c, y0, x1) * fx;
  const double bottom = image.at(c, y1, x0) * (1.0 - fx) + image.at(c, y1, x1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

Image resize_bilinear(const Image& image, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ParameterError("resize target must be non-empty");
  if (width == image.width && height == image.height) return image;
  Image out = Image::filled(width, height, 0.0f);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  for (std::size_t c = 0; c < kImageChannels; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        out.at(c, y, x) = sample_bilinear(image, c, (static_cast<double>(y) + 0.5) * sy - 0.5,
                                          (static_cast<double>(x) + 0.5) * sx - 0.5);
  return out;
}

Image quantize8(Image image) {
  for (float& v : image.pixels) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return image;
}

Tensor image_to_tensor(const Image& image) {
  return Tensor::from({1, kImageChannels, image.height, image.width}, image.pixels);
}

}  // namespace leafkit
