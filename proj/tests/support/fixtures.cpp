#include "fixtures.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include "leafkit/ops.h"

namespace leafkit::fixtures {

namespace fs = std::filesystem;

Tensor random_tensor(const Shape& shape, Rng& rng, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = dist(rng);
  return Tensor::from(shape, std::move(v));
}

Tensor weighted_sum(const Tensor& y, const Tensor& w) { return ops::sum(ops::mul(y, w)); }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("leafkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Image synthetic_leaf(Label label, std::size_t size, Rng& rng) {
  std::uniform_real_distribution<float> jitter(-0.04f, 0.04f);
  std::uniform_int_distribution<std::size_t> pos(0, size - 1);
  Image img = Image::filled(size, size, 0.0f);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      img.at(0, y, x) = 0.20f + jitter(rng);
      img.at(1, y, x) = 0.55f + jitter(rng);
      img.at(2, y, x) = 0.18f + jitter(rng);
    }
  auto paint = [&](std::size_t cy, std::size_t cx, std::size_t r, float red, float green, float blue) {
    for (std::size_t y = cy >= r ? cy - r : 0; y <= std::min(size - 1, cy + r); ++y)
      for (std::size_t x = cx >= r ? cx - r : 0; x <= std::min(size - 1, cx + r); ++x) {
        img.at(0, y, x) = red;
        img.at(1, y, x) = green;
        img.at(2, y, x) = blue;
      }
  };
  const std::size_t spot = std::max<std::size_t>(1, size / 12);
  switch (label) {
    case Label::kAngularLeafSpot:
      for (int i = 0; i < 4; ++i) paint(pos(rng), pos(rng), spot + 1, 0.30f, 0.22f, 0.10f);
      break;
    case Label::kBeanRust:
      for (int i = 0; i < 10; ++i) paint(pos(rng), pos(rng), spot / 2, 0.85f, 0.45f, 0.10f);
      break;
    case Label::kHealthy: break;
  }
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

ModelSpec tiny_spec(std::size_t size) {
  ModelSpec spec;
  spec.height = spec.width = size;
  spec.layers = {{"conv1", Conv2DConfig{4}},
                 {"pool1", MaxPoolConfig{}},
                 {"flatten", FlattenConfig{}},
                 {"logits", DenseConfig{3, Activation::kNone}}};
  spec.validate();
  return spec;
}

ImageSet synthetic_image_set(std::size_t n, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  ImageSet set;
  set.resolution = size;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<Label>(i % kNumClasses);
    set.append(synthetic_leaf(label, size, rng), static_cast<int>(label));
  }
  return set;
}

void write_synthetic_dataset(const fs::path& root, std::size_t per_class, std::size_t size, std::uint64_t seed) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto label = static_cast<Label>(c);
    Rng rng(derive_seed(seed, std::string(label_name(label))));
    for (std::size_t i = 0; i < per_class; ++i) {
      save_png(synthetic_leaf(label, size, rng),
               root / label_name(label) / (std::string(label_name(label)) + "_" + std::to_string(i) + ".png"));
    }
  }
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_digest(const fs::path& file) {
  std::ostringstream os;
  os << std::hex << fnv1a64(read_file(file));
  return os.str();
}

std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& f : files) {
    h = fnv1a64(fs::relative(f, dir).generic_string(), h);
    h = fnv1a64(read_file(f), h);
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace leafkit::fixtures
