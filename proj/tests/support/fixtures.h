#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "leafkit/dataset.h"
#include "leafkit/model.h"
#include "leafkit/training.h"
#include "leafkit/rng.h"
#include "leafkit/tensor.h"

namespace leafkit::fixtures {

Tensor random_tensor(const Shape& shape, Rng& rng, float lo = -1.0f, float hi = 1.0f);

// sum(y * w): a scalar whose gradient w.r.t. y is w, so every output
// coordinate contributes with a distinct weight.
Tensor weighted_sum(const Tensor& y, const Tensor& w);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// A leaf-like image whose texture depends on the class: healthy leaves are
// plain green, rust adds orange pustules, angular leaf spot adds dark
// rectangular lesions.
Image synthetic_leaf(Label label, std::size_t size, Rng& rng);

// Writes root/<class>/<class>_<i>.png for every class.
void write_synthetic_dataset(const std::filesystem::path& root, std::size_t per_class, std::size_t size,
                             std::uint64_t seed);

// conv 4 -> pool -> flatten -> dense 3 on size x size input; small enough to
// train for hundreds of epochs inside a unit test.
ModelSpec tiny_spec(std::size_t size = 8);

// n synthetic leaves with labels cycling through the classes.
ImageSet synthetic_image_set(std::size_t n, std::size_t size, std::uint64_t seed);

std::string file_digest(const std::filesystem::path& file);
// Digest of every regular file below dir (relative path + contents), in
// sorted order.
std::string tree_digest(const std::filesystem::path& dir);
std::string read_file(const std::filesystem::path& file);

}  // namespace leafkit::fixtures
