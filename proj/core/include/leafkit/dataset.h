#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leafkit/augment.h"
#include "leafkit/image.h"

namespace leafkit {

enum class Label : int { kAngularLeafSpot = 0, kBeanRust = 1, kHealthy = 2 };
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"angular_leaf_spot", "bean_rust",
                                                                          "healthy"};

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view name);

enum class Split { kTrain, kVal, kTest };
std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

// Where a sample came from. Augmented samples remember the technique and the
// id ("<label>/<file name>") of the original they were derived from.
struct Origin {
  bool augmented = false;
  AugmentationKind kind = AugmentationKind::kBrightness;
  std::string source_id;

  std::string to_string() const;  // "original" | "augmented:<kind>:<source_id>"
  static Origin parse(std::string_view text);
  bool operator==(const Origin&) const = default;
};

struct Sample {
  std::filesystem::path path;
  Label label = Label::kHealthy;
  Split split = Split::kTrain;
  Origin origin;
  std::uint64_t seed = 0;  // per-sample stream seed (augmented) or split seed (original)

  std::string id() const;  // "<label>/<file name>"
  bool operator==(const Sample&) const = default;
};

struct SplitCounts {
  std::array<std::array<std::size_t, kNumClasses>, 3> by_split{};

  std::size_t total(Split s) const;
  std::size_t of(Split s, Label l) const;
};

struct DatasetManifest {
  std::vector<Sample> records;
  std::uint64_t seed = 0;
  std::vector<std::string> skipped;  // unreadable inputs seen while scanning

  SplitCounts counts() const;
  std::vector<Sample> split(Split s) const;

  // Line format: path \t label \t split \t origin \t seed, preceded by a
  // "#seed\t<seed>" comment line.
  void write(const std::filesystem::path& file) const;
  static DatasetManifest read(const std::filesystem::path& file);

  bool operator==(const DatasetManifest&) const = default;
};

// Per-class allocation for a stratified 70/15/15 split of `n` images:
// train = floor(0.7 n); the rest is halved between val and test, and classes
// with an odd remainder alternate (starting with test) in which split gets the
// extra image. `odd_index` counts odd-remainder classes seen so far.
struct SplitAllocation {
  std::size_t train = 0, val = 0, test = 0;
};
SplitAllocation allocate_split(std::size_t n, std::size_t& odd_index);

// Scans root for the three class directories (either directly or one level
// down, e.g. train/validation/test folders which are pooled) and produces a
// seeded stratified split. Missing classes raise DatasetError; undecodable
// files are recorded in `skipped`.
DatasetManifest load_and_split(const std::filesystem::path& root, std::uint64_t seed);

// Materializes one augmented training set under out_dir/<kind>/: every
// original training image is copied and two augmented PNG variants are
// written next to it, so the set has 3x the original training count with the
// same class proportions. Validation and test records are passed through.
DatasetManifest build_augmented_set(const DatasetManifest& manifest, AugmentationKind kind, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

// Pixel statistics over the augmented images written for one set.
struct AugmentStats {
  std::size_t images = 0;
  double mean = 0.0;
  double variance = 0.0;
};

DatasetManifest build_augmented_set(const DatasetManifest& manifest, AugmentationKind kind, std::uint64_t seed,
                                    const std::filesystem::path& out_dir, AugmentStats* stats);

// One augmented variant with parameters drawn from a stream seeded by
// sample_seed. Flip uses the variant index for the axis (0 horizontal,
// 1 vertical) so the two flipped copies differ.
Image augment_variant(const Image& img, AugmentationKind kind, int variant, std::uint64_t sample_seed);

}  // namespace leafkit
