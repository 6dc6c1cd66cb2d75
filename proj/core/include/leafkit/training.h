#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leafkit/dataset.h"
#include "leafkit/model.h"

namespace leafkit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  int epochs = 40;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  Architecture architecture = Architecture::kBaselineCnn;
  std::string training_set = "original";
  std::size_t resolution = 128;

  // Throws ConfigError for non-positive lr / epochs / batch size.
  void validate() const;
};

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t t = 0;

  static AdamState for_parameters(std::span<const NamedParameter> params);
};

// One bias-corrected Adam update over every parameter. Parameters that never
// received a gradient are treated as having a zero gradient. All gradients
// are checked before anything is written, so a non-finite gradient leaves the
// parameters and state untouched.
void adam_step(std::span<const NamedParameter> params, AdamState& state, double lr, const AdamConfig& adam = {});

// Images decoded once, resized to resolution x resolution and held as 8-bit
// planar RGB; batches are expanded to f32 in [0,1] on demand.
struct ImageSet {
  std::size_t resolution = 0;
  std::vector<std::uint8_t> pixels;  // n * 3 * r * r
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_values() const { return 3 * resolution * resolution; }
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  void append(const Image& image, int label);
};

// Loads and resizes every sample. When cache_dir is set, decoded pixels are
// stored there keyed by a hash of the file contents and the resolution.
ImageSet load_image_set(std::span<const Sample> samples, std::size_t resolution,
                        const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct History {
  TrainingConfig config;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_acc = 0.0;

  std::string to_json() const;
};

struct TrainResult {
  Model model;  // weights from the best validation epoch
  History history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const TrainingConfig& config, const ModelSpec& spec, const ImageSet& train_set,
                  const ImageSet& val_set, const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  std::vector<int> predictions;
  std::vector<int> labels;
};

// No-gradient pass; argmax ties go to the lowest class index.
Evaluation evaluate(const Model& model, const ImageSet& set, std::size_t batch_size = 32);

int argmax_row(std::span<const float> row);

std::string config_json(const TrainingConfig& config);

}  // namespace leafkit
