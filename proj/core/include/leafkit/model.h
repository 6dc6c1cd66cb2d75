#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "leafkit/layers.h"

namespace leafkit {

enum class Architecture { kBaselineCnn, kHybridCnnLstm, kCustom };

std::string_view architecture_name(Architecture arch);  // "cnn", "cnn-lstm", "custom"
Architecture parse_architecture(std::string_view name);

enum class Activation { kNone, kRelu };

struct Conv2DConfig {
  std::size_t filters = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  Activation activation = Activation::kRelu;

  bool operator==(const Conv2DConfig&) const = default;
};

struct MaxPoolConfig {
  std::size_t window = 2;
  std::size_t stride = 2;

  bool operator==(const MaxPoolConfig&) const = default;
};

struct FlattenConfig {
  bool operator==(const FlattenConfig&) const = default;
};

struct DenseConfig {
  std::size_t units = 0;
  Activation activation = Activation::kRelu;

  bool operator==(const DenseConfig&) const = default;
};

struct SequenceReshapeConfig {
  bool operator==(const SequenceReshapeConfig&) const = default;
};

struct LstmConfig {
  std::size_t units = 0;

  bool operator==(const LstmConfig&) const = default;
};

struct GlobalAvgPoolConfig {
  bool operator==(const GlobalAvgPoolConfig&) const = default;
};

using LayerParams = std::variant<Conv2DConfig, MaxPoolConfig, FlattenConfig, DenseConfig, SequenceReshapeConfig,
                                 LstmConfig, GlobalAvgPoolConfig>;

struct LayerConfig {
  std::string name;
  LayerParams params;

  bool operator==(const LayerConfig&) const = default;
};

struct ModelSpec {
  Architecture architecture = Architecture::kCustom;
  std::size_t channels = 3;
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t num_classes = 3;
  std::vector<LayerConfig> layers;

  // Per-layer output shapes for a batch of one; throws ConfigError when the
  // chain breaks or the last layer does not emit num_classes logits.
  std::vector<Shape> validate() const;

  std::string to_json() const;  // canonical: sorted keys, no whitespace
  static ModelSpec from_json(std::string_view text);

  bool operator==(const ModelSpec&) const = default;
};

// Convolutional trunk shared by both architectures:
//   conv3x3x32 -> pool2 -> conv3x3x32 -> pool2 -> conv3x3x64 -> conv3x3x64/s2 -> conv3x3x64
// Baseline head: flatten -> dense 64 -> dense 8 -> dense 3.
// Hybrid head:   sequence_reshape -> LSTM 64 -> dense 16 -> dense 3.
ModelSpec baseline_cnn_spec(std::size_t resolution = 128);
ModelSpec hybrid_cnn_lstm_spec(std::size_t resolution = 128);
ModelSpec spec_for(Architecture arch, std::size_t resolution = 128);

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class Model {
 public:
  // Validates the spec and initializes weights deterministically from seed.
  static Model build(const ModelSpec& spec, std::uint64_t seed);

  // Builds the spec and overwrites every parameter from a flat buffer in
  // parameter order.
  static Model from_weights(const ModelSpec& spec, std::span<const float> weights);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Shape>& layer_shapes() const { return shapes_; }

  // x: [B, channels, height, width] -> logits [B, num_classes].
  Tensor forward(const Tensor& x) const;

  // Same as forward, also returning the output of the named layer.
  Tensor forward(const Tensor& x, std::string_view tap_layer, Tensor& tapped) const;

  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  std::vector<float> flat_weights() const;
  void load_flat_weights(std::span<const float> weights);
  void zero_grad();

  // Independent copy of the weights.
  Model clone() const;

  std::optional<std::size_t> layer_index(std::string_view name) const;

 private:
  using LayerState = std::variant<std::monostate, Conv2DParams, DenseParams, LSTMParams>;

  Model() = default;
  void collect_parameters();
  Tensor run(const Tensor& x, std::optional<std::size_t> tap, Tensor* tapped) const;

  ModelSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<LayerState> states_;
  std::vector<NamedParameter> params_;
};

// Alias matching the builder naming used across the tools.
inline Model build_model(const ModelSpec& spec, std::uint64_t seed) { return Model::build(spec, seed); }

}  // namespace leafkit
