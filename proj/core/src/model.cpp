#include "leafkit/model.h"

#include <set>

#include "json.hpp"
#include "leafkit/error.h"

namespace leafkit {

namespace {

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string_view activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "none"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "none") return Activation::kNone;
  throw FormatError("unknown activation '" + s + "'");
}

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

json layer_to_json(const LayerConfig& layer) {
  json j;
  j["name"] = layer.name;
  std::visit(overloaded{
                 [&](const Conv2DConfig& c) {
                   j["kind"] = "conv2d";
                   j["filters"] = c.filters;
                   j["kernel"] = c.kernel;
                   j["stride"] = c.stride;
                   j["padding"] = c.padding;
                   j["activation"] = activation_name(c.activation);
                 },
                 [&](const MaxPoolConfig& c) {
                   j["kind"] = "maxpool2d";
                   j["window"] = c.window;
                   j["stride"] = c.stride;
                 },
                 [&](const FlattenConfig&) { j["kind"] = "flatten"; },
                 [&](const DenseConfig& c) {
                   j["kind"] = "dense";
                   j["units"] = c.units;
                   j["activation"] = activation_name(c.activation);
                 },
                 [&](const SequenceReshapeConfig&) { j["kind"] = "sequence_reshape"; },
                 [&](const LstmConfig& c) {
                   j["kind"] = "lstm";
                   j["units"] = c.units;
                 },
                 [&](const GlobalAvgPoolConfig&) { j["kind"] = "global_avg_pool"; },
             },
             layer.params);
  return j;
}

LayerConfig layer_from_json(const json& j) {
  LayerConfig layer;
  layer.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "conv2d") {
    layer.params = Conv2DConfig{j.at("filters").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                                j.at("stride").get<std::size_t>(), j.at("padding").get<std::size_t>(),
                                parse_activation(j.at("activation").get<std::string>())};
  } else if (kind == "maxpool2d") {
    layer.params = MaxPoolConfig{j.at("window").get<std::size_t>(), j.at("stride").get<std::size_t>()};
  } else if (kind == "flatten") {
    layer.params = FlattenConfig{};
  } else if (kind == "dense") {
    layer.params =
        DenseConfig{j.at("units").get<std::size_t>(), parse_activation(j.at("activation").get<std::string>())};
  } else if (kind == "sequence_reshape") {
    layer.params = SequenceReshapeConfig{};
  } else if (kind == "lstm") {
    layer.params = LstmConfig{j.at("units").get<std::size_t>()};
  } else if (kind == "global_avg_pool") {
    layer.params = GlobalAvgPoolConfig{};
  } else {
    throw FormatError("unknown layer kind '" + kind + "'");
  }
  return layer;
}

std::vector<LayerConfig> conv_trunk() {
  return {
      {"conv1", Conv2DConfig{32, 3, 1, 1, Activation::kRelu}},
      {"pool1", MaxPoolConfig{2, 2}},
      {"conv2", Conv2DConfig{32, 3, 1, 1, Activation::kRelu}},
      {"pool2", MaxPoolConfig{2, 2}},
      {"conv3", Conv2DConfig{64, 3, 1, 1, Activation::kRelu}},
      {"conv4", Conv2DConfig{64, 3, 2, 1, Activation::kRelu}},
      {"conv5", Conv2DConfig{64, 3, 1, 1, Activation::kRelu}},
  };
}

}  // namespace

std::string_view architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::kBaselineCnn: return "cnn";
    case Architecture::kHybridCnnLstm: return "cnn-lstm";
    case Architecture::kCustom: return "custom";
  }
  return "custom";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "cnn") return Architecture::kBaselineCnn;
  if (name == "cnn-lstm") return Architecture::kHybridCnnLstm;
  if (name == "custom") return Architecture::kCustom;
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected cnn or cnn-lstm)");
}

std::vector<Shape> ModelSpec::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ConfigError("input dimensions must be positive");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (layers.empty()) throw ConfigError("model has no layers");

  std::set<std::string> names;
  std::vector<Shape> shapes;
  Shape cur{1, channels, height, width};
  for (const auto& layer : layers) {
    if (layer.name.empty() || !names.insert(layer.name).second) {
      throw ConfigError("layer names must be unique and non-empty ('" + layer.name + "')");
    }
    auto fail = [&](const std::string& why) {
      throw ConfigError("layer '" + layer.name + "' cannot accept " + shape_to_string(cur) + ": " + why);
    };
    std::visit(overloaded{
                   [&](const Conv2DConfig& c) {
                     if (cur.size() != 4) fail("expects an image tensor");
                     if (c.filters == 0 || c.kernel == 0 || c.stride == 0) fail("zero-sized conv parameter");
                     if (c.kernel > cur[2] + 2 * c.padding || c.kernel > cur[3] + 2 * c.padding) {
                       fail("kernel larger than padded input");
                     }
                     cur = {1, c.filters, conv_out(cur[2], c.kernel, c.stride, c.padding),
                            conv_out(cur[3], c.kernel, c.stride, c.padding)};
                   },
                   [&](const MaxPoolConfig& c) {
                     if (cur.size() != 4) fail("expects an image tensor");
                     if (c.window == 0 || c.stride == 0) fail("zero-sized pooling parameter");
                     if (c.window > cur[2] || c.window > cur[3]) fail("window larger than input");
                     cur = {1, cur[1], (cur[2] - c.window) / c.stride + 1, (cur[3] - c.window) / c.stride + 1};
                   },
                   [&](const FlattenConfig&) {
                     if (cur.size() < 2) fail("nothing to flatten");
                     cur = {1, shape_numel(cur)};
                   },
                   [&](const DenseConfig& c) {
                     if (cur.size() != 2) fail("expects a flat feature vector");
                     if (c.units == 0) fail("zero units");
                     cur = {1, c.units};
                   },
                   [&](const SequenceReshapeConfig&) {
                     if (cur.size() != 4) fail("expects an image tensor");
                     cur = {1, cur[2], cur[3] * cur[1]};
                   },
                   [&](const LstmConfig& c) {
                     if (cur.size() != 3) fail("expects a sequence");
                     if (c.units == 0) fail("zero units");
                     cur = {1, c.units};
                   },
                   [&](const GlobalAvgPoolConfig&) {
                     if (cur.size() != 4) fail("expects an image tensor");
                     cur = {1, cur[1]};
                   },
               },
               layer.params);
    shapes.push_back(cur);
  }
  if (cur.size() != 2 || cur[1] != num_classes) {
    throw ConfigError("final layer emits " + shape_to_string(cur) + ", expected " + std::to_string(num_classes) +
                      " logits");
  }
  return shapes;
}

std::string ModelSpec::to_json() const {
  json j;
  j["architecture"] = architecture_name(architecture);
  j["input"] = {{"channels", channels}, {"height", height}, {"width", width}};
  j["num_classes"] = num_classes;
  j["layers"] = json::array();
  for (const auto& layer : layers) j["layers"].push_back(layer_to_json(layer));
  return j.dump();
}

ModelSpec ModelSpec::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ModelSpec spec;
    spec.architecture = parse_architecture(j.at("architecture").get<std::string>());
    spec.channels = j.at("input").at("channels").get<std::size_t>();
    spec.height = j.at("input").at("height").get<std::size_t>();
    spec.width = j.at("input").at("width").get<std::size_t>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model spec: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model spec: ") + e.what());
  }
}

ModelSpec baseline_cnn_spec(std::size_t resolution) {
  ModelSpec spec;
  spec.architecture = Architecture::kBaselineCnn;
  spec.height = spec.width = resolution;
  spec.layers = conv_trunk();
  spec.layers.push_back({"flatten", FlattenConfig{}});
  spec.layers.push_back({"dense1", DenseConfig{64, Activation::kRelu}});
  spec.layers.push_back({"dense2", DenseConfig{8, Activation::kRelu}});
  spec.layers.push_back({"logits", DenseConfig{3, Activation::kNone}});
  return spec;
}

ModelSpec hybrid_cnn_lstm_spec(std::size_t resolution) {
  ModelSpec spec;
  spec.architecture = Architecture::kHybridCnnLstm;
  spec.height = spec.width = resolution;
  spec.layers = conv_trunk();
  spec.layers.push_back({"sequence", SequenceReshapeConfig{}});
  spec.layers.push_back({"lstm", LstmConfig{64}});
  spec.layers.push_back({"dense1", DenseConfig{16, Activation::kRelu}});
  spec.layers.push_back({"logits", DenseConfig{3, Activation::kNone}});
  return spec;
}

ModelSpec spec_for(Architecture arch, std::size_t resolution) {
  switch (arch) {
    case Architecture::kBaselineCnn: return baseline_cnn_spec(resolution);
    case Architecture::kHybridCnnLstm: return hybrid_cnn_lstm_spec(resolution);
    case Architecture::kCustom: break;
  }
  throw ConfigError("no builder for custom architectures");
}

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec_ = spec;
  m.shapes_ = spec.validate();
  Rng rng(seed);
  Shape in{1, spec.channels, spec.height, spec.width};
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& layer = spec.layers[li];
    LayerState state = std::visit(
        overloaded{
            [&](const Conv2DConfig& c) -> LayerState {
              return Conv2DParams::create(in[1], c.filters, c.kernel, c.stride, c.padding, rng);
            },
            [&](const DenseConfig& c) -> LayerState { return DenseParams::create(in[1], c.units, rng); },
            [&](const LstmConfig& c) -> LayerState { return LSTMParams::create(in[2], c.units, rng); },
            [&](const auto&) -> LayerState { return std::monostate{}; },
        },
        layer.params);
    m.states_.push_back(std::move(state));
    in = m.shapes_[li];
  }
  m.collect_parameters();
  return m;
}

Model Model::from_weights(const ModelSpec& spec, std::span<const float> weights) {
  Model m = build(spec, 0);
  m.load_flat_weights(weights);
  return m;
}

void Model::collect_parameters() {
  params_.clear();
  for (std::size_t li = 0; li < states_.size(); ++li) {
    const std::string& name = spec_.layers[li].name;
    std::visit(overloaded{
                   [&](const Conv2DParams& p) {
                     params_.push_back({name + ".weight", p.weight});
                     params_.push_back({name + ".bias", p.bias});
                   },
                   [&](const DenseParams& p) {
                     params_.push_back({name + ".weight", p.weight});
                     params_.push_back({name + ".bias", p.bias});
                   },
                   [&](const LSTMParams& p) {
                     params_.push_back({name + ".w_f", p.w_f});
                     params_.push_back({name + ".w_i", p.w_i});
                     params_.push_back({name + ".w_c", p.w_c});
                     params_.push_back({name + ".w_o", p.w_o});
                     params_.push_back({name + ".b_f", p.b_f});
                     params_.push_back({name + ".b_i", p.b_i});
                     params_.push_back({name + ".b_c", p.b_c});
                     params_.push_back({name + ".b_o", p.b_o});
                   },
                   [&](const std::monostate&) {},
               },
               states_[li]);
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

std::vector<float> Model::flat_weights() const {
  std::vector<float> out;
  out.reserve(parameter_count());
  for (const auto& p : params_) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void Model::load_flat_weights(std::span<const float> weights) {
  if (weights.size() != parameter_count()) {
    throw FormatError("weight payload has " + std::to_string(weights.size()) + " values, model needs " +
                      std::to_string(parameter_count()));
  }
  std::size_t offset = 0;
  for (auto& p : params_) {
    auto dst = p.tensor.data();
    std::copy_n(weights.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
    offset += dst.size();
  }
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Model Model::clone() const { return from_weights(spec_, flat_weights()); }

std::optional<std::size_t> Model::layer_index(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].name == name) return i;
  }
  return std::nullopt;
}

Tensor Model::forward(const Tensor& x) const { return run(x, std::nullopt, nullptr); }

Tensor Model::forward(const Tensor& x, std::string_view tap_layer, Tensor& tapped) const {
  const auto idx = layer_index(tap_layer);
  if (!idx) throw ConfigError("no layer named '" + std::string(tap_layer) + "'");
  return run(x, idx, &tapped);
}

Tensor Model::run(const Tensor& x, std::optional<std::size_t> tap, Tensor* tapped) const {
  if (x.rank() != 4 || x.dim(1) != spec_.channels || x.dim(2) != spec_.height || x.dim(3) != spec_.width) {
    throw ShapeError("model input " + shape_to_string(x.shape()) + " does not match [B," +
                     std::to_string(spec_.channels) + "," + std::to_string(spec_.height) + "," +
                     std::to_string(spec_.width) + "]");
  }
  Tensor cur = x;
  for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
    const auto& params = spec_.layers[li].params;
    const auto& state = states_[li];
    cur = std::visit(overloaded{
                         [&](const Conv2DConfig& c) {
                           Tensor y = conv2d(cur, std::get<Conv2DParams>(state));
                           return c.activation == Activation::kRelu ? ops::relu(y) : y;
                         },
                         [&](const MaxPoolConfig& c) { return ops::maxpool2d(cur, c.window, c.stride); },
                         [&](const FlattenConfig&) { return ops::reshape(cur, {cur.dim(0), cur.numel() / cur.dim(0)}); },
                         [&](const DenseConfig& c) {
                           Tensor y = dense(cur, std::get<DenseParams>(state));
                           return c.activation == Activation::kRelu ? ops::relu(y) : y;
                         },
                         [&](const SequenceReshapeConfig&) { return ops::sequence_reshape(cur); },
                         [&](const LstmConfig&) { return lstm_forward(cur, std::get<LSTMParams>(state)); },
                         [&](const GlobalAvgPoolConfig&) { return ops::global_avg_pool(cur); },
                     },
                     params);
    if (tap && *tap == li) *tapped = cur;
  }
  return cur;
}

}  // namespace leafkit
