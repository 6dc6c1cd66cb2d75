#include "leafkit/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "leafkit/error.h"
#include "leafkit/ops.h"
#include "leafkit/rng.h"

namespace leafkit {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (resolution == 0) throw ConfigError("resolution must be positive");
}

AdamState AdamState::for_parameters(std::span<const NamedParameter> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0f);
    s.v.emplace_back(p.tensor.numel(), 0.0f);
  }
  return s;
}

void adam_step(std::span<const NamedParameter> params, AdamState& state, double lr, const AdamConfig& adam) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i].tensor;
    if (state.m[i].size() != p.numel() || state.v[i].size() != p.numel()) {
      throw ShapeError("adam state shape mismatch for " + params[i].name);
    }
    if (!p.has_grad()) continue;
    for (float g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + params[i].name);
    }
  }

  ++state.t;
  const double b1 = adam.beta1, b2 = adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    auto w = p.data();
    const bool has = p.has_grad();
    std::span<const float> g = has ? p.grad() : std::span<const float>{};
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] : 0.0;
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double m_hat = mj / c1;
      const double v_hat = vj / c2;
      w[j] = static_cast<float>(w[j] - lr * m_hat / (std::sqrt(v_hat) + adam.epsilon));
    }
  }
}

// ---- image sets ----

Tensor ImageSet::batch(std::span<const std::size_t> indices) const {
  const std::size_t n = image_values();
  std::vector<float> values(indices.size() * n);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::uint8_t* src = pixels.data() + indices[b] * n;
    float* dst = values.data() + b * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  }
  return Tensor::from({indices.size(), 3, resolution, resolution}, std::move(values));
}

std::vector<int> ImageSet::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

void ImageSet::append(const Image& image, int label) {
  if (image.width != resolution || image.height != resolution) {
    throw ShapeError("image set holds " + std::to_string(resolution) + "px images, got " +
                     std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  for (float v : image.pixels) pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  labels.push_back(label);
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

}  // namespace

ImageSet load_image_set(std::span<const Sample> samples, std::size_t resolution,
                        const std::optional<std::filesystem::path>& cache_dir) {
  ImageSet set;
  set.resolution = resolution;
  set.pixels.reserve(samples.size() * set.image_values());
  const std::size_t n = set.image_values();
  for (const auto& s : samples) {
    const int label = static_cast<int>(s.label);
    std::filesystem::path cached;
    if (cache_dir) {
      const std::string bytes = read_file(s.path);
      const std::uint64_t key = derive_seed(fnv1a64(bytes), "r" + std::to_string(resolution));
      cached = *cache_dir / (hex64(key) + ".u8");
      if (std::filesystem::exists(cached)) {
        const std::string raw = read_file(cached);
        if (raw.size() == n) {
          set.pixels.insert(set.pixels.end(), raw.begin(), raw.end());
          set.labels.push_back(label);
          continue;
        }
      }
    }
    set.append(resize_bilinear(load_image(s.path), resolution, resolution), label);
    if (cache_dir) {
      std::filesystem::create_directories(*cache_dir);
      const auto tmp = cached.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(set.pixels.data() + set.pixels.size() - n),
                  static_cast<std::streamsize>(n));
      }
      std::filesystem::rename(tmp, cached);
    }
  }
  return set;
}

// ---- training loop ----

int argmax_row(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return static_cast<int>(best);
}

Evaluation evaluate(const Model& model, const ImageSet& set, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  NoGradGuard no_grad;
  Evaluation ev;
  ev.labels = set.labels;
  ev.predictions.reserve(set.size());
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    const auto labels = set.batch_labels(idx);
    const Tensor logits = model.forward(set.batch(idx));
    loss_sum += static_cast<double>(ops::softmax_cross_entropy(logits, labels).item()) * static_cast<double>(idx.size());
    const std::size_t k = logits.dim(1);
    const auto data = logits.data();
    for (std::size_t b = 0; b < idx.size(); ++b) ev.predictions.push_back(argmax_row(data.subspan(b * k, k)));
  }
  ev.loss = set.size() ? loss_sum / static_cast<double>(set.size()) : 0.0;
  return ev;
}

namespace {

double accuracy_of(const Evaluation& ev) {
  if (ev.labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ev.labels.size(); ++i) hits += ev.labels[i] == ev.predictions[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ev.labels.size());
}

}  // namespace

TrainResult train(const TrainingConfig& config, const ModelSpec& spec, const ImageSet& train_set,
                  const ImageSet& val_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  if (val_set.size() == 0) throw ConfigError("validation set is empty");
  if (train_set.resolution != spec.height || train_set.resolution != spec.width) {
    throw ConfigError("images are " + std::to_string(train_set.resolution) + "px but the model expects " +
                      std::to_string(spec.height) + "x" + std::to_string(spec.width));
  }

  Model model = Model::build(spec, derive_seed(config.seed, "init"));
  AdamState adam = AdamState::for_parameters(model.parameters());
  History history;
  history.config = config;
  std::vector<float> best_weights = model.flat_weights();

  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> idx;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto labels = train_set.batch_labels(idx);
      model.zero_grad();
      const Tensor logits = model.forward(train_set.batch(idx));
      const Tensor loss = ops::softmax_cross_entropy(logits, labels);
      const double l = loss.item();
      if (!std::isfinite(l)) throw NumericError("loss became non-finite in epoch " + std::to_string(epoch));
      loss.backward();
      adam_step(model.parameters(), adam, config.learning_rate, config.adam);

      loss_sum += l * static_cast<double>(idx.size());
      const std::size_t k = logits.dim(1);
      const auto data = logits.data();
      for (std::size_t b = 0; b < idx.size(); ++b) hits += argmax_row(data.subspan(b * k, k)) == labels[b] ? 1 : 0;
    }

    const Evaluation val = evaluate(model, val_set, config.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(hits) / static_cast<double>(order.size());
    rec.val_loss = val.loss;
    rec.val_acc = accuracy_of(val);
    history.epochs.push_back(rec);
    if (history.best_epoch == 0 || rec.val_acc > history.best_val_acc) {
      history.best_epoch = epoch;
      history.best_val_acc = rec.val_acc;
      best_weights = model.flat_weights();
    }
    if (on_epoch) on_epoch(rec);
  }
  model.zero_grad();
  model.load_flat_weights(best_weights);
  return TrainResult{std::move(model), std::move(history)};
}

namespace {

nlohmann::ordered_json config_object(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["architecture"] = std::string(architecture_name(c.architecture));
  j["training_set"] = c.training_set;
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = {{"name", "adam"}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}};
  j["resolution"] = c.resolution;
  return j;
}

}  // namespace

std::string config_json(const TrainingConfig& config) { return config_object(config).dump(); }

std::string History::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config_object(config);
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["train_acc"] = e.train_acc;
    r["val_loss"] = e.val_loss;
    r["val_acc"] = e.val_acc;
    j["epochs"].push_back(r);
  }
  j["best_epoch"] = best_epoch;
  j["best_val_acc"] = best_val_acc;
  return j.dump(2) + "\n";
}

}  // namespace leafkit
