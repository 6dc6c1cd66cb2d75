#include "leafkit/metrics.h"

#include <cmath>
#include <numeric>

#include "json.hpp"

#include "leafkit/error.h"

namespace leafkit {

ConfusionMatrix ConfusionMatrix::zeros(std::size_t k) {
  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) cm.class_names.push_back("class" + std::to_string(i));
  return cm;
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm = zeros(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != rows.size()) throw ShapeError("confusion matrix must be square");
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (rows[t][p] < 0) throw ContractError("confusion counts must be non-negative");
      cm.at(t, p) = rows[t][p];
    }
  }
  return cm;
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < k; ++i) s += at(i, i);
  return s;
}

std::int64_t ConfusionMatrix::support(std::size_t cls) const {
  std::int64_t s = 0;
  for (std::size_t p = 0; p < k; ++p) s += at(cls, p);
  return s;
}

std::int64_t ConfusionMatrix::predicted(std::size_t cls) const {
  std::int64_t s = 0;
  for (std::size_t t = 0; t < k; ++t) s += at(t, cls);
  return s;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t k) {
  if (truth.size() != predicted.size()) {
    throw ShapeError("label lists differ in length: " + std::to_string(truth.size()) + " vs " +
                     std::to_string(predicted.size()));
  }
  ConfusionMatrix cm = ConfusionMatrix::zeros(k);
  const auto kk = static_cast<int>(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kk || predicted[i] < 0 || predicted[i] >= kk) {
      throw LabelError("label out of range at index " + std::to_string(i));
    }
    ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& cm) {
  std::vector<ClassScores> out(cm.k);
  for (std::size_t c = 0; c < cm.k; ++c) {
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto pred = static_cast<double>(cm.predicted(c));
    const auto sup = static_cast<double>(cm.support(c));
    ClassScores& s = out[c];
    if (pred > 0) s.precision = tp / pred; else s.degenerate = true;
    if (sup > 0) s.recall = tp / sup; else s.degenerate = true;
    if (s.precision + s.recall > 0) {
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    } else {
      s.degenerate = true;
    }
  }
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  return n == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(n);
}

double weighted_f1(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) return 0.0;
  const auto scores = per_class_prf(cm);
  double acc = 0.0;
  for (std::size_t c = 0; c < cm.k; ++c) acc += scores[c].f1 * static_cast<double>(cm.support(c));
  return acc / static_cast<double>(n);
}

ScalarScore mcc_binary(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn) {
  // Products can exceed 2^63 for large counts, so the denominator is formed in
  // long double; the numerator terms stay exact integers.
  const long double num = static_cast<long double>(tp * tn) - static_cast<long double>(fp * fn);
  const long double den = static_cast<long double>(tp + fp) * static_cast<long double>(tp + fn) *
                          static_cast<long double>(tn + fp) * static_cast<long double>(tn + fn);
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num / std::sqrt(den)), false};
}

ScalarScore mcc_multiclass(const ConfusionMatrix& cm) {
  const auto s = static_cast<long double>(cm.total());
  const auto c = static_cast<long double>(cm.trace());
  long double pt = 0, pp = 0, tt = 0;
  for (std::size_t i = 0; i < cm.k; ++i) {
    const auto p = static_cast<long double>(cm.predicted(i));
    const auto t = static_cast<long double>(cm.support(i));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const long double den = (s * s - pp) * (s * s - tt);
  if (den <= 0) return {0.0, true};
  return {static_cast<double>((c * s - pt) / std::sqrt(den)), false};
}

double percent2(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

std::string metrics_report_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json j;
  j["classes"] = cm.class_names;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < cm.k; ++t) {
    std::vector<std::int64_t> row(cm.counts.begin() + static_cast<std::ptrdiff_t>(t * cm.k),
                                  cm.counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * cm.k));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  j["samples"] = cm.total();
  const auto scores = per_class_prf(cm);
  nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < cm.k; ++c) {
    nlohmann::ordered_json e;
    e["class"] = cm.class_names[c];
    e["support"] = cm.support(c);
    e["precision"] = percent2(scores[c].precision);
    e["recall"] = percent2(scores[c].recall);
    e["f1"] = percent2(scores[c].f1);
    if (scores[c].degenerate) e["degenerate"] = true;
    per_class.push_back(e);
  }
  j["per_class"] = per_class;
  j["accuracy"] = percent2(accuracy(cm));
  j["weighted_f1"] = percent2(weighted_f1(cm));
  const ScalarScore mcc = mcc_multiclass(cm);
  j["mcc"] = percent2(mcc.value);
  if (mcc.degenerate) j["mcc_degenerate"] = true;
  return j.dump(2) + "\n";
}

}  // namespace leafkit
