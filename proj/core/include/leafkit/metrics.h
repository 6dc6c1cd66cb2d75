#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace leafkit {

// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::int64_t> counts;  // k*k, row-major
  std::vector<std::string> class_names;

  static ConfusionMatrix zeros(std::size_t k);
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

  std::int64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * k + predicted]; }
  std::int64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * k + predicted]; }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t support(std::size_t cls) const;    // row sum
  std::int64_t predicted(std::size_t cls) const;  // column sum
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t k);

// Zero denominators produce 0 and set `degenerate` instead of failing, so a
// collapsed early-epoch model still yields a report.
struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
};

struct ScalarScore {
  double value = 0.0;
  bool degenerate = false;
};

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);
double weighted_f1(const ConfusionMatrix& cm);
ScalarScore mcc_binary(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn);
ScalarScore mcc_multiclass(const ConfusionMatrix& cm);

// Percent rounded to two decimals, the form used in reports.
double percent2(double fraction);

// JSON report: confusion counts, per-class p/r/f1, weighted F1, accuracy, MCC.
std::string metrics_report_json(const ConfusionMatrix& cm);

}  // namespace leafkit
