#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "leafkit/training.h"

namespace leafkit {

// Five-number summary with Tukey whiskers: quartiles use linear
// interpolation between order statistics, whiskers reach the most extreme
// values within 1.5 IQR of the box, and everything beyond is an outlier.
struct BoxStats {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);
double quantile_sorted(const std::vector<double>& sorted, double q);

struct RunResult {
  Architecture architecture = Architecture::kBaselineCnn;
  std::string training_set;
  int run = 0;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  double val_acc = 0.0;
  // Test split, evaluated with the best-validation weights. Fractions.
  double test_loss = 0.0;
  double test_acc = 0.0;
  double test_f1 = 0.0;
  double test_mcc = 0.0;
};

struct SetData {
  ImageSet train;
  ImageSet val;
  ImageSet test;
};
using SetLoader = std::function<SetData(const std::string& training_set)>;
using SpecFactory = std::function<ModelSpec(Architecture)>;

struct GridConfig {
  std::vector<Architecture> architectures{Architecture::kBaselineCnn, Architecture::kHybridCnnLstm};
  std::vector<std::string> training_sets{"original", "brightness", "crop", "flip", "rotation", "combination"};
  int runs = 5;
  std::uint64_t seed = 0;  // run i uses seed + i
  TrainingConfig base;     // architecture, set and seed are overwritten per run
  std::size_t jobs = 1;
  std::filesystem::path out;  // receives runs/*.json and summary.json
  SpecFactory spec_factory;   // defaults to spec_for(arch, base.resolution)
};

struct GridCell {
  Architecture architecture;
  std::string training_set;
  std::vector<RunResult> runs;
  RunResult best;  // highest test accuracy, earliest run on ties
  BoxStats accuracy;
};

struct GridReport {
  std::vector<RunResult> runs;  // ordered by set, architecture, run

  std::vector<GridCell> cells() const;
  std::string summary_json() const;
  std::string table() const;        // one row per cell: accuracy, loss, F1, MCC of the best run
  std::string boxplot_svg() const;  // test accuracy distribution per cell

  static GridReport from_summary_json(const std::string& text);
};

// Trains every architecture x training-set cell `runs` times. Sets are
// loaded one at a time; runs within a set are spread over `jobs` threads but
// each run is sequential and seeded, so results do not depend on `jobs`.
GridReport run_experiment_grid(const GridConfig& config, const SetLoader& loader,
                               const std::function<void(const RunResult&)>& on_run = {});

}  // namespace leafkit
