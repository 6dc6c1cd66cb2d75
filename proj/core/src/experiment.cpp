#include "leafkit/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "leafkit/error.h"
#include "leafkit/metrics.h"

namespace leafkit {

using nlohmann::ordered_json;

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr, hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  bool low_set = false;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      s.outliers.push_back(v);
      continue;
    }
    if (!low_set) {
      s.whisker_low = v;
      low_set = true;
    }
    s.whisker_high = v;
  }
  return s;
}

namespace {

ordered_json run_json(const RunResult& r) {
  ordered_json j;
  j["architecture"] = std::string(architecture_name(r.architecture));
  j["training_set"] = r.training_set;
  j["run"] = r.run;
  j["seed"] = r.seed;
  j["best_epoch"] = r.best_epoch;
  j["val_acc"] = r.val_acc;
  j["test_loss"] = r.test_loss;
  j["test_acc"] = r.test_acc;
  j["test_f1"] = r.test_f1;
  j["test_mcc"] = r.test_mcc;
  return j;
}

RunResult run_from_json(const nlohmann::json& j) {
  RunResult r;
  r.architecture = parse_architecture(j.at("architecture").get<std::string>());
  r.training_set = j.at("training_set").get<std::string>();
  r.run = j.at("run").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.val_acc = j.at("val_acc").get<double>();
  r.test_loss = j.at("test_loss").get<double>();
  r.test_acc = j.at("test_acc").get<double>();
  r.test_f1 = j.at("test_f1").get<double>();
  r.test_mcc = j.at("test_mcc").get<double>();
  return r;
}

ordered_json box_json(const BoxStats& s) {
  ordered_json j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  j["whisker_low"] = s.whisker_low;
  j["whisker_high"] = s.whisker_high;
  j["outliers"] = s.outliers;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace

std::vector<GridCell> GridReport::cells() const {
  std::vector<GridCell> out;
  for (const auto& r : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const GridCell& c) {
      return c.architecture == r.architecture && c.training_set == r.training_set;
    });
    if (it == out.end()) {
      out.push_back(GridCell{r.architecture, r.training_set, {}, {}, {}});
      it = out.end() - 1;
    }
    it->runs.push_back(r);
  }
  for (auto& c : out) {
    std::vector<double> accs;
    c.best = c.runs.front();
    for (const auto& r : c.runs) {
      accs.push_back(r.test_acc);
      if (r.test_acc > c.best.test_acc) c.best = r;
    }
    c.accuracy = box_stats(accs);
  }
  return out;
}

std::string GridReport::summary_json() const {
  ordered_json j;
  j["runs"] = ordered_json::array();
  for (const auto& r : runs) j["runs"].push_back(run_json(r));
  j["cells"] = ordered_json::array();
  for (const auto& c : cells()) {
    ordered_json cell;
    cell["architecture"] = std::string(architecture_name(c.architecture));
    cell["training_set"] = c.training_set;
    cell["runs"] = c.runs.size();
    ordered_json best;
    best["run"] = c.best.run;
    best["seed"] = c.best.seed;
    best["accuracy"] = percent2(c.best.test_acc);
    best["loss"] = std::round(c.best.test_loss * 10000.0) / 10000.0;
    best["f1"] = percent2(c.best.test_f1);
    best["mcc"] = percent2(c.best.test_mcc);
    cell["best"] = best;
    cell["test_accuracy"] = box_json(c.accuracy);
    j["cells"].push_back(cell);
  }
  return j.dump(2) + "\n";
}

GridReport GridReport::from_summary_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GridReport report;
    for (const auto& r : j.at("runs")) report.runs.push_back(run_from_json(r));
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed grid summary: ") + e.what());
  }
}

std::string GridReport::table() const {
  std::ostringstream os;
  os << "| architecture | training set | runs | accuracy (%) | loss | F1 (%) | MCC (%) | median acc (%) |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& c : cells()) {
    os << "| " << architecture_name(c.architecture) << " | " << c.training_set << " | " << c.runs.size() << " | "
       << fmt("%.2f", percent2(c.best.test_acc)) << " | " << fmt("%.4f", c.best.test_loss) << " | "
       << fmt("%.2f", percent2(c.best.test_f1)) << " | " << fmt("%.2f", percent2(c.best.test_mcc)) << " | "
       << fmt("%.2f", percent2(c.accuracy.median)) << " |\n";
  }
  return os.str();
}

std::string GridReport::boxplot_svg() const {
  const auto all = cells();
  constexpr double kWidthPerBox = 60.0, kLeft = 60.0, kTop = 30.0, kPlotH = 300.0, kBottom = 110.0;
  const double width = kLeft + kWidthPerBox * static_cast<double>(std::max<std::size_t>(all.size(), 1)) + 20.0;
  const double height = kTop + kPlotH + kBottom;

  double lo = 1.0, hi = 0.0;
  for (const auto& c : all) {
    lo = std::min(lo, c.accuracy.min);
    hi = std::max(hi, c.accuracy.max);
  }
  if (all.empty() || hi <= lo) {
    lo = std::max(0.0, lo - 0.05);
    hi = std::min(1.0, hi + 0.05);
    if (hi <= lo) hi = lo + 0.1;
  }
  const double pad = (hi - lo) * 0.05;
  lo -= pad;
  hi += pad;
  auto y = [&](double v) { return kTop + kPlotH * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\""
     << fmt("%.0f", height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt("%.0f", width / 2) << "\" y=\"18\" text-anchor=\"middle\">Test accuracy (%)</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    os << "<line x1=\"" << kLeft << "\" x2=\"" << fmt("%.1f", width - 20) << "\" y1=\"" << fmt("%.1f", y(v))
       << "\" y2=\"" << fmt("%.1f", y(v)) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt("%.1f", y(v) + 4) << "\" text-anchor=\"end\">"
       << fmt("%.1f", v * 100.0) << "</text>\n";
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& c = all[i];
    const auto& s = c.accuracy;
    const double cx = kLeft + kWidthPerBox * (static_cast<double>(i) + 0.5);
    const double half = kWidthPerBox * 0.3;
    const char* fill = c.architecture == Architecture::kHybridCnnLstm ? "#7fc97f" : "#beaed4";
    os << "<g>\n";
    os << "<line x1=\"" << fmt("%.1f", cx) << "\" x2=\"" << fmt("%.1f", cx) << "\" y1=\"" << fmt("%.1f", y(s.whisker_low))
       << "\" y2=\"" << fmt("%.1f", y(s.whisker_high)) << "\" stroke=\"black\"/>\n";
    for (double w : {s.whisker_low, s.whisker_high}) {
      os << "<line x1=\"" << fmt("%.1f", cx - half / 2) << "\" x2=\"" << fmt("%.1f", cx + half / 2) << "\" y1=\""
         << fmt("%.1f", y(w)) << "\" y2=\"" << fmt("%.1f", y(w)) << "\" stroke=\"black\"/>\n";
    }
    os << "<rect x=\"" << fmt("%.1f", cx - half) << "\" y=\"" << fmt("%.1f", y(s.q3)) << "\" width=\""
       << fmt("%.1f", 2 * half) << "\" height=\"" << fmt("%.1f", std::max(1.0, y(s.q1) - y(s.q3)))
       << "\" fill=\"" << fill << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fmt("%.1f", cx - half) << "\" x2=\"" << fmt("%.1f", cx + half) << "\" y1=\""
       << fmt("%.1f", y(s.median)) << "\" y2=\"" << fmt("%.1f", y(s.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double o : s.outliers) {
      os << "<circle cx=\"" << fmt("%.1f", cx) << "\" cy=\"" << fmt("%.1f", y(o))
         << "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    }
    os << "<text transform=\"translate(" << fmt("%.1f", cx + 4) << "," << fmt("%.1f", kTop + kPlotH + 8)
       << ") rotate(60)\">" << architecture_name(c.architecture) << " / " << c.training_set << "</text>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

GridReport run_experiment_grid(const GridConfig& config, const SetLoader& loader,
                               const std::function<void(const RunResult&)>& on_run) {
  if (config.runs < 1) throw ConfigError("runs must be at least 1");
  if (config.architectures.empty() || config.training_sets.empty()) throw ConfigError("empty experiment grid");
  config.base.validate();
  const SpecFactory factory =
      config.spec_factory ? config.spec_factory
                          : SpecFactory([&](Architecture a) { return spec_for(a, config.base.resolution); });

  GridReport report;
  std::mutex mu;
  for (const auto& set_name : config.training_sets) {
    const SetData data = loader(set_name);
    struct Task {
      Architecture arch;
      int run;
    };
    std::vector<Task> tasks;
    for (Architecture a : config.architectures)
      for (int r = 0; r < config.runs; ++r) tasks.push_back({a, r});
    std::vector<RunResult> results(tasks.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        {
          std::lock_guard lock(mu);
          if (failure) return;
        }
        try {
          TrainingConfig tc = config.base;
          tc.architecture = tasks[i].arch;
          tc.training_set = set_name;
          tc.seed = config.seed + static_cast<std::uint64_t>(tasks[i].run);
          const TrainResult tr = train(tc, factory(tasks[i].arch), data.train, data.val);
          const Evaluation ev = evaluate(tr.model, data.test, tc.batch_size);
          const ConfusionMatrix cm = confusion(ev.labels, ev.predictions, tr.model.spec().num_classes);

          RunResult r;
          r.architecture = tc.architecture;
          r.training_set = set_name;
          r.run = tasks[i].run;
          r.seed = tc.seed;
          r.best_epoch = tr.history.best_epoch;
          r.val_acc = tr.history.best_val_acc;
          r.test_loss = ev.loss;
          r.test_acc = accuracy(cm);
          r.test_f1 = weighted_f1(cm);
          r.test_mcc = mcc_multiclass(cm).value;
          results[i] = r;

          if (!config.out.empty()) {
            auto history = nlohmann::ordered_json::parse(tr.history.to_json());
            history["test"] = run_json(r);
            write_text(config.out / "runs" /
                           (std::string(architecture_name(r.architecture)) + "_" + set_name + "_run" +
                            std::to_string(r.run) + ".json"),
                       history.dump(2) + "\n");
          }
          std::lock_guard lock(mu);
          if (on_run) on_run(r);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(config.jobs, 1, tasks.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    report.runs.insert(report.runs.end(), results.begin(), results.end());
  }

  if (!config.out.empty()) {
    write_text(config.out / "summary.json", report.summary_json());
    write_text(config.out / "summary.md", report.table());
    write_text(config.out / "accuracy_boxplot.svg", report.boxplot_svg());
  }
  return report;
}

}  // namespace leafkit
