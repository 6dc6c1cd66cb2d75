#include "commands.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "leafkit/checkpoint.h"
#include "leafkit/dataset.h"
#include "leafkit/error.h"
#include "leafkit/experiment.h"
#include "leafkit/explain.h"
#include "leafkit/metrics.h"
#include "leafkit/training.h"

namespace leafkit::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSetNames{"original", "brightness", "crop", "flip", "rotation", "combination"};

struct Options {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::string arch;
  std::string set;
  int epochs = 40;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  int runs = 5;
  std::size_t jobs = 1;
  std::string layer;
  int target_class = -1;
  double alpha = 0.4;
  // Beyond the core flag set: inputs for eval/gradcam and a smaller input
  // resolution for quick runs.
  std::string model;
  std::string image;
  std::string split = "test";
  std::size_t resolution = 128;
};

std::optional<fs::path> cache_dir() {
  const char* env = std::getenv("LEAFKIT_CACHE");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return fs::path(env);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// --data may name a manifest file or a workspace holding <set>/manifest.tsv.
fs::path resolve_manifest(const std::string& data, const std::string& set) {
  if (data.empty()) throw ConfigError("--data is required");
  const fs::path p(data);
  if (fs::is_regular_file(p)) return p;
  if (!fs::is_directory(p)) throw ConfigError("--data " + data + " does not exist");
  const std::string name = set.empty() ? "original" : set;
  if (fs::is_regular_file(p / name / "manifest.tsv")) return p / name / "manifest.tsv";
  if (fs::is_regular_file(p / "manifest.tsv")) return p / "manifest.tsv";
  throw ConfigError("no manifest for set '" + name + "' under " + data);
}

void print_counts(std::ostream& out, const DatasetManifest& m) {
  const SplitCounts c = m.counts();
  out << std::left << std::setw(8) << "split";
  for (auto name : kClassNames) out << std::setw(20) << name;
  out << "total\n";
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    out << std::setw(8) << split_name(s);
    for (std::size_t k = 0; k < kNumClasses; ++k) out << std::setw(20) << c.of(s, static_cast<Label>(k));
    out << c.total(s) << "\n";
  }
  out << std::right;
}

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

TrainingConfig training_config(const Options& o) {
  TrainingConfig c;
  c.learning_rate = o.lr;
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.seed = o.seed;
  c.architecture = parse_architecture(o.arch.empty() ? "cnn" : o.arch);
  c.training_set = o.set.empty() ? "original" : o.set;
  c.resolution = o.resolution;
  c.validate();
  return c;
}

// ---- subcommands ----

int cmd_split(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.data.empty() || o.out.empty()) throw ConfigError("split needs --data and --out");
  if (!fs::is_directory(o.data)) throw ConfigError("dataset root " + o.data + " does not exist");
  const DatasetManifest m = load_and_split(o.data, o.seed);
  const fs::path file = fs::path(o.out) / "original" / "manifest.tsv";
  m.write(file);
  for (const auto& s : m.skipped) err << "skipped unreadable image " << s << "\n";
  print_counts(out, m);
  out << "manifest " << file.string() << "\n";
  return kOk;
}

int cmd_augment(const Options& o, std::ostream& out, std::ostream&) {
  const fs::path manifest_path = resolve_manifest(o.data, "original");
  const std::string set = o.set.empty() ? "all" : o.set;
  std::vector<AugmentationKind> kinds;
  if (set == "all") {
    kinds.assign(std::begin(kAllAugmentations), std::end(kAllAugmentations));
  } else if (auto k = parse_augmentation(set)) {
    kinds.push_back(*k);
  } else {
    throw ConfigError("unknown augmentation '" + set + "'");
  }
  const fs::path out_dir = o.out.empty() ? manifest_path.parent_path().parent_path() : fs::path(o.out);
  const DatasetManifest original = DatasetManifest::read(manifest_path);
  for (AugmentationKind kind : kinds) {
    AugmentStats stats;
    const DatasetManifest m = build_augmented_set(original, kind, o.seed, out_dir, &stats);
    const fs::path file = out_dir / augmentation_name(kind) / "manifest.tsv";
    m.write(file);
    out << augmentation_name(kind) << ": " << m.counts().total(Split::kTrain) << " training images, "
        << stats.images << " generated, pixel mean " << std::setprecision(4) << stats.mean << " variance "
        << stats.variance << std::setprecision(6) << "\n";
  }
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream&) {
  if (o.out.empty()) throw ConfigError("train needs --out");
  const TrainingConfig config = training_config(o);
  const DatasetManifest m = DatasetManifest::read(resolve_manifest(o.data, config.training_set));
  const auto cache = cache_dir();
  const auto train_samples = m.split(Split::kTrain);
  const auto val_samples = m.split(Split::kVal);
  if (train_samples.empty()) throw ConfigError("manifest has no training samples");
  if (val_samples.empty()) throw ConfigError("manifest has no validation samples");
  const ImageSet train_set = load_image_set(train_samples, config.resolution, cache);
  const ImageSet val_set = load_image_set(val_samples, config.resolution, cache);

  const ModelSpec spec = spec_for(config.architecture, config.resolution);
  const TrainResult result = train(config, spec, train_set, val_set, [&](const EpochRecord& e) {
    out << "epoch " << e.epoch << "/" << config.epochs << " train_loss " << std::fixed << std::setprecision(4)
        << e.train_loss << " train_acc " << e.train_acc << " val_loss " << e.val_loss << " val_acc " << e.val_acc
        << std::defaultfloat << std::setprecision(6) << "\n";
  });

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(config_json(config));
  meta["epoch"] = result.history.best_epoch;
  const EpochRecord& best = result.history.epochs[static_cast<std::size_t>(result.history.best_epoch - 1)];
  meta["metrics"] = {{"train_loss", best.train_loss}, {"train_acc", best.train_acc},
                     {"val_loss", best.val_loss},     {"val_acc", best.val_acc}};
  const fs::path dir(o.out);
  save_model(Checkpoint::from_model(result.model, meta.dump()), dir / "checkpoint.lfk");
  write_text(dir / "history.json", result.history.to_json());
  out << "best epoch " << result.history.best_epoch << " val_acc " << fixed2(percent2(result.history.best_val_acc))
      << "%, " << result.model.parameter_count() << " parameters\n";
  out << "checkpoint " << (dir / "checkpoint.lfk").string() << "\n";
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty()) throw ConfigError("eval needs --model");
  const auto split = parse_split(o.split);
  if (!split) throw ConfigError("unknown split '" + o.split + "'");
  const Checkpoint ckpt = load_model(o.model);
  const Model model = ckpt.to_model();
  const DatasetManifest m = DatasetManifest::read(resolve_manifest(o.data, o.set));
  const auto samples = m.split(*split);
  if (samples.empty()) throw ConfigError("split '" + o.split + "' is empty");
  const ImageSet set = load_image_set(samples, model.spec().height, cache_dir());
  const Evaluation ev = evaluate(model, set, o.batch_size);
  ConfusionMatrix cm = confusion(ev.labels, ev.predictions, kNumClasses);
  cm.class_names.assign(kClassNames.begin(), kClassNames.end());

  out << "samples " << cm.total() << "\n";
  out << "loss " << std::fixed << std::setprecision(4) << ev.loss << std::defaultfloat << std::setprecision(6) << "\n";
  out << "accuracy " << fixed2(percent2(accuracy(cm))) << "\n";
  out << "weighted_f1 " << fixed2(percent2(weighted_f1(cm))) << "\n";
  out << "mcc " << fixed2(percent2(mcc_multiclass(cm).value)) << "\n";
  const auto scores = per_class_prf(cm);
  for (std::size_t k = 0; k < cm.k; ++k) {
    out << cm.class_names[k] << " precision " << fixed2(percent2(scores[k].precision)) << " recall "
        << fixed2(percent2(scores[k].recall)) << " f1 " << fixed2(percent2(scores[k].f1)) << "\n";
  }
  out << "confusion (rows true, columns predicted)\n";
  for (std::size_t t = 0; t < cm.k; ++t) {
    for (std::size_t p = 0; p < cm.k; ++p) out << std::setw(6) << cm.at(t, p);
    out << "\n";
  }
  if (!o.out.empty()) {
    nlohmann::json report = nlohmann::json::parse(metrics_report_json(cm));
    report["split"] = o.split;
    report["loss"] = ev.loss;
    write_text(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  }
  return kOk;
}

int cmd_gradcam(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty() || o.image.empty() || o.out.empty()) throw ConfigError("gradcam needs --model, --image and --out");
  const Model model = load_model(o.model).to_model();
  const Image original = load_image(o.image);
  const Image input = quantize8(resize_bilinear(original, model.spec().width, model.spec().height));
  const Tensor x = image_to_tensor(input);

  int target = o.target_class;
  if (target < 0) {
    NoGradGuard no_grad;
    target = argmax_row(model.forward(x).data());
  }
  const Heatmap hm = gradcam(model, x, target, o.layer);
  const Image overlay = render_overlay(hm, original, o.alpha);
  const fs::path dir(o.out);
  const std::string stem = fs::path(o.image).stem().string();
  save_png(overlay, dir / (stem + "_gradcam.png"));
  write_text(dir / (stem + "_gradcam.json"), heatmap_json(hm));
  out << "class " << target << " (" << kClassNames[static_cast<std::size_t>(target) % kNumClasses] << ") layer "
      << hm.layer << " map " << hm.height << "x" << hm.width << " range [" << hm.min << ", " << hm.max << "]\n";
  out << "overlay " << (dir / (stem + "_gradcam.png")).string() << "\n";
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.data.empty() || o.out.empty()) throw ConfigError("compare needs --data (workspace) and --out");
  if (o.runs < 1) throw ConfigError("--runs must be at least 1");
  if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
  GridConfig grid;
  Options base = o;
  base.arch = "cnn";
  base.set = "original";
  grid.base = training_config(base);
  if (!o.arch.empty()) grid.architectures = {parse_architecture(o.arch)};
  if (!o.set.empty()) grid.training_sets = {o.set};
  grid.runs = o.runs;
  grid.seed = o.seed;
  grid.jobs = o.jobs;
  grid.out = o.out;

  const auto cache = cache_dir();
  const std::size_t res = o.resolution;
  const SetLoader loader = [&](const std::string& set) {
    const DatasetManifest m = DatasetManifest::read(resolve_manifest(o.data, set));
    const auto tr = m.split(Split::kTrain), va = m.split(Split::kVal), te = m.split(Split::kTest);
    if (tr.empty() || va.empty() || te.empty()) throw ConfigError("set '" + set + "' is missing a split");
    return SetData{load_image_set(tr, res, cache), load_image_set(va, res, cache), load_image_set(te, res, cache)};
  };
  const GridReport report = run_experiment_grid(grid, loader, [&](const RunResult& r) {
    err << architecture_name(r.architecture) << " / " << r.training_set << " run " << r.run << ": test accuracy "
        << fixed2(percent2(r.test_acc)) << "%\n";
  });
  out << report.table();
  out << "summary " << (fs::path(o.out) / "summary.json").string() << "\n";
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::kUsage: return kUsage;
    case ErrorCategory::kData: return kData;
    case ErrorCategory::kNumeric: return kNumeric;
  }
  return kInternal;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"leafkit: bean-leaf disease classifiers (CNN and CNN-LSTM)", "leafkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "random seed")->capture_default_str(); };
  auto data_out = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "dataset root, workspace directory or manifest file");
    sub->add_option("--out", o.out, "output directory");
  };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--arch", o.arch, "architecture")->check(CLI::IsMember({"cnn", "cnn-lstm"}));
    sub->add_option("--epochs", o.epochs, "epochs")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--batch-size", o.batch_size, "batch size")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--resolution", o.resolution, "input resolution in pixels")
        ->capture_default_str()
        ->check(CLI::Range(8, 1024));
  };
  auto set_option = [&](CLI::App* sub, std::vector<std::string> allowed) {
    sub->add_option("--set", o.set, "training set")->check(CLI::IsMember(allowed));
  };

  auto* split = app.add_subcommand("split", "stratified 70/15/15 split of a dataset root");
  data_out(split);
  common(split);

  auto* augment = app.add_subcommand("augment", "materialize augmented training sets");
  data_out(augment);
  common(augment);
  {
    std::vector<std::string> allowed(kSetNames.begin() + 1, kSetNames.end());
    allowed.push_back("all");
    set_option(augment, allowed);
  }

  auto* train_cmd = app.add_subcommand("train", "train one model");
  data_out(train_cmd);
  common(train_cmd);
  training(train_cmd);
  set_option(train_cmd, kSetNames);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  data_out(eval);
  eval->add_option("--model", o.model, "checkpoint file")->required();
  eval->add_option("--split", o.split, "split to evaluate")->capture_default_str()->check(
      CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--batch-size", o.batch_size, "batch size")->capture_default_str()->check(CLI::PositiveNumber);
  set_option(eval, kSetNames);

  auto* cam = app.add_subcommand("gradcam", "Grad-CAM overlay for one image");
  cam->add_option("--out", o.out, "output directory");
  cam->add_option("--model", o.model, "checkpoint file")->required();
  cam->add_option("--image", o.image, "input image")->required();
  cam->add_option("--layer", o.layer, "convolution layer (default: last)");
  cam->add_option("--class", o.target_class, "target class (default: predicted)")->check(CLI::Range(0, 2));
  cam->add_option("--alpha", o.alpha, "overlay opacity")->capture_default_str()->check(CLI::Range(0.0, 1.0));

  auto* compare = app.add_subcommand("compare", "train the architecture x training-set grid and summarize");
  data_out(compare);
  common(compare);
  training(compare);
  set_option(compare, kSetNames);
  compare->add_option("--runs", o.runs, "runs per cell")->capture_default_str()->check(CLI::PositiveNumber);
  compare->add_option("--jobs", o.jobs, "parallel runs")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (msg.empty()) msg = e.get_name();
    err << "leafkit: " << msg << "\n";
    return kUsage;
  }

  try {
    if (split->parsed()) return cmd_split(o, out, err);
    if (augment->parsed()) return cmd_augment(o, out, err);
    if (train_cmd->parsed()) return cmd_train(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out, err);
    if (cam->parsed()) return cmd_gradcam(o, out, err);
    if (compare->parsed()) return cmd_compare(o, out, err);
  } catch (const Error& e) {
    err << "leafkit: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "leafkit: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "leafkit: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("leafkit");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace leafkit::cli
