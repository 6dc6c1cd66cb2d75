#include "leafkit/dataset.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "leafkit/error.h"
#include "leafkit/rng.h"

namespace leafkit {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> class_directories(const fs::path& root, std::string_view class_name) {
  std::vector<fs::path> dirs;
  if (fs::is_directory(root / class_name)) {
    dirs.push_back(root / class_name);
    return dirs;
  }
  // Pre-split layouts (train/, validation/, test/) are pooled.
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sub : subdirs) {
    if (fs::is_directory(sub / class_name)) dirs.push_back(sub / class_name);
  }
  return dirs;
}

std::string checked_path_string(const fs::path& p) {
  std::string s = p.generic_string();
  if (s.find_first_of("\t\n\r") != std::string::npos) throw IoError("path contains tab or newline: " + s);
  return s;
}

// Manifests store image paths relative to their own directory so a workspace
// can be used from any working directory.
fs::path anchor_dir(const fs::path& manifest_file) {
  return fs::absolute(manifest_file).parent_path().lexically_normal();
}

}  // namespace

std::string_view label_name(Label label) { return kClassNames[static_cast<std::size_t>(label)]; }

std::optional<Label> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<Label>(i);
  }
  return std::nullopt;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

std::string Origin::to_string() const {
  if (!augmented) return "original";
  return "augmented:" + std::string(augmentation_name(kind)) + ":" + source_id;
}

Origin Origin::parse(std::string_view text) {
  if (text == "original") return {};
  constexpr std::string_view prefix = "augmented:";
  if (text.substr(0, prefix.size()) != prefix) throw FormatError("bad origin '" + std::string(text) + "'");
  const std::string_view rest = text.substr(prefix.size());
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) throw FormatError("bad origin '" + std::string(text) + "'");
  const auto kind = parse_augmentation(rest.substr(0, colon));
  if (!kind) throw FormatError("unknown augmentation in origin '" + std::string(text) + "'");
  return {true, *kind, std::string(rest.substr(colon + 1))};
}

std::string Sample::id() const { return std::string(label_name(label)) + "/" + path.filename().string(); }

std::size_t SplitCounts::total(Split s) const {
  std::size_t n = 0;
  for (std::size_t c : by_split[static_cast<std::size_t>(s)]) n += c;
  return n;
}

std::size_t SplitCounts::of(Split s, Label l) const {
  return by_split[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)];
}

SplitCounts DatasetManifest::counts() const {
  SplitCounts c;
  for (const auto& r : records) ++c.by_split[static_cast<std::size_t>(r.split)][static_cast<std::size_t>(r.label)];
  return c;
}

std::vector<Sample> DatasetManifest::split(Split s) const {
  std::vector<Sample> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(r);
  }
  return out;
}

void DatasetManifest::write(const fs::path& file) const {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << "#seed\t" << seed << '\n';
  const fs::path base = anchor_dir(file);
  for (const auto& r : records) {
    const fs::path rel = fs::absolute(r.path).lexically_normal().lexically_relative(base);
    out << checked_path_string(rel.empty() ? r.path : rel) << '\t' << label_name(r.label) << '\t' << split_name(r.split) << '\t'
        << r.origin.to_string() << '\t' << r.seed << '\n';
  }
  if (!out) throw IoError("failed writing " + file.string());
}

DatasetManifest DatasetManifest::read(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + file.string());
  DatasetManifest m;
  const fs::path base = anchor_dir(file);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#seed\t", 0) == 0) m.seed = std::stoull(line.substr(6));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    auto where = [&] { return file.string() + ":" + std::to_string(lineno); };
    if (fields.size() != 5) throw FormatError(where() + ": expected 5 tab-separated fields");
    Sample s;
    s.path = fs::path(fields[0]).is_absolute() ? fs::path(fields[0]) : (base / fields[0]).lexically_normal();
    const auto label = parse_label(fields[1]);
    const auto split = parse_split(fields[2]);
    if (!label) throw FormatError(where() + ": unknown label '" + fields[1] + "'");
    if (!split) throw FormatError(where() + ": unknown split '" + fields[2] + "'");
    s.label = *label;
    s.split = *split;
    s.origin = Origin::parse(fields[3]);
    try {
      s.seed = std::stoull(fields[4]);
    } catch (const std::exception&) {
      throw FormatError(where() + ": bad seed '" + fields[4] + "'");
    }
    m.records.push_back(std::move(s));
  }
  return m;
}

SplitAllocation allocate_split(std::size_t n, std::size_t& odd_index) {
  SplitAllocation a;
  a.train = n * 7 / 10;
  const std::size_t rest = n - a.train;
  a.val = rest / 2;
  a.test = rest / 2;
  if (rest % 2 == 1) {
    if (odd_index % 2 == 0) {
      ++a.test;
    } else {
      ++a.val;
    }
    ++odd_index;
  }
  return a;
}

DatasetManifest load_and_split(const fs::path& root, std::uint64_t seed) {
  if (!fs::is_directory(root)) throw DatasetError("dataset root " + root.string() + " is not a directory");
  DatasetManifest m;
  m.seed = seed;
  std::size_t odd_index = 0;
  std::array<std::vector<Sample>, 3> by_split;
  for (std::size_t ci = 0; ci < kNumClasses; ++ci) {
    const auto dirs = class_directories(root, kClassNames[ci]);
    if (dirs.empty()) {
      throw DatasetError("missing class directory '" + std::string(kClassNames[ci]) + "' under " + root.string());
    }
    std::vector<fs::path> files;
    for (const auto& dir : dirs) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
        if (probe_image(entry.path())) {
          files.push_back(entry.path());
        } else {
          m.skipped.push_back(entry.path().generic_string());
        }
      }
    }
    std::sort(files.begin(), files.end());
    Rng rng(derive_seed(seed, "split/" + std::string(kClassNames[ci])));
    std::shuffle(files.begin(), files.end(), rng);
    const SplitAllocation alloc = allocate_split(files.size(), odd_index);
    for (std::size_t i = 0; i < files.size(); ++i) {
      Sample s;
      s.path = files[i];
      s.label = static_cast<Label>(ci);
      s.split = i < alloc.train ? Split::kTrain : (i < alloc.train + alloc.val ? Split::kVal : Split::kTest);
      s.seed = seed;
      by_split[static_cast<std::size_t>(s.split)].push_back(std::move(s));
    }
  }
  for (auto& group : by_split) {
    std::stable_sort(group.begin(), group.end(), [](const Sample& a, const Sample& b) {
      if (a.label != b.label) return a.label < b.label;
      return a.path < b.path;
    });
    m.records.insert(m.records.end(), group.begin(), group.end());
  }
  std::sort(m.skipped.begin(), m.skipped.end());
  return m;
}

Image augment_variant(const Image& img, AugmentationKind kind, int variant, std::uint64_t sample_seed) {
  Rng rng(sample_seed);
  switch (kind) {
    case AugmentationKind::kBrightness: return augment_brightness(img, sample_brightness(rng));
    case AugmentationKind::kCrop: {
      const auto [fraction, anchor] = sample_crop(rng);
      return augment_crop(img, fraction, anchor);
    }
    case AugmentationKind::kFlip:
      return augment_flip(img, variant % 2 == 0 ? FlipAxis::kHorizontal : FlipAxis::kVertical);
    case AugmentationKind::kRotation: return augment_rotate(img, sample_rotation(rng));
    case AugmentationKind::kCombination: return augment_combination(img, sample_seed);
  }
  throw ParameterError("unknown augmentation kind");
}

DatasetManifest build_augmented_set(const DatasetManifest& manifest, AugmentationKind kind, std::uint64_t seed,
                                    const fs::path& out_dir) {
  return build_augmented_set(manifest, kind, seed, out_dir, nullptr);
}

DatasetManifest build_augmented_set(const DatasetManifest& manifest, AugmentationKind kind, std::uint64_t seed,
                                    const fs::path& out_dir, AugmentStats* stats) {
  constexpr int kVariants = 2;
  const std::string kind_name(augmentation_name(kind));
  const fs::path set_dir = out_dir / kind_name;

  DatasetManifest out;
  out.seed = seed;
  std::set<fs::path> written;
  auto claim = [&](const fs::path& p) {
    if (!written.insert(p).second) throw IoError("output name collision at " + p.string());
  };

  double sum = 0.0, sum_sq = 0.0;
  std::size_t values = 0, images = 0;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) continue;
    if (rec.origin.augmented) {
      throw ConfigError("augmentation expects the original training split, found augmented record " + rec.id());
    }
    const fs::path class_dir = set_dir / label_name(rec.label);
    fs::create_directories(class_dir);

    const fs::path copy_path = class_dir / rec.path.filename();
    claim(copy_path);
    fs::copy_file(rec.path, copy_path, fs::copy_options::overwrite_existing);
    Sample original = rec;
    original.path = copy_path;
    out.records.push_back(original);

    const Image img = load_image(rec.path);
    for (int v = 0; v < kVariants; ++v) {
      const std::uint64_t sample_seed = derive_seed(seed, kind_name + "|" + rec.id() + "|" + std::to_string(v));
      const Image aug = augment_variant(img, kind, v, sample_seed);
      const fs::path aug_path =
          class_dir / (rec.path.stem().string() + "_" + kind_name + std::to_string(v + 1) + ".png");
      claim(aug_path);
      save_png(aug, aug_path);
      for (float px : aug.pixels) {
        sum += px;
        sum_sq += static_cast<double>(px) * px;
      }
      values += aug.pixels.size();
      ++images;

      Sample s;
      s.path = aug_path;
      s.label = rec.label;
      s.split = Split::kTrain;
      s.origin = {true, kind, rec.id()};
      s.seed = sample_seed;
      out.records.push_back(std::move(s));
    }
  }
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) out.records.push_back(rec);
  }
  if (stats) {
    stats->images = images;
    stats->mean = values ? sum / static_cast<double>(values) : 0.0;
    stats->variance = values ? sum_sq / static_cast<double>(values) - stats->mean * stats->mean : 0.0;
  }
  return out;
}

}  // namespace leafkit
