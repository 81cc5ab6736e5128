// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pct/point_io.hpp"
#include "pct/shapes.hpp"

namespace pct {

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ValidationError("split: unknown tag '" + s + "'");
}

struct DatasetConfig {
  std::vector<ShapeKind> kinds{kAllShapeKinds.begin(), kAllShapeKinds.end()};  // category = position
  std::size_t per_class = 50;
  std::size_t points = 256;
  double noise = 0.0;
  double train_fraction = 0.8;
  bool random_yaw = true;
  bool normalize = true;  // zero centroid, unit max radius

  void validate() const {
    if (kinds.empty()) throw ValidationError("dataset: kinds must not be empty");
    if (per_class < 2) throw ValidationError("dataset: per_class must be at least 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("dataset: train_fraction must be in (0, 1)");
    if (points < 8) throw ValidationError("dataset: points must be at least 8");
    if (noise < 0.0) throw ValidationError("dataset: noise must be non-negative");
  }

  /// Training items per class; at least one item lands on each side.
  std::size_t train_per_class() const {
    auto t = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(per_class)));
    return std::clamp<std::size_t>(t, 1, per_class - 1);
  }
};

/// Independent 64-bit stream seed for item `index` of a run seeded `seed`.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct DatasetItem {
  PointCloud cloud;
  Split split = Split::train;
};

/// Shape `index` of the dataset, reproducible in isolation.
inline DatasetItem generate_item(const DatasetConfig& cfg, std::uint64_t seed, std::size_t index) {
  const std::size_t category = index / cfg.per_class;
  const std::size_t within = index % cfg.per_class;
  Rng rng(stream_seed(seed, index));
  ShapeSpec spec;
  spec.kind = cfg.kinds.at(category);
  spec.size = random_size(spec.kind, rng);
  spec.points = cfg.points;
  spec.noise = cfg.noise;
  if (cfg.random_yaw) spec.rotation = yaw_rotation(std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng));
  DatasetItem item;
  item.cloud = generate_shape(spec, rng);
  item.cloud.category = static_cast<int>(category);
  if (cfg.normalize) {
    Matrix& c = item.cloud.coords;
    c.rowwise() -= c.colwise().mean();
    const double r = c.rowwise().norm().maxCoeff();
    if (r > 0) c /= r;
  }
  item.split = within < cfg.train_per_class() ? Split::train : Split::test;
  return item;
}

/// Whole dataset in memory, class-major order.
inline std::vector<DatasetItem> generate_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t total = cfg.kinds.size() * cfg.per_class;
  std::vector<DatasetItem> out(total);
  // Per-item streams keep the result independent of the schedule.
#pragma omp parallel for schedule(dynamic) if (total > 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
    out[static_cast<std::size_t>(i)] = generate_item(cfg, seed, static_cast<std::size_t>(i));
  }
  return out;
}

inline std::vector<PointCloud> clouds_of(const std::vector<DatasetItem>& items, Split split) {
  std::vector<PointCloud> out;
  for (const auto& it : items) {
    if (it.split == split) out.push_back(it.cloud);
  }
  return out;
}

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  int category = 0;
  Split split = Split::train;
};

struct DatasetManifest {
  int version = 1;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
};

inline nlohmann::ordered_json manifest_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["classes"] = m.class_names;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"path", e.path}, {"category", e.category}, {"split", to_string(e.split)}});
  }
  return j;
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw FormatError("manifest: unsupported version " + std::to_string(m.version));
    if (j.contains("classes")) m.class_names = j.at("classes").get<std::vector<std::string>>();
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("path").get<std::string>(), e.at("category").get<int>(),
                           parse_split(e.at("split").get<std::string>())});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path + ": " + e.what());
  }
}

/// Writes `<dir>/points/NNNNN.txt` for every shape plus `<dir>/manifest.json`.
inline DatasetManifest make_dataset(const DatasetConfig& cfg, std::uint64_t seed, const std::string& dir) {
  namespace fs = std::filesystem;
  const auto items = generate_dataset(cfg, seed);
  fs::create_directories(fs::path(dir) / "points");
  DatasetManifest m;
  for (auto k : cfg.kinds) m.class_names.push_back(to_string(k));
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::ostringstream name;
    name << "points/" << std::setw(5) << std::setfill('0') << i << ".txt";
    save_points(items[i].cloud, (fs::path(dir) / name.str()).string());
    m.entries.push_back({name.str(), *items[i].cloud.category, items[i].split});
  }
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw FormatError("cannot write manifest in " + dir);
  os << manifest_json(m).dump(2) << '\n';
  return m;
}

/// Loads every cloud of `split` listed in the manifest at `manifest_path`.
inline std::vector<PointCloud> load_split(const std::string& manifest_path, Split split) {
  namespace fs = std::filesystem;
  const auto m = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<PointCloud> out;
  for (const auto& e : m.entries) {
    if (e.split != split) continue;
    PointCloud c = load_points((base / e.path).string());
    c.category = e.category;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pct
