#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "drape/augment.hpp"
#include "drape/image.hpp"
#include "drape/material.hpp"
#include "drape/render.hpp"
#include "drape/scene.hpp"
#include "drape/solver.hpp"

namespace drape {

struct ManifestRecord {
  int sample_id = 0;
  MaterialParams params;
  SceneKind scene = SceneKind::kHanging;
  int view_index = 0;
  double inclination_deg = 0.0;
  std::uint64_t augment_seed = 0;
  std::string path;  // relative to the manifest directory
  std::string split;  // "train" or "val"
};

// A sample/scene whose solve failed; kept instead of silently dropped.
struct QuarantineRecord {
  int sample_id = 0;
  MaterialParams params;
  SceneKind scene = SceneKind::kHanging;
  std::string error;
  long step = -1;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::vector<QuarantineRecord> quarantined;
};

/// Shared simulation and capture settings.
struct CaptureConfig {
  double fabric_size = 0.5;
  double edge_length = 0.02;  // 5 mm is the full-resolution mesh, 20 mm desk scale
  SolverConfig solver;
  Camera camera;

  void validate() const;
};

struct Capture {
  ClothMesh mesh;
  SolveResult solve;
};

// Builds the grid for p.density(), sets up the scene and relaxes it.
Capture simulate_capture(const MaterialParams& p, SceneKind scene, const CaptureConfig& capture,
                         const std::optional<JitterConfig>& jitter = std::nullopt);

struct GenConfig {
  SamplerConfig sampler;
  CaptureConfig capture;
  AugmentPolicy augment;
  bool apply_augment = true;
  int count = 10;
  double val_fraction = 0.10;
  std::uint64_t seed = 0;  // split and augmentation seeds
  std::filesystem::path output_dir;
  int jobs = 1;

  void validate() const;
};

// Sample ids assigned to val: the first round(count * fraction) entries of
// a seeded permutation.
std::vector<int> val_sample_ids(int count, double val_fraction, std::uint64_t seed);

/// Writes images/, manifest.jsonl and quarantine.jsonl under output_dir.
/// Output does not depend on cfg.jobs.
DatasetManifest generate_dataset(const GenConfig& cfg);

// JSON-lines, one record per line.
void write_manifest(std::ostream& out, const DatasetManifest& m);
DatasetManifest read_manifest(std::istream& in);
void write_quarantine(std::ostream& out, const DatasetManifest& m);
void write_manifest_file(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest_file(const std::filesystem::path& path);

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

using CorrelationMatrix = std::array<std::array<double, kNumCoefficients>, kNumCoefficients>;

struct DatasetStats {
  int samples = 0;
  CorrelationMatrix spearman{};  // NaN where a column is constant
  std::vector<std::string> constant_columns;
  ParamVector min{}, max{}, mean{};
  double mean_stretch_correlation = kUndefined;  // mean of the three kStretch pairs
  int train_samples = 0;
  int val_samples = 0;
  int quarantined = 0;
};

DatasetStats parameter_stats(std::span<const MaterialParams> params);
// One entry per distinct sample_id. Throws ConfigError with fewer than 3 samples.
DatasetStats dataset_stats(const DatasetManifest& manifest);

void to_json(nlohmann::json& j, const DatasetStats& s);
std::string stats_markdown(const DatasetStats& s);

struct SweepCell {
  double value = 0.0;
  SceneKind scene = SceneKind::kHanging;
  bool ok = false;
  std::string error;
  ConvergenceReport report;
  double lowest_y = 0.0;        // m
  long silhouette_pixels = 0;
  double silhouette_area = 0.0;  // m^2 at the camera target distance
  DepthImage depth;
  GrayImage shaded;
};

struct SweepReport {
  std::string param;
  std::vector<double> values;
  std::vector<SweepCell> cells;  // row-major: value index, then scene (hanging, stretch)
};

// "kBending" and "kStretch" set all three directions; otherwise a single
// coefficient name. Values must be strictly increasing.
MaterialParams with_param(const MaterialParams& base, const std::string& param, double value);
SweepReport sweep_report(const std::string& param, const std::vector<double>& values,
                         const MaterialParams& fixed, const CaptureConfig& capture);
// Rows are values, columns the two scenes.
Image sweep_grid(const SweepReport& report, bool shaded);
void to_json(nlohmann::json& j, const SweepReport& r);

void to_json(nlohmann::json& j, const CaptureConfig& c);
void from_json(const nlohmann::json& j, CaptureConfig& c);
void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

}  // namespace drape
