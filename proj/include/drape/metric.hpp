#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "drape/dataset.hpp"
#include "drape/image.hpp"
#include "drape/material.hpp"
#include "drape/render.hpp"
#include "drape/scene.hpp"

namespace drape {

enum class InnerMetric { kMeanAbsDiff, kSsim, kExternal };

std::string_view inner_metric_name(InnerMetric m);
InnerMetric parse_inner_metric(std::string_view name);  // mad | ssim | external

double mean_abs_diff(const Image& a, const Image& b);

// Mean SSIM over every position where the 11x11 Gaussian window (sigma 1.5)
// fits inside the image; k1 = 0.01, k2 = 0.03, dynamic range 1.
double ssim(const Image& a, const Image& b);

// External distances cannot be computed locally; that kind throws ConfigError.
double inner_distance(const Image& a, const Image& b, InnerMetric kind);

struct MetricConfig {
  int replicates = 5;  // N simulations per material and scene
  JitterConfig jitter;  // seed is the master seed
  InnerMetric inner = InnerMetric::kSsim;
  std::filesystem::path external_dir;  // pairs.json / distances.csv exchange
  std::string external_command;        // run as: <command> <pairs.json> <distances.csv>
  CaptureConfig capture;
  Vec3 light = kDefaultLight;
  int jobs = 1;

  void validate() const;
};

enum class Side { kA = 0, kB = 1 };

struct SceneDistance {
  double value = 0.0;
  int replicates = 0;
  std::vector<double> inner;  // N*N, inner[i*N + j] = IM(a_i, b_j)
};

struct DistanceReport {
  SceneDistance hanging;
  SceneDistance stretch;
  double d_hanging = 0.0;
  double d_stretch = 0.0;
  double d = 0.0;
};

// Plain mean of the retained inner distances.
double mean_of(std::span<const double> values);
DistanceReport combine_scenes(SceneDistance hanging, SceneDistance stretch);

struct ExternalPair {
  std::string pair_id;
  std::filesystem::path image_a;
  std::filesystem::path image_b;
};
void write_pairs_json(const std::filesystem::path& path, const std::vector<ExternalPair>& pairs);
std::vector<ExternalPair> read_pairs_json(const std::filesystem::path& path);
std::map<std::string, double> read_distances_csv(const std::filesystem::path& path);
void write_distances_csv(const std::filesystem::path& path, const std::map<std::string, double>& d);

/// Drape distance evaluator. Shaded renders are cached per
/// (params, scene, side, replicate), so distance matrices reuse simulations.
class MetricEngine {
 public:
  using ImageSource = std::function<GrayImage(const MaterialParams&, SceneKind, Side, int)>;
  using InnerFn = std::function<double(const GrayImage&, const GrayImage&)>;

  explicit MetricEngine(MetricConfig cfg);
  // Test seam: replaces simulation+render and/or the inner metric.
  MetricEngine(MetricConfig cfg, ImageSource source, InnerFn inner = nullptr);

  const MetricConfig& config() const { return cfg_; }
  std::uint64_t jitter_seed(SceneKind scene, Side side, int replicate) const;

  GrayImage render(const MaterialParams& p, SceneKind scene, Side side, int replicate);
  SceneDistance scene_distance(const MaterialParams& pa, const MaterialParams& pb, SceneKind scene);
  DistanceReport drape_distance(const MaterialParams& pa, const MaterialParams& pb);

  std::size_t cached_images() const;
  long simulations() const { return simulations_; }

 private:
  using Key = std::tuple<ParamVector, int, int, int>;
  GrayImage simulate_and_render(const MaterialParams& p, SceneKind scene, Side side, int replicate) const;
  void prefetch(const std::vector<Key>& keys);
  std::vector<double> external_distances(const std::vector<std::pair<Key, Key>>& pairs, SceneKind scene);

  MetricConfig cfg_;
  ImageSource source_;
  InnerFn inner_;
  mutable std::mutex mutex_;
  std::map<Key, GrayImage> cache_;
  long simulations_ = 0;
};

struct SelfDistanceResult {
  Eigen::MatrixXd distances;  // d(i, j) = drape_distance(m_i, m_j).d
  std::vector<bool> row_pass;
  bool pass = true;
};

// Row i passes when d(i,i) is strictly below every d(i,j), j != i.
SelfDistanceResult check_self_distance(const Eigen::MatrixXd& distances);
Eigen::MatrixXd distance_matrix(std::span<const MaterialParams> materials, MetricEngine& engine);
SelfDistanceResult validate_self_distance(std::span<const MaterialParams> materials, MetricEngine& engine);

struct RankedCandidate {
  int index = 0;
  double distance = 0.0;
};

// Ascending distance; ties keep candidate order.
std::vector<RankedCandidate> rank_by_similarity(const MaterialParams& ref,
                                                std::span<const MaterialParams> candidates,
                                                MetricEngine& engine);

// Sample-std z-scores; all zero when the values are constant.
std::vector<double> zscores(std::span<const double> values);

void to_json(nlohmann::json& j, const MetricConfig& c);
void from_json(const nlohmann::json& j, MetricConfig& c);
void to_json(nlohmann::json& j, const SceneDistance& d);
void to_json(nlohmann::json& j, const DistanceReport& r);
void to_json(nlohmann::json& j, const SelfDistanceResult& r);

}  // namespace drape
