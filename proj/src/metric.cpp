#include "drape/metric.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "drape/error.hpp"
#include "drape/rng.hpp"

namespace drape {

std::string_view inner_metric_name(InnerMetric m) {
  switch (m) {
    case InnerMetric::kMeanAbsDiff: return "mad";
    case InnerMetric::kSsim: return "ssim";
    case InnerMetric::kExternal: return "external";
  }
  return "ssim";
}

InnerMetric parse_inner_metric(std::string_view name) {
  if (name == "mad" || name == "mean-abs-diff") return InnerMetric::kMeanAbsDiff;
  if (name == "ssim") return InnerMetric::kSsim;
  if (name == "external") return InnerMetric::kExternal;
  throw ConfigError("unknown inner metric '" + std::string(name) + "' (expected mad, ssim or external)");
}

namespace {

void check_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw ConfigError("image dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                      " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

// Separable "valid" filtering with the normalized Gaussian window.
Image filter_valid(const Image& img, const std::array<double, kSsimWindow>& w) {
  const int ow = img.width - kSsimWindow + 1, oh = img.height - kSsimWindow + 1;
  Image rows(ow, img.height), out(ow, oh);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += w[k] * img.at(x + k, y);
      rows.at(x, y) = acc;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += w[k] * rows.at(x, y + k);
      out.at(x, y) = acc;
    }
  return out;
}

}  // namespace

double mean_abs_diff(const Image& a, const Image& b) {
  check_same_size(a, b);
  if (a.empty()) throw ConfigError("empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
  return s / static_cast<double>(a.size());
}

double ssim(const Image& a, const Image& b) {
  check_same_size(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow) throw ConfigError("SSIM needs images of at least 11x11");
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int k = 0; k < kSsimWindow; ++k) {
    const double d = k - kSsimWindow / 2;
    sum += w[k] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
  }
  for (double& v : w) v /= sum;

  Image aa(a.width, a.height), bb(a.width, a.height), ab(a.width, a.height);
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa.values[i] = a.values[i] * a.values[i];
    bb.values[i] = b.values[i] * b.values[i];
    ab.values[i] = a.values[i] * b.values[i];
  }
  const Image mu_a = filter_valid(a, w), mu_b = filter_valid(b, w);
  const Image e_aa = filter_valid(aa, w), e_bb = filter_valid(bb, w), e_ab = filter_valid(ab, w);

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.values[i], mb = mu_b.values[i];
    const double va = e_aa.values[i] - ma * ma;
    const double vb = e_bb.values[i] - mb * mb;
    const double cov = e_ab.values[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double inner_distance(const Image& a, const Image& b, InnerMetric kind) {
  switch (kind) {
    case InnerMetric::kMeanAbsDiff: return mean_abs_diff(a, b);
    case InnerMetric::kSsim: return std::max(0.0, 1.0 - ssim(a, b));
    case InnerMetric::kExternal: break;
  }
  throw ConfigError("external distances are only available through the pairs.json protocol");
}

void MetricConfig::validate() const {
  if (replicates < 1) throw ConfigError("metric needs N >= 1 simulations");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  if (jitter.impulse_sigma < 0.0 || jitter.pin_radius < 0.0) throw ConfigError("jitter magnitudes must be >= 0");
  if (inner == InnerMetric::kExternal && external_dir.empty())
    throw ConfigError("external inner metric needs external_dir");
  capture.validate();
}

double mean_of(std::span<const double> values) {
  if (values.empty()) throw ConfigError("mean of no values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

DistanceReport combine_scenes(SceneDistance hanging, SceneDistance stretch) {
  DistanceReport r;
  r.d_hanging = hanging.value;
  r.d_stretch = stretch.value;
  r.d = (r.d_hanging + r.d_stretch) / 2.0;
  r.hanging = std::move(hanging);
  r.stretch = std::move(stretch);
  return r;
}

void write_pairs_json(const std::filesystem::path& path, const std::vector<ExternalPair>& pairs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    nlohmann::ordered_json e;
    e["pair_id"] = p.pair_id;
    e["image_a_path"] = p.image_a.string();
    e["image_b_path"] = p.image_b.string();
    arr.push_back(e);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << arr.dump(2) << '\n';
}

std::vector<ExternalPair> read_pairs_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<ExternalPair> out;
  for (const auto& e : nlohmann::json::parse(in))
    out.push_back({e.at("pair_id").get<std::string>(), e.at("image_a_path").get<std::string>(),
                   e.at("image_b_path").get<std::string>()});
  return out;
}

std::map<std::string, double> read_distances_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::map<std::string, double> out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("pair_id,distance", 0) != 0)
    throw IoError(path.string() + ": expected header 'pair_id,distance'");
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw IoError("malformed distances row: " + line);
    try {
      out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError("malformed distance value: " + line);
    }
  }
  return out;
}

void write_distances_csv(const std::filesystem::path& path, const std::map<std::string, double>& d) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "pair_id,distance\n";
  out.precision(17);
  for (const auto& [id, v] : d) out << id << ',' << v << '\n';
}

MetricEngine::MetricEngine(MetricConfig cfg) : MetricEngine(std::move(cfg), nullptr, nullptr) {}

MetricEngine::MetricEngine(MetricConfig cfg, ImageSource source, InnerFn inner)
    : cfg_(std::move(cfg)), source_(std::move(source)), inner_(std::move(inner)) {
  cfg_.validate();
}

std::uint64_t MetricEngine::jitter_seed(SceneKind scene, Side side, int replicate) const {
  return derive_seed({cfg_.jitter.seed, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(replicate),
                      static_cast<std::uint64_t>(scene)});
}

GrayImage MetricEngine::simulate_and_render(const MaterialParams& p, SceneKind scene, Side side,
                                            int replicate) const {
  if (source_) return source_(p, scene, side, replicate);
  JitterConfig jitter = cfg_.jitter;
  jitter.seed = jitter_seed(scene, side, replicate);
  const std::string where = std::string(scene_name(scene)) + " scene, jitter seed " + std::to_string(jitter.seed);
  Capture cap;
  try {
    cap = simulate_capture(p, scene, cfg_.capture, jitter);
  } catch (const SolverError& e) {
    throw SolverError(std::string(e.what()) + " [" + where + "]", e.step());
  } catch (const GeometryError& e) {
    throw SolverError(std::string(e.what()) + " [" + where + "]", -1);
  }
  if (!cap.solve.report.converged)
    throw SolverError("did not converge [" + where + "]", cap.solve.report.steps);
  return render_shaded(cap.solve.state, cap.mesh, cfg_.capture.camera, cfg_.light);
}

void MetricEngine::prefetch(const std::vector<Key>& keys) {
  std::vector<Key> missing;
  {
    std::lock_guard lock(mutex_);
    for (const auto& k : keys)
      if (!cache_.contains(k) && std::find(missing.begin(), missing.end(), k) == missing.end()) missing.push_back(k);
  }
  if (missing.empty()) return;
  std::vector<GrayImage> images(missing.size());
  std::vector<std::exception_ptr> errors(missing.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < missing.size(); i = next++) {
      const auto& [values, scene, side, rep] = missing[i];
      try {
        images[i] = simulate_and_render(MaterialParams{values}, static_cast<SceneKind>(scene),
                                        static_cast<Side>(side), rep);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::min<int>(cfg_.jobs, static_cast<int>(missing.size()));
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(work);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(images[i]));
  simulations_ += static_cast<long>(missing.size());
}

GrayImage MetricEngine::render(const MaterialParams& p, SceneKind scene, Side side, int replicate) {
  const Key key{p.values, static_cast<int>(scene), static_cast<int>(side), replicate};
  prefetch({key});
  std::lock_guard lock(mutex_);
  return cache_.at(key);
}

std::size_t MetricEngine::cached_images() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

namespace {

std::string key_name(const std::tuple<ParamVector, int, int, int>& k) {
  const auto& [values, scene, side, rep] = k;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_%c_r%d_%016llx", std::string(scene_name(static_cast<SceneKind>(scene))).c_str(),
                side == 0 ? 'a' : 'b', rep, static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::vector<double> MetricEngine::external_distances(const std::vector<std::pair<Key, Key>>& pairs,
                                                     SceneKind scene) {
  const auto dir = cfg_.external_dir;
  std::filesystem::create_directories(dir / "images");
  std::vector<ExternalPair> listed;
  for (const auto& [ka, kb] : pairs) {
    ExternalPair ep{key_name(ka) + "__" + key_name(kb), dir / "images" / (key_name(ka) + ".png"),
                    dir / "images" / (key_name(kb) + ".png")};
    for (const auto* k : {&ka, &kb}) {
      const auto path = dir / "images" / (key_name(*k) + ".png");
      if (!std::filesystem::exists(path)) {
        std::lock_guard lock(mutex_);
        write_png16(path, cache_.at(*k));
      }
    }
    listed.push_back(std::move(ep));
  }
  const auto pairs_path = dir / "pairs.json";
  const auto dist_path = dir / "distances.csv";
  write_pairs_json(pairs_path, listed);
  if (!cfg_.external_command.empty()) {
    const std::string cmd = cfg_.external_command + " '" + pairs_path.string() + "' '" + dist_path.string() + "'";
    if (std::system(cmd.c_str()) != 0) throw IoError("external distance command failed: " + cmd);
  }
  const auto table = read_distances_csv(dist_path);
  std::vector<double> out;
  for (const auto& p : listed) {
    const auto it = table.find(p.pair_id);
    if (it == table.end())
      throw ConfigError("distances.csv has no entry for pair " + p.pair_id + " (" +
                        std::string(scene_name(scene)) + " scene)");
    out.push_back(it->second);
  }
  return out;
}

SceneDistance MetricEngine::scene_distance(const MaterialParams& pa, const MaterialParams& pb, SceneKind scene) {
  const int n = cfg_.replicates;
  std::vector<Key> keys;
  for (int i = 0; i < n; ++i) keys.emplace_back(pa.values, static_cast<int>(scene), 0, i);
  for (int j = 0; j < n; ++j) keys.emplace_back(pb.values, static_cast<int>(scene), 1, j);
  prefetch(keys);

  SceneDistance out;
  out.replicates = n;
  out.inner.reserve(static_cast<std::size_t>(n * n));
  if (cfg_.inner == InnerMetric::kExternal && !inner_) {
    std::vector<std::pair<Key, Key>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) pairs.emplace_back(keys[i], keys[n + j]);
    out.inner = external_distances(pairs, scene);
  } else {
    std::lock_guard lock(mutex_);
    for (int i = 0; i < n; ++i) {
      const GrayImage& a = cache_.at(keys[i]);
      for (int j = 0; j < n; ++j) {
        const GrayImage& b = cache_.at(keys[n + j]);
        out.inner.push_back(inner_ ? inner_(a, b) : inner_distance(a, b, cfg_.inner));
      }
    }
  }
  for (double v : out.inner)
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("inner distance must be finite and non-negative");
  out.value = mean_of(out.inner);
  return out;
}

DistanceReport MetricEngine::drape_distance(const MaterialParams& pa, const MaterialParams& pb) {
  auto hanging = scene_distance(pa, pb, SceneKind::kHanging);
  auto stretch = scene_distance(pa, pb, SceneKind::kStretch);
  return combine_scenes(std::move(hanging), std::move(stretch));
}

SelfDistanceResult check_self_distance(const Eigen::MatrixXd& d) {
  SelfDistanceResult r;
  r.distances = d;
  r.row_pass.assign(static_cast<std::size_t>(d.rows()), true);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      if (j != i && !(d(i, i) < d(i, j))) r.row_pass[i] = false;
    r.pass = r.pass && r.row_pass[i];
  }
  return r;
}

Eigen::MatrixXd distance_matrix(std::span<const MaterialParams> materials, MetricEngine& engine) {
  const auto n = static_cast<Eigen::Index>(materials.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = engine.drape_distance(materials[i], materials[j]).d;
  return d;
}

SelfDistanceResult validate_self_distance(std::span<const MaterialParams> materials, MetricEngine& engine) {
  if (materials.empty()) throw ConfigError("self-distance validation needs at least one material");
  return check_self_distance(distance_matrix(materials, engine));
}

std::vector<RankedCandidate> rank_by_similarity(const MaterialParams& ref, std::span<const MaterialParams> candidates,
                                                MetricEngine& engine) {
  if (candidates.empty()) throw ConfigError("ranking needs at least one candidate");
  std::vector<RankedCandidate> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    out.push_back({static_cast<int>(i), engine.drape_distance(ref, candidates[i]).d});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.distance < b.distance; });
  return out;
}

std::vector<double> zscores(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.size() < 2) return out;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  if (sd > 0.0)
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - m) / sd;
  return out;
}

void to_json(nlohmann::json& j, const MetricConfig& c) {
  j = nlohmann::json{{"replicates", c.replicates},
                     {"jitter", c.jitter},
                     {"inner", inner_metric_name(c.inner)},
                     {"external_dir", c.external_dir.string()},
                     {"external_command", c.external_command},
                     {"capture", c.capture},
                     {"light", {c.light.x(), c.light.y(), c.light.z()}},
                     {"jobs", c.jobs}};
}

void from_json(const nlohmann::json& j, MetricConfig& c) {
  c = MetricConfig{};
  c.replicates = j.value("replicates", c.replicates);
  if (j.contains("jitter")) c.jitter = j.at("jitter").get<JitterConfig>();
  if (j.contains("inner")) c.inner = parse_inner_metric(j.at("inner").get<std::string>());
  c.external_dir = j.value("external_dir", std::string());
  c.external_command = j.value("external_command", std::string());
  if (j.contains("capture")) c.capture = j.at("capture").get<CaptureConfig>();
  if (j.contains("light")) {
    const auto v = j.at("light").get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError("light needs 3 components");
    c.light = Vec3(v[0], v[1], v[2]).normalized();
  }
  c.jobs = j.value("jobs", c.jobs);
  c.validate();
}

void to_json(nlohmann::json& j, const SceneDistance& d) {
  j = nlohmann::json{{"value", d.value}, {"replicates", d.replicates}, {"inner", d.inner}};
}

void to_json(nlohmann::json& j, const DistanceReport& r) {
  j = nlohmann::json{{"d", r.d}, {"d_hanging", r.d_hanging}, {"d_stretch", r.d_stretch},
                     {"hanging", r.hanging}, {"stretch", r.stretch}};
}

void to_json(nlohmann::json& j, const SelfDistanceResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> flat;
  for (Eigen::Index i = 0; i < r.distances.rows(); ++i) {
    std::vector<double> row(r.distances.cols());
    for (Eigen::Index k = 0; k < r.distances.cols(); ++k) flat.push_back(row[k] = r.distances(i, k));
    rows.push_back(row);
  }
  const auto z = zscores(flat);
  nlohmann::json zrows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.distances.rows(); ++i)
    zrows.push_back(std::vector<double>(z.begin() + i * r.distances.cols(), z.begin() + (i + 1) * r.distances.cols()));
  std::vector<bool> rp(r.row_pass.begin(), r.row_pass.end());
  j = nlohmann::json{{"pass", r.pass}, {"row_pass", rp}, {"distances", rows}, {"zscores", zrows}};
}

}  // namespace drape
