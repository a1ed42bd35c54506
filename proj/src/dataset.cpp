#include "drape/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "drape/error.hpp"
#include "drape/rng.hpp"

namespace drape {

void CaptureConfig::validate() const {
  if (!(fabric_size > 0.0) || !(edge_length > 0.0) || edge_length > fabric_size)
    throw ConfigError("capture needs fabric_size > 0 and 0 < edge_length <= fabric_size");
  solver.validate();
  camera.validate();
}

void GenConfig::validate() const {
  sampler.validate();
  capture.validate();
  augment.validate();
  if (count <= 0) throw ConfigError("count must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0,1)");
  if (jobs <= 0) throw ConfigError("jobs must be positive");
  if (output_dir.empty()) throw ConfigError("output directory required");
}

Capture simulate_capture(const MaterialParams& p, SceneKind scene, const CaptureConfig& capture,
                         const std::optional<JitterConfig>& jitter) {
  p.validate();
  Capture out{make_grid_mesh(capture.fabric_size, capture.edge_length, p.density()), {}};
  const Scene sc = setup_scene(scene, out.mesh);
  out.solve = solve_static(sc, out.mesh, p, capture.solver, jitter);
  return out;
}

std::vector<int> val_sample_ids(int count, double val_fraction, std::uint64_t seed) {
  std::vector<int> ids(static_cast<std::size_t>(count));
  std::iota(ids.begin(), ids.end(), 0);
  // Fisher-Yates with explicit draws so the permutation is library independent.
  auto rng = make_rng({seed, 0x53504c54ULL});
  for (int i = count - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(ids[i], ids[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::lround(count * val_fraction));
  ids.resize(std::min(n_val, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

std::string image_name(int sample_id, SceneKind scene, int view) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%05d_%s_v%02d.png", sample_id, std::string(scene_name(scene)).c_str(), view);
  return buf;
}

struct SampleOutcome {
  std::vector<ManifestRecord> records;
  std::vector<QuarantineRecord> quarantined;
};

SampleOutcome generate_sample(const GenConfig& cfg, int sample_id, const std::string& split) {
  SampleOutcome out;
  const MaterialParams p = sample_params(cfg.sampler, static_cast<std::uint64_t>(sample_id));
  const auto inclinations = sweep_inclinations();
  for (SceneKind scene : {SceneKind::kHanging, SceneKind::kStretch}) {
    Capture cap;
    try {
      cap = simulate_capture(p, scene, cfg.capture);
    } catch (const SolverError& e) {
      out.quarantined.push_back({sample_id, p, scene, e.what(), e.step()});
      continue;
    } catch (const GeometryError& e) {
      out.quarantined.push_back({sample_id, p, scene, e.what(), -1});
      continue;
    }
    if (!cap.solve.report.converged) {
      out.quarantined.push_back({sample_id, p, scene, "did not converge within max_steps", cap.solve.report.steps});
      continue;
    }
    const auto views = camera_sweep(cap.solve.state, cap.mesh, cfg.capture.camera);
    for (int v = 0; v < kSweepViews; ++v) {
      ManifestRecord r;
      r.sample_id = sample_id;
      r.params = p;
      r.scene = scene;
      r.view_index = v;
      r.inclination_deg = inclinations[v];
      r.augment_seed = derive_seed({cfg.seed, static_cast<std::uint64_t>(sample_id),
                                    static_cast<std::uint64_t>(scene), static_cast<std::uint64_t>(v)});
      r.path = "images/" + image_name(sample_id, scene, v);
      r.split = split;
      const DepthImage img = cfg.apply_augment ? augment(views[v], cfg.augment, r.augment_seed) : views[v];
      const auto file = cfg.output_dir / r.path;
      write_png16(file, img.image);
      auto meta = depth_metadata(img, incline_camera(cfg.capture.camera, r.inclination_deg));
      meta["augmented"] = cfg.apply_augment;
      meta["augment_seed"] = r.augment_seed;
      write_sidecar(file, meta);
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

DatasetManifest generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir / "images");
  const auto val_ids = val_sample_ids(cfg.count, cfg.val_fraction, cfg.seed);

  std::vector<SampleOutcome> outcomes(static_cast<std::size_t>(cfg.count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int id = next++; id < cfg.count; id = next++) {
      try {
        const bool val = std::binary_search(val_ids.begin(), val_ids.end(), id);
        outcomes[id] = generate_sample(cfg, id, val ? "val" : "train");
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int jobs = std::min(cfg.jobs, cfg.count);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  DatasetManifest m;
  for (auto& o : outcomes) {
    std::move(o.records.begin(), o.records.end(), std::back_inserter(m.records));
    std::move(o.quarantined.begin(), o.quarantined.end(), std::back_inserter(m.quarantined));
  }
  write_manifest_file(cfg.output_dir / "manifest.jsonl", m);
  std::ofstream q(cfg.output_dir / "quarantine.jsonl", std::ios::binary);
  if (!q) throw IoError("cannot write quarantine file");
  write_quarantine(q, m);
  return m;
}

namespace {

nlohmann::ordered_json record_json(const ManifestRecord& r) {
  nlohmann::json params = r.params;
  nlohmann::ordered_json p;
  for (auto name : kCoefficientNames) p[std::string(name)] = params[std::string(name)];
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["params"] = p;
  j["scene"] = scene_name(r.scene);
  j["view_index"] = r.view_index;
  j["inclination_deg"] = r.inclination_deg;
  j["augment_seed"] = r.augment_seed;
  j["path"] = r.path;
  j["split"] = r.split;
  return j;
}

}  // namespace

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  for (const auto& r : m.records) out << record_json(r).dump() << '\n';
}

void write_quarantine(std::ostream& out, const DatasetManifest& m) {
  for (const auto& q : m.quarantined) {
    nlohmann::ordered_json j;
    j["sample_id"] = q.sample_id;
    j["scene"] = scene_name(q.scene);
    j["params"] = nlohmann::json(q.params);
    j["error"] = q.error;
    j["step"] = q.step;
    out << j.dump() << '\n';
  }
}

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.sample_id = j.at("sample_id").get<int>();
      r.params = j.at("params").get<MaterialParams>();
      r.scene = parse_scene(j.at("scene").get<std::string>());
      r.view_index = j.at("view_index").get<int>();
      r.inclination_deg = j.at("inclination_deg").get<double>();
      r.augment_seed = j.at("augment_seed").get<std::uint64_t>();
      r.path = j.at("path").get<std::string>();
      r.split = j.at("split").get<std::string>();
      if (r.split != "train" && r.split != "val") throw ConfigError("split must be train or val");
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void write_manifest_file(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_manifest(out, m);
}

DatasetManifest read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_manifest(in);
}

DatasetStats parameter_stats(std::span<const MaterialParams> params) {
  if (params.size() < 3) throw ConfigError("dataset statistics need at least 3 samples");
  DatasetStats s;
  s.samples = static_cast<int>(params.size());
  std::array<std::vector<double>, kNumCoefficients> cols;
  for (std::size_t c = 0; c < kNumCoefficients; ++c) {
    for (const auto& p : params) cols[c].push_back(p.values[c]);
    s.min[c] = *std::min_element(cols[c].begin(), cols[c].end());
    s.max[c] = *std::max_element(cols[c].begin(), cols[c].end());
    s.mean[c] = std::accumulate(cols[c].begin(), cols[c].end(), 0.0) / static_cast<double>(params.size());
    if (s.min[c] == s.max[c]) s.constant_columns.emplace_back(kCoefficientNames[c]);
  }
  for (std::size_t a = 0; a < kNumCoefficients; ++a) {
    for (std::size_t b = 0; b < kNumCoefficients; ++b) {
      const bool constant = s.min[a] == s.max[a] || s.min[b] == s.max[b];
      if (constant) s.spearman[a][b] = kUndefined;
      else if (a == b) s.spearman[a][b] = 1.0;
      else if (b < a) s.spearman[a][b] = s.spearman[b][a];
      else s.spearman[a][b] = spearman(cols[a], cols[b]);
    }
  }
  s.mean_stretch_correlation = (s.spearman[0][1] + s.spearman[0][2] + s.spearman[1][2]) / 3.0;
  return s;
}

DatasetStats dataset_stats(const DatasetManifest& manifest) {
  std::vector<int> seen;
  std::vector<MaterialParams> params;
  int train = 0, val = 0;
  for (const auto& r : manifest.records) {
    if (std::find(seen.begin(), seen.end(), r.sample_id) != seen.end()) continue;
    seen.push_back(r.sample_id);
    params.push_back(r.params);
    (r.split == "val" ? val : train) += 1;
  }
  DatasetStats s = parameter_stats(params);
  s.train_samples = train;
  s.val_samples = val;
  s.quarantined = static_cast<int>(manifest.quarantined.size());
  return s;
}

void to_json(nlohmann::json& j, const DatasetStats& s) {
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : s.spearman) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    matrix.push_back(r);
  }
  j = nlohmann::json{{"samples", s.samples},
                     {"coefficients", kCoefficientNames},
                     {"spearman", matrix},
                     {"constant_columns", s.constant_columns},
                     {"min", s.min},
                     {"max", s.max},
                     {"mean", s.mean},
                     {"mean_stretch_correlation", std::isnan(s.mean_stretch_correlation)
                                                      ? nlohmann::json(nullptr)
                                                      : nlohmann::json(s.mean_stretch_correlation)},
                     {"train_samples", s.train_samples},
                     {"val_samples", s.val_samples},
                     {"quarantined", s.quarantined}};
}

std::string stats_markdown(const DatasetStats& s) {
  std::ostringstream out;
  out << "Spearman correlation between parameters (" << s.samples << " samples)\n\n|";
  for (auto n : kCoefficientNames) out << " | " << n;
  out << " |\n|---";
  for (std::size_t i = 0; i < kNumCoefficients; ++i) out << "|---:";
  out << "|\n";
  char buf[32];
  for (std::size_t a = 0; a < kNumCoefficients; ++a) {
    out << "| " << kCoefficientNames[a];
    for (std::size_t b = 0; b < kNumCoefficients; ++b) {
      if (std::isnan(s.spearman[a][b])) out << " | n/a";
      else {
        std::snprintf(buf, sizeof buf, "%.2f", s.spearman[a][b]);
        out << " | " << buf;
      }
    }
    out << " |\n";
  }
  return out.str();
}

MaterialParams with_param(const MaterialParams& base, const std::string& param, double value) {
  MaterialParams p = base;
  if (param == "kBending") {
    p.values[3] = p.values[4] = p.values[5] = value;
  } else if (param == "kStretch") {
    p.values[0] = p.values[1] = p.values[2] = value;
  } else {
    p.values[coefficient_index(param)] = value;
  }
  p.validate();
  return p;
}

SweepReport sweep_report(const std::string& param, const std::vector<double>& values,
                         const MaterialParams& fixed, const CaptureConfig& capture) {
  capture.validate();
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw ConfigError("sweep values must be strictly increasing");
  SweepReport rep{param, values, {}};
  const Camera& cam = capture.camera;
  const double dist = (cam.target - cam.position).norm();
  const double footprint = 2.0 * dist * std::tan(0.5 * cam.fov_deg * std::numbers::pi / 180.0) / cam.height;

  for (double v : values) {
    const MaterialParams p = with_param(fixed, param, v);
    for (SceneKind scene : {SceneKind::kHanging, SceneKind::kStretch}) {
      SweepCell cell;
      cell.value = v;
      cell.scene = scene;
      try {
        const Capture cap = simulate_capture(p, scene, capture);
        cell.report = cap.solve.report;
        cell.ok = cap.solve.report.converged;
        if (!cell.ok) cell.error = "did not converge within max_steps";
        cell.lowest_y = std::numeric_limits<double>::infinity();
        for (const auto& x : cap.solve.state.positions) cell.lowest_y = std::min(cell.lowest_y, x.y());
        cell.depth = render_depth(cap.solve.state, cap.mesh, cam);
        cell.shaded = render_shaded(cap.solve.state, cap.mesh, cam);
        cell.silhouette_pixels = std::count_if(cell.depth.image.values.begin(), cell.depth.image.values.end(),
                                               [](double d) { return d < kBackgroundDepth; });
        cell.silhouette_area = static_cast<double>(cell.silhouette_pixels) * footprint * footprint;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      rep.cells.push_back(std::move(cell));
    }
  }
  return rep;
}

Image sweep_grid(const SweepReport& report, bool shaded) {
  std::vector<Image> cells;
  for (const auto& c : report.cells) cells.push_back(shaded ? c.shaded : c.depth.image);
  return tile_images(cells, static_cast<int>(report.values.size()), 2, shaded ? 0.0 : 1.0);
}

void to_json(nlohmann::json& j, const SweepReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"value", c.value},
                     {"scene", scene_name(c.scene)},
                     {"ok", c.ok},
                     {"error", c.error},
                     {"lowest_y", c.lowest_y},
                     {"silhouette_pixels", c.silhouette_pixels},
                     {"silhouette_area", c.silhouette_area},
                     {"convergence", c.report}});
  }
  j = nlohmann::json{{"param", r.param}, {"values", r.values}, {"cells", cells}};
}

void to_json(nlohmann::json& j, const CaptureConfig& c) {
  j = nlohmann::json{{"fabric_size", c.fabric_size},
                     {"edge_length", c.edge_length},
                     {"solver", c.solver},
                     {"camera", c.camera}};
}

void from_json(const nlohmann::json& j, CaptureConfig& c) {
  c = CaptureConfig{};
  c.fabric_size = j.value("fabric_size", c.fabric_size);
  c.edge_length = j.value("edge_length", c.edge_length);
  if (j.contains("solver")) c.solver = j.at("solver").get<SolverConfig>();
  if (j.contains("camera")) c.camera = j.at("camera").get<Camera>();
  c.validate();
}

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{{"sampler", c.sampler},
                     {"capture", c.capture},
                     {"augment", c.augment},
                     {"apply_augment", c.apply_augment},
                     {"count", c.count},
                     {"val_fraction", c.val_fraction},
                     {"seed", c.seed},
                     {"output_dir", c.output_dir.string()},
                     {"jobs", c.jobs}};
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  c = GenConfig{};
  if (j.contains("sampler")) c.sampler = j.at("sampler").get<SamplerConfig>();
  if (j.contains("capture")) c.capture = j.at("capture").get<CaptureConfig>();
  if (j.contains("augment")) c.augment = j.at("augment").get<AugmentPolicy>();
  c.apply_augment = j.value("apply_augment", c.apply_augment);
  c.count = j.value("count", c.count);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.seed = j.value("seed", c.seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  c.jobs = j.value("jobs", c.jobs);
}

}  // namespace drape
