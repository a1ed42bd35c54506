#include "drape/cli.hpp"

#include <png.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "drape/augment.hpp"
#include "drape/dataset.hpp"
#include "drape/embed.hpp"
#include "drape/error.hpp"
#include "drape/image.hpp"
#include "drape/metric.hpp"
#include "drape/render.hpp"
#include "drape/scene.hpp"
#include "drape/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace drape {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Rethrows JSON type errors from config parsing as configuration errors.
template <typename T>
T parse_config(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

struct NamedMaterial {
  std::string name;
  MaterialParams params;
};

// A JSON array whose entries are either parameter objects or {"name", "params"}.
std::vector<NamedMaterial> load_materials(const fs::path& path) {
  json j = load_json(path);
  if (j.is_object() && j.contains("materials")) j = j.at("materials");
  if (!j.is_array() || j.empty()) throw ConfigError(path.string() + ": expected a non-empty array of materials");
  std::vector<NamedMaterial> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    NamedMaterial m;
    m.name = e.value("name", "m" + std::to_string(i));
    m.params = parse_config<MaterialParams>(e.contains("params") ? e.at("params") : e, path.string());
    out.push_back(std::move(m));
  }
  return out;
}

MaterialParams load_params(const fs::path& path) { return parse_config<MaterialParams>(load_json(path), path.string()); }

std::string svg_scatter(const Embedding& e, const std::vector<std::string>& labels) {
  const int size = 480, pad = 40;
  double lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
  if (e.points.rows() > 0) {
    lo_x = e.points.col(0).minCoeff();
    hi_x = e.points.col(0).maxCoeff();
    lo_y = e.points.cols() > 1 ? e.points.col(1).minCoeff() : 0.0;
    hi_y = e.points.cols() > 1 ? e.points.col(1).maxCoeff() : 0.0;
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Eigen::Index i = 0; i < e.points.rows(); ++i) {
    const double x = pad + (e.points(i, 0) - lo_x) / span * (size - 2 * pad);
    const double yv = e.points.cols() > 1 ? e.points(i, 1) : 0.0;
    const double y = size - pad - (yv - lo_y) / span * (size - 2 * pad);
    s << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"4\" fill=\"black\"/>";
    s << "<text x=\"" << x + 6 << "\" y=\"" << y - 6 << "\" font-size=\"12\">"
      << (static_cast<std::size_t>(i) < labels.size() ? labels[i] : std::to_string(i)) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// Correlation matrix as an image: r = -1 black, r = 1 white, undefined mid-gray.
Image correlation_heatmap(const CorrelationMatrix& m, int cell = 24) {
  const int n = static_cast<int>(kNumCoefficients);
  Image img(n * cell, n * cell, 0.5);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double v = std::isnan(m[a][b]) ? 0.5 : 0.5 * (m[a][b] + 1.0);
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x) img.at(b * cell + x, a * cell + y) = v;
    }
  return img;
}

struct Context {
  fs::path out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  std::ostream* out = nullptr;
  json config;                     // effective configuration, hashed into the run manifest
  std::vector<std::string> outputs;  // files written, relative to out_dir

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }
};

void write_run_manifest(const Context& ctx, const std::string& sub, double wall, const std::vector<std::string>& argv) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(ctx.config.dump())));
  json j = {{"subcommand", sub},
            {"config_hash", hash},
            {"config", ctx.config},
            {"seed", ctx.seed},
            {"jobs", ctx.jobs},
            {"versions",
             {{"drape", std::string(kVersion)},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"libpng", PNG_LIBPNG_VER_STRING},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11", CLI11_VERSION}}},
            {"argv", argv},
            {"outputs", ctx.outputs},
            {"wall_seconds", wall}};
  save_json(ctx.out_dir / "run_manifest.json", j);
}

// ---- subcommands -----------------------------------------------------------

struct SimulateArgs {
  std::string scene, params, config;
  double edge = 0.0;
  std::optional<std::uint64_t> jitter_seed;
};

void cmd_simulate(Context& ctx, const SimulateArgs& a) {
  const SceneKind kind = parse_scene(a.scene);
  const MaterialParams p = load_params(a.params);
  CaptureConfig cap = a.config.empty() ? CaptureConfig{} : parse_config<CaptureConfig>(load_json(a.config), a.config);
  if (a.edge > 0.0) cap.edge_length = a.edge;
  cap.validate();
  std::optional<JitterConfig> jitter;
  if (a.jitter_seed) jitter = JitterConfig{*a.jitter_seed};
  ctx.config = {{"scene", a.scene}, {"params", p}, {"capture", cap}};
  if (jitter) ctx.config["jitter"] = *jitter;

  const Capture c = simulate_capture(p, kind, cap, jitter);
  std::ofstream obj(ctx.output("mesh.obj"), std::ios::binary);
  write_obj(obj, c.mesh, c.solve.state.positions);
  json report = c.solve.report;
  report.erase("wall_seconds");  // keep the primary artifact reproducible
  save_json(ctx.output("convergence.json"), report);
  *ctx.out << "converged=" << (c.solve.report.converged ? "true" : "false") << " steps=" << c.solve.report.steps
           << " residual=" << c.solve.report.max_residual << '\n';
  if (!c.solve.report.converged) throw SolverError("did not converge within max_steps", c.solve.report.steps);
}

struct RenderArgs {
  std::string mesh, camera;
  bool shaded = false, sweep = false;
};

void cmd_render(Context& ctx, const RenderArgs& a) {
  std::ifstream in(a.mesh);
  if (!in) throw ConfigError("cannot read " + a.mesh);
  const ObjMesh m = read_obj(in);
  const Camera cam = a.camera.empty() ? Camera{} : parse_config<Camera>(load_json(a.camera), a.camera);
  ctx.config = {{"mesh", fs::path(a.mesh).filename().string()}, {"camera", cam}, {"shaded", a.shaded}, {"sweep", a.sweep}};

  const DepthImage depth = render_depth(m.positions, m.triangles, cam);
  const auto dpath = ctx.output("depth.png");
  write_png16(dpath, depth.image);
  write_sidecar(dpath, depth_metadata(depth, cam));
  ctx.outputs.push_back("depth.png.json");
  if (a.shaded) {
    const auto spath = ctx.output("shaded.png");
    write_png16(spath, render_shaded(m.positions, m.triangles, cam));
    write_sidecar(spath, {{"camera", cam}, {"ambient", kAmbient}, {"albedo", kAlbedo}});
    ctx.outputs.push_back("shaded.png.json");
  }
  if (a.sweep) {
    const auto incl = sweep_inclinations();
    for (int v = 0; v < kSweepViews; ++v) {
      const Camera c = incline_camera(cam, incl[v]);
      const DepthImage img = render_depth(m.positions, m.triangles, c);
      char name[32];
      std::snprintf(name, sizeof name, "depth_v%02d.png", v);
      const auto path = ctx.output(name);
      write_png16(path, img.image);
      auto meta = depth_metadata(img, c);
      meta["inclination_deg"] = incl[v];
      write_sidecar(path, meta);
    }
  }
}

struct SweepArgs {
  std::string param, params, config;
  std::vector<double> values;
};

void cmd_sweep(Context& ctx, const SweepArgs& a) {
  const MaterialParams fixed = load_params(a.params);
  const CaptureConfig cap = a.config.empty() ? CaptureConfig{} : parse_config<CaptureConfig>(load_json(a.config), a.config);
  ctx.config = {{"param", a.param}, {"values", a.values}, {"fixed", fixed}, {"capture", cap}};
  with_param(fixed, a.param, a.values.empty() ? 1.0 : a.values.front());  // validates the name early

  const SweepReport rep = sweep_report(a.param, a.values, fixed, cap);
  json j = rep;
  for (auto& c : j["cells"]) c["convergence"].erase("wall_seconds");
  save_json(ctx.output("sweep.json"), j);
  write_png16(ctx.output("sweep_depth.png"), sweep_grid(rep, false));
  write_png16(ctx.output("sweep_shaded.png"), sweep_grid(rep, true));
  int failures = 0;
  for (const auto& c : rep.cells) {
    *ctx.out << a.param << '=' << c.value << ' ' << scene_name(c.scene) << ' '
             << (c.ok ? "ok" : "FAILED: " + c.error) << " lowest_y=" << c.lowest_y << '\n';
    failures += c.ok ? 0 : 1;
  }
  if (failures > 0) throw std::runtime_error(std::to_string(failures) + " sweep cell(s) failed");
}

struct AugmentArgs {
  std::string input, policy, output;
  std::uint64_t sample_seed = 0;
  bool equalize_after = false;
};

void cmd_augment(Context& ctx, const AugmentArgs& a) {
  const Image img = read_png16(a.input);
  AugmentPolicy policy = a.policy.empty() ? AugmentPolicy{} : parse_config<AugmentPolicy>(load_json(a.policy), a.policy);
  if (a.policy.empty() && ctx.seed_given) policy.seed = ctx.seed;
  ctx.config = {{"input", fs::path(a.input).filename().string()}, {"policy", policy},
                {"sample_seed", a.sample_seed}, {"equalize", a.equalize_after}};
  Image out = augment(img, policy, a.sample_seed);
  if (a.equalize_after) out = equalize(out);
  const std::string name = a.output.empty() ? "augmented.png" : a.output;
  write_png16(ctx.output(name), out);
}

struct GenArgs {
  std::string config;
  int count = 0;
};

void cmd_gen_dataset(Context& ctx, const GenArgs& a) {
  GenConfig cfg = a.config.empty() ? GenConfig{} : parse_config<GenConfig>(load_json(a.config), a.config);
  if (a.count > 0) cfg.count = a.count;
  if (ctx.seed_given) cfg.seed = cfg.sampler.seed = cfg.augment.seed = ctx.seed;
  cfg.jobs = ctx.jobs;
  cfg.output_dir = ctx.out_dir;
  json effective = cfg;
  effective.erase("output_dir");
  effective.erase("jobs");  // output does not depend on parallelism
  ctx.config = effective;
  const DatasetManifest m = generate_dataset(cfg);
  ctx.outputs.insert(ctx.outputs.end(), {"manifest.jsonl", "quarantine.jsonl", "images/"});
  *ctx.out << "records=" << m.records.size() << " quarantined=" << m.quarantined.size() << '\n';
}

void cmd_stats(Context& ctx, const std::string& manifest) {
  const DatasetManifest m = read_manifest_file(manifest);
  fs::path q = fs::path(manifest).parent_path() / "quarantine.jsonl";
  DatasetStats s = dataset_stats(m);
  if (fs::exists(q)) {
    std::ifstream in(q);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) n += line.empty() ? 0 : 1;
    s.quarantined = n;
  }
  ctx.config = {{"manifest", fs::path(manifest).filename().string()}};
  save_json(ctx.output("stats.json"), s);
  save_text(ctx.output("stats.md"), stats_markdown(s));
  write_png8(ctx.output("spearman.png"), correlation_heatmap(s.spearman));
  *ctx.out << stats_markdown(s);
}

struct MetricArgs {
  std::string config, im;
  int n = 0;
};

MetricConfig metric_config(Context& ctx, const MetricArgs& a) {
  MetricConfig cfg = a.config.empty() ? MetricConfig{} : parse_config<MetricConfig>(load_json(a.config), a.config);
  if (!a.im.empty()) cfg.inner = parse_inner_metric(a.im);
  if (a.n > 0) cfg.replicates = a.n;
  if (ctx.seed_given) cfg.jitter.seed = ctx.seed;
  cfg.jobs = ctx.jobs;
  if (cfg.inner == InnerMetric::kExternal && cfg.external_dir.empty()) cfg.external_dir = ctx.out_dir / "external";
  cfg.validate();
  return cfg;
}

json metric_config_json(const MetricConfig& cfg) {
  json j = cfg;
  j.erase("jobs");
  return j;
}

void cmd_distance(Context& ctx, const MetricArgs& m, const std::string& pa_path, const std::string& pb_path) {
  const MetricConfig cfg = metric_config(ctx, m);
  const MaterialParams pa = load_params(pa_path), pb = load_params(pb_path);
  ctx.config = {{"metric", metric_config_json(cfg)}, {"a", pa}, {"b", pb}};
  MetricEngine engine(cfg);
  const DistanceReport r = engine.drape_distance(pa, pb);
  save_json(ctx.output("distance.json"), r);
  *ctx.out << "d=" << r.d << " d_hanging=" << r.d_hanging << " d_stretch=" << r.d_stretch << '\n';
}

void cmd_rank(Context& ctx, const MetricArgs& m, const std::string& ref_path, const std::string& cand_path) {
  const MetricConfig cfg = metric_config(ctx, m);
  const MaterialParams ref = load_params(ref_path);
  const auto cands = load_materials(cand_path);
  std::vector<MaterialParams> params;
  json listed = json::array();
  for (const auto& c : cands) {
    params.push_back(c.params);
    listed.push_back({{"name", c.name}, {"params", c.params}});
  }
  ctx.config = {{"metric", metric_config_json(cfg)}, {"reference", ref}, {"candidates", listed}};
  MetricEngine engine(cfg);
  const auto ranked = rank_by_similarity(ref, params, engine);
  json out = json::array();
  int pos = 1;
  for (const auto& r : ranked) {
    out.push_back({{"rank", pos}, {"index", r.index}, {"name", cands[r.index].name}, {"distance", r.distance}});
    *ctx.out << pos++ << ". " << cands[r.index].name << " d=" << r.distance << '\n';
  }
  save_json(ctx.output("ranking.json"), out);
}

void cmd_validate_metric(Context& ctx, const MetricArgs& m, const std::string& materials_path) {
  const MetricConfig cfg = metric_config(ctx, m);
  const auto mats = load_materials(materials_path);
  std::vector<MaterialParams> params;
  std::vector<std::string> names;
  json listed = json::array();
  for (const auto& x : mats) {
    params.push_back(x.params);
    names.push_back(x.name);
    listed.push_back({{"name", x.name}, {"params", x.params}});
  }
  ctx.config = {{"metric", metric_config_json(cfg)}, {"materials", listed}};
  MetricEngine engine(cfg);
  const SelfDistanceResult r = validate_self_distance(params, engine);
  json j = r;
  j["names"] = names;
  save_json(ctx.output("self_distance.json"), j);
  *ctx.out << "self-distance axiom: " << (r.pass ? "PASS" : "FAIL") << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    *ctx.out << names[i] << (r.row_pass[i] ? " pass" : " FAIL");
    for (Eigen::Index k = 0; k < r.distances.cols(); ++k) *ctx.out << ' ' << r.distances(i, k);
    *ctx.out << '\n';
  }
}

struct EmbedArgs {
  std::string triplets, config, labels;
  int n_items = 0, dims = 2;
};

void cmd_embed(Context& ctx, const EmbedArgs& a) {
  std::ifstream in(a.triplets);
  if (!in) throw ConfigError("cannot read " + a.triplets);
  const auto triplets = read_triplets_csv(in);
  if (triplets.empty()) throw ConfigError("no triplets in " + a.triplets);
  TsteOptions opt = a.config.empty() ? TsteOptions{} : parse_config<TsteOptions>(load_json(a.config), a.config);
  if (ctx.seed_given) opt.seed = ctx.seed;
  int n = a.n_items;
  for (const auto& t : triplets) n = std::max({n, t.reference + 1, t.chosen + 1, t.rejected + 1});
  std::vector<std::string> labels;
  if (!a.labels.empty()) {
    std::istringstream ls(a.labels);
    for (std::string s; std::getline(ls, s, ',');) labels.push_back(s);
  }
  ctx.config = {{"triplets", fs::path(a.triplets).filename().string()}, {"n_items", n}, {"dims", a.dims}, {"tste", opt}};
  const Embedding e = tste_embed(triplets, n, a.dims, opt);
  const double agreement = triplet_agreement(e, triplets);
  std::ostringstream csv;
  write_embedding_csv(csv, e, labels);
  save_text(ctx.output("embedding.csv"), csv.str());
  save_json(ctx.output("embedding.json"), {{"loss", e.loss}, {"agreement", agreement}, {"restart", e.restart},
                                           {"iterations", e.history.size() - 1}});
  if (a.dims >= 1) save_text(ctx.output("embedding.svg"), svg_scatter(e, labels));
  *ctx.out << "loss=" << e.loss << " agreement=" << agreement << '\n';
}

struct ReportArgs {
  std::string manifest, materials, params, sweep_param;
  std::vector<double> sweep_values;
  MetricArgs metric;
};

void cmd_report(Context& ctx, const ReportArgs& a) {
  if (a.manifest.empty() && a.materials.empty() && a.sweep_param.empty())
    throw ConfigError("report needs at least one of --manifest, --materials, --sweep-param");
  const MetricConfig mc = metric_config(ctx, a.metric);
  std::ostringstream md;
  md << "# Drape report\n\n";
  json cfg;

  if (!a.manifest.empty()) {
    const DatasetStats s = dataset_stats(read_manifest_file(a.manifest));
    md << "## Parameter correlations\n\n" << stats_markdown(s) << "\n";
    write_png8(ctx.output("report_spearman.png"), correlation_heatmap(s.spearman));
    md << "![Spearman matrix](report_spearman.png)\n\n";
    cfg["manifest"] = fs::path(a.manifest).filename().string();
  }
  if (!a.sweep_param.empty()) {
    if (a.params.empty()) throw ConfigError("--sweep-param needs --params");
    const MaterialParams fixed = load_params(a.params);
    const SweepReport rep = sweep_report(a.sweep_param, a.sweep_values, fixed, mc.capture);
    write_png8(ctx.output("report_sweep.png"), sweep_grid(rep, true));
    md << "## Parameter sweep: " << a.sweep_param << "\n\n";
    md << "| value | scene | converged | lowest y (m) | silhouette (m^2) |\n|---:|---|---|---:|---:|\n";
    for (const auto& c : rep.cells)
      md << "| " << c.value << " | " << scene_name(c.scene) << " | " << (c.ok ? "yes" : "no") << " | "
         << c.lowest_y << " | " << c.silhouette_area << " |\n";
    md << "\nRows are values, columns hanging and stretch.\n\n![sweep](report_sweep.png)\n\n";
    cfg["sweep"] = {{"param", a.sweep_param}, {"values", a.sweep_values}, {"fixed", fixed}, {"capture", mc.capture}};
  }
  if (!a.materials.empty()) {
    const auto mats = load_materials(a.materials);
    std::vector<MaterialParams> params;
    for (const auto& m : mats) params.push_back(m.params);
    MetricEngine engine(mc);
    const Eigen::MatrixXd d = distance_matrix(params, engine);
    std::vector<double> flat(d.data(), d.data() + d.size());
    const auto z = zscores(flat);
    md << "## Drape distances as z-scores\n\n|";
    for (const auto& m : mats) md << " | " << m.name;
    md << " |\n|---";
    for (std::size_t i = 0; i < mats.size(); ++i) md << "|---:";
    md << "|\n";
    char buf[32];
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      md << "| " << mats[i].name;
      for (Eigen::Index j = 0; j < d.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.2f", z[j * d.rows() + i]);  // column-major storage
        md << " | " << buf;
      }
      md << " |\n";
    }
    const auto self = check_self_distance(d);
    md << "\nSelf-distance axiom: " << (self.pass ? "pass" : "FAIL") << "\n\n";
    md << "## Search by drape similarity\n\n";
    std::vector<Image> strip;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      std::vector<std::pair<double, Eigen::Index>> order;
      for (Eigen::Index j = 0; j < d.cols(); ++j)
        if (j != i) order.emplace_back(d(i, j), j);
      std::stable_sort(order.begin(), order.end(), [](auto& x, auto& y) { return x.first < y.first; });
      md << "- " << mats[i].name << ":";
      strip.push_back(engine.render(params[i], SceneKind::kHanging, Side::kA, 0));
      for (const auto& [dist, j] : order) {
        md << ' ' << mats[j].name;
        strip.push_back(engine.render(params[j], SceneKind::kHanging, Side::kA, 0));
      }
      md << '\n';
    }
    write_png8(ctx.output("report_ranking.png"), tile_images(strip, static_cast<int>(d.rows()), static_cast<int>(d.cols()), 0.0));
    md << "\nEach row: reference, then the others by increasing distance.\n\n![ranking](report_ranking.png)\n";
    json listed = json::array();
    for (const auto& m : mats) listed.push_back({{"name", m.name}, {"params", m.params}});
    cfg["metric"] = metric_config_json(mc);
    cfg["materials"] = listed;
  }
  ctx.config = cfg;
  save_text(ctx.output("report.md"), md.str());
  *ctx.out << "wrote " << (ctx.out_dir / "report.md").string() << '\n';
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"drape: cloth drape simulation, depth datasets and drape similarity"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Context ctx;
  ctx.out = &out;
  std::string out_dir = "drape_out";
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed for all randomness");
  app.add_option("--jobs", ctx.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("-o,--out", out_dir, "Output directory");

  std::function<void()> action;
  std::string chosen;

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Relax one material in one scene; writes mesh.obj and convergence.json");
  s_sim->add_option("--scene", sim.scene, "hanging | stretch")->required();
  s_sim->add_option("--params", sim.params, "Material parameters JSON")->required();
  s_sim->add_option("--config", sim.config, "Capture config JSON (mesh, solver, camera)");
  s_sim->add_option("--edge", sim.edge, "Edge length override (m)");
  auto* jitter_opt = s_sim->add_option("--jitter-seed", "Enable default jitter with this seed");
  s_sim->callback([&] {
    chosen = "simulate";
    if (*jitter_opt) sim.jitter_seed = jitter_opt->as<std::uint64_t>();
    action = [&] { cmd_simulate(ctx, sim); };
  });

  RenderArgs ren;
  auto* s_ren = app.add_subcommand("render", "Render an OBJ mesh to a 16-bit depth PNG (optionally shaded / swept)");
  s_ren->add_option("--mesh", ren.mesh, "Wavefront OBJ")->required();
  s_ren->add_option("--camera", ren.camera, "Camera JSON");
  s_ren->add_flag("--shaded", ren.shaded, "Also write the Lambertian render");
  s_ren->add_flag("--sweep", ren.sweep, "Also write the 11-view inclination sweep");
  s_ren->callback([&] { chosen = "render"; action = [&] { cmd_render(ctx, ren); }; });

  SweepArgs swp;
  auto* s_swp = app.add_subcommand("sweep", "Parameter sweep over both scenes with image grid");
  s_swp->add_option("--param", swp.param, "kBending, kStretch or a coefficient name")->required();
  s_swp->add_option("--values", swp.values, "Increasing values")->required()->expected(1, -1);
  s_swp->add_option("--params", swp.params, "Fixed material parameters JSON")->required();
  s_swp->add_option("--config", swp.config, "Capture config JSON");
  s_swp->callback([&] { chosen = "sweep"; action = [&] { cmd_sweep(ctx, swp); }; });

  AugmentArgs aug;
  auto* s_aug = app.add_subcommand("augment", "Apply the augmentation policy to a 16-bit PNG");
  s_aug->add_option("--input", aug.input, "Input PNG")->required();
  s_aug->add_option("--policy", aug.policy, "Policy JSON");
  s_aug->add_option("--sample-seed", aug.sample_seed, "Per-sample seed");
  s_aug->add_option("--output", aug.output, "Output file name inside --out");
  s_aug->add_flag("--equalize", aug.equalize_after, "Histogram-equalize the result");
  s_aug->callback([&] { chosen = "augment"; action = [&] { cmd_augment(ctx, aug); }; });

  GenArgs gen;
  auto* s_gen = app.add_subcommand("gen-dataset", "Generate the synthetic depth dataset");
  s_gen->add_option("--config", gen.config, "Generation config JSON");
  s_gen->add_option("--count", gen.count, "Override sample count");
  s_gen->callback([&] { chosen = "gen-dataset"; action = [&] { cmd_gen_dataset(ctx, gen); }; });

  std::string stats_manifest;
  auto* s_stats = app.add_subcommand("stats", "Spearman matrix and summary of a dataset manifest");
  s_stats->add_option("--manifest", stats_manifest, "manifest.jsonl")->required();
  s_stats->callback([&] { chosen = "stats"; action = [&] { cmd_stats(ctx, stats_manifest); }; });

  auto add_metric_opts = [](CLI::App* sub, MetricArgs& m) {
    sub->add_option("--config", m.config, "Metric config JSON");
    sub->add_option("--im", m.im, "Inner metric: ssim | mad | external");
    sub->add_option("--n", m.n, "Simulations per material and scene");
  };

  MetricArgs dist_m;
  std::string dist_a, dist_b;
  auto* s_dist = app.add_subcommand("distance", "Drape distance between two materials");
  s_dist->add_option("--a", dist_a, "Material A JSON")->required();
  s_dist->add_option("--b", dist_b, "Material B JSON")->required();
  add_metric_opts(s_dist, dist_m);
  s_dist->callback([&] { chosen = "distance"; action = [&] { cmd_distance(ctx, dist_m, dist_a, dist_b); }; });

  MetricArgs rank_m;
  std::string rank_ref, rank_cands;
  auto* s_rank = app.add_subcommand("rank", "Rank candidates by drape similarity to a reference");
  s_rank->add_option("--ref", rank_ref, "Reference material JSON")->required();
  s_rank->add_option("--candidates", rank_cands, "Candidate materials JSON array")->required();
  add_metric_opts(s_rank, rank_m);
  s_rank->callback([&] { chosen = "rank"; action = [&] { cmd_rank(ctx, rank_m, rank_ref, rank_cands); }; });

  MetricArgs val_m;
  std::string val_materials;
  auto* s_val = app.add_subcommand("validate-metric", "Self-distance axiom matrix over a material set");
  s_val->add_option("--materials", val_materials, "Materials JSON array")->required();
  add_metric_opts(s_val, val_m);
  s_val->callback([&] { chosen = "validate-metric"; action = [&] { cmd_validate_metric(ctx, val_m, val_materials); }; });

  EmbedArgs emb;
  auto* s_emb = app.add_subcommand("embed", "tSTE embedding from triplets CSV (ref,chosen,rejected)");
  s_emb->add_option("--triplets", emb.triplets, "Triplet CSV")->required();
  s_emb->add_option("--n-items", emb.n_items, "Number of items (default: max index + 1)");
  s_emb->add_option("--dims", emb.dims, "Embedding dimension")->check(CLI::PositiveNumber);
  s_emb->add_option("--config", emb.config, "tSTE options JSON");
  s_emb->add_option("--labels", emb.labels, "Comma-separated item labels");
  s_emb->callback([&] { chosen = "embed"; action = [&] { cmd_embed(ctx, emb); }; });

  ReportArgs rep;
  auto* s_rep = app.add_subcommand("report", "Markdown report: correlations, sweep, distances, ranking");
  s_rep->add_option("--manifest", rep.manifest, "Dataset manifest for the correlation matrix");
  s_rep->add_option("--materials", rep.materials, "Materials for distances and ranking");
  s_rep->add_option("--params", rep.params, "Fixed material for the sweep");
  s_rep->add_option("--sweep-param", rep.sweep_param, "Sweep parameter");
  s_rep->add_option("--sweep-values", rep.sweep_values, "Sweep values")->expected(1, -1);
  add_metric_opts(s_rep, rep.metric);
  s_rep->callback([&] { chosen = "report"; action = [&] { cmd_report(ctx, rep); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  ctx.seed = seed;
  ctx.seed_given = seed_opt->count() > 0;
  ctx.out_dir = out_dir;
  std::vector<std::string> args(argv, argv + argc);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fs::create_directories(ctx.out_dir);
    action();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_manifest(ctx, chosen, wall, args);
    return 0;
  } catch (const ConfigError& e) {
    print_error(err, "config", e.what(), 3);
    return 3;
  } catch (const json::exception& e) {
    print_error(err, "config", e.what(), 3);
    return 3;
  } catch (const SolverError& e) {
    print_error(err, "solver", e.what(), 1);
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what(), 1);
    return 1;
  }
}

}  // namespace drape
