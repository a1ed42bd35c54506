#include "drape/scene.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "drape/error.hpp"
#include "drape/rng.hpp"

namespace drape {

std::string_view scene_name(SceneKind kind) {
  return kind == SceneKind::kHanging ? "hanging" : "stretch";
}

SceneKind parse_scene(std::string_view name) {
  if (name == "hanging") return SceneKind::kHanging;
  if (name == "stretch") return SceneKind::kStretch;
  throw ConfigError("unknown scene '" + std::string(name) + "' (expected hanging or stretch)");
}

Scene setup_scene(const SceneConfig& config, const ClothMesh& mesh) {
  if (mesh.grid_cells <= 0) throw ConfigError("scenes require a grid mesh");
  if (!(config.pin_separation_ratio > 0.0)) throw ConfigError("pin separation must be positive");
  const int n = mesh.grid_cells;
  const double size = mesh.size;
  const double sx = config.pin_separation_ratio;

  Scene scene{config, {}};
  scene.config.fabric_size = size;
  auto& st = scene.initial;
  st.positions.resize(mesh.vertex_count());
  st.velocities.assign(mesh.vertex_count(), Vec3::Zero());

  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const Vec2& uv = mesh.rest_positions[i];
    const double z = config.fold_amplitude *
                     std::sin(2.0 * std::numbers::pi * config.fold_periods * uv.x() / size);
    Vec3 x{sx * (uv.x() - 0.5 * size), config.top_height - (size - uv.y()), z};
    if (config.kind == SceneKind::kStretch) {
      // Bilinear blend of the corner offset; zero along the top and right edges.
      x += config.stretch_offset * (1.0 - uv.x() / size) * (1.0 - uv.y() / size);
    }
    st.positions[i] = x;
  }

  std::vector<int> pinned = {mesh.grid_index(0, n), mesh.grid_index(n, n)};
  if (config.kind == SceneKind::kStretch) pinned.push_back(mesh.grid_index(0, 0));
  for (int v : pinned) st.pins[v] = st.positions[v];
  return scene;
}

Scene setup_scene(SceneKind kind, const ClothMesh& mesh) {
  SceneConfig config;
  config.kind = kind;
  config.fabric_size = mesh.size;
  return setup_scene(config, mesh);
}

SimState perturb_initial(const SimState& state, const JitterConfig& jitter) {
  if (!std::isfinite(jitter.impulse_sigma) || !std::isfinite(jitter.pin_radius) ||
      jitter.impulse_sigma < 0.0 || jitter.pin_radius < 0.0)
    throw ConfigError("jitter magnitudes must be finite and non-negative");
  SimState out = state;
  auto rng = make_rng({jitter.seed, 0x4a495454ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (jitter.impulse_sigma > 0.0) {
    for (std::size_t i = 0; i < out.velocities.size(); ++i) {
      const Vec3 kick{normal(rng), normal(rng), normal(rng)};
      if (!out.pins.contains(static_cast<int>(i))) out.velocities[i] += jitter.impulse_sigma * kick;
    }
  }
  if (jitter.pin_radius > 0.0) {
    for (auto& [v, target] : out.pins) {
      const double r = jitter.pin_radius * std::sqrt(unit(rng));
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      target += Vec3{r * std::cos(phi), r * std::sin(phi), 0.0};
      out.positions[v] = target;
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = nlohmann::json{{"kind", scene_name(c.kind)},
                     {"fabric_size", c.fabric_size},
                     {"pin_separation_ratio", c.pin_separation_ratio},
                     {"top_height", c.top_height},
                     {"stretch_offset", {c.stretch_offset.x(), c.stretch_offset.y(), c.stretch_offset.z()}},
                     {"gravity", {c.gravity.x(), c.gravity.y(), c.gravity.z()}},
                     {"fold_amplitude", c.fold_amplitude},
                     {"fold_periods", c.fold_periods}};
}

namespace {

Vec3 vec3_from(const nlohmann::json& j, const char* name) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError(std::string(name) + " must have 3 components");
  return {v[0], v[1], v[2]};
}

}  // namespace

void from_json(const nlohmann::json& j, SceneConfig& c) {
  c = SceneConfig{};
  if (j.contains("kind")) c.kind = parse_scene(j.at("kind").get<std::string>());
  c.fabric_size = j.value("fabric_size", c.fabric_size);
  c.pin_separation_ratio = j.value("pin_separation_ratio", c.pin_separation_ratio);
  c.top_height = j.value("top_height", c.top_height);
  if (j.contains("stretch_offset")) c.stretch_offset = vec3_from(j.at("stretch_offset"), "stretch_offset");
  if (j.contains("gravity")) c.gravity = vec3_from(j.at("gravity"), "gravity");
  c.fold_amplitude = j.value("fold_amplitude", c.fold_amplitude);
  c.fold_periods = j.value("fold_periods", c.fold_periods);
}

void to_json(nlohmann::json& j, const JitterConfig& c) {
  j = nlohmann::json{{"seed", c.seed}, {"impulse_sigma", c.impulse_sigma}, {"pin_radius", c.pin_radius}};
}

void from_json(const nlohmann::json& j, JitterConfig& c) {
  c = JitterConfig{};
  c.seed = j.value("seed", c.seed);
  c.impulse_sigma = j.value("impulse_sigma", c.impulse_sigma);
  c.pin_radius = j.value("pin_radius", c.pin_radius);
  if (c.impulse_sigma < 0.0 || c.pin_radius < 0.0) throw ConfigError("jitter magnitudes must be >= 0");
}

}  // namespace drape
