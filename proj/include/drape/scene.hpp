#pragma once

#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "drape/mesh.hpp"

namespace drape {

enum class SceneKind { kHanging, kStretch };

std::string_view scene_name(SceneKind kind);
SceneKind parse_scene(std::string_view name);  // throws ConfigError

struct SimState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::map<int, Vec3> pins;  // vertex index -> fixed world position
};

/// Capture scene layout. The panel is the world xy plane, gravity is -y and
/// the camera looks down -z.
struct SceneConfig {
  SceneKind kind = SceneKind::kHanging;
  double fabric_size = 0.5;
  // Hanging pin separation as a fraction of fabric width.
  double pin_separation_ratio = 0.8;
  double top_height = 0.25;
  // Stretch scene: offset applied to the bottom-left corner pin.
  Vec3 stretch_offset{-0.05, -0.05, 0.0};
  Vec3 gravity{0.0, -9.81, 0.0};
  double fold_amplitude = 0.002;
  int fold_periods = 5;
};

struct Scene {
  SceneConfig config;
  SimState initial;
};

// Pins the grid corners and lays the sheet out flat between them with a
// sinusoidal out-of-plane fold seed. Throws ConfigError for non-grid meshes.
Scene setup_scene(const SceneConfig& config, const ClothMesh& mesh);
Scene setup_scene(SceneKind kind, const ClothMesh& mesh);

struct JitterConfig {
  std::uint64_t seed = 0;
  double impulse_sigma = 0.01;  // m/s per velocity component
  double pin_radius = 0.003;    // m, uniform disk in the panel plane
};

SimState perturb_initial(const SimState& state, const JitterConfig& jitter);

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);
void to_json(nlohmann::json& j, const JitterConfig& c);
void from_json(const nlohmann::json& j, JitterConfig& c);

}  // namespace drape
