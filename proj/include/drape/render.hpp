#pragma once

#include <array>
#include <span>
#include <vector>

#include "json.hpp"

#include "drape/image.hpp"
#include "drape/mesh.hpp"
#include "drape/scene.hpp"

namespace drape {

/// Pinhole camera. Defaults frame the 0.5 m sample hanging in the xy plane.
struct Camera {
  Vec3 position{0.0, 0.0, 1.2};
  Vec3 target{0.0, 0.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  double fov_deg = 35.0;  // vertical
  double near_plane = 0.5;
  double far_plane = 2.5;
  int width = 256;
  int height = 256;

  void validate() const;  // throws ConfigError

  friend bool operator==(const Camera&, const Camera&) = default;
};

// Orthonormal view frame: right, true up, forward (unit vectors).
struct CameraFrame {
  Vec3 right, up, forward;
};
CameraFrame camera_frame(const Camera& cam);

// Point in camera space: x right, y up, z = distance along the view axis.
Vec3 to_camera(const Camera& cam, const CameraFrame& frame, const Vec3& world);
// Continuous pixel coordinates (pixel centers at +0.5) of a camera-space point.
Vec2 project(const Camera& cam, const Vec3& camera_point);

inline const Vec3 kDefaultLight = Vec3(-0.3, 0.4, 1.0).normalized();
inline constexpr double kAmbient = 0.1;
inline constexpr double kAlbedo = 0.85;

// Throws GeometryError when any vertex lies in front of the near plane.
DepthImage render_depth(std::span<const Vec3> positions,
                        std::span<const std::array<int, 3>> triangles, const Camera& cam);
DepthImage render_depth(const SimState& state, const ClothMesh& mesh, const Camera& cam);

/// Flat-shaded Lambertian: ambient + albedo * max(0, n.l), where n is the
/// counterclockwise triangle normal and l points toward the light.
/// Background is 0.
GrayImage render_shaded(std::span<const Vec3> positions,
                        std::span<const std::array<int, 3>> triangles, const Camera& cam,
                        const Vec3& light_direction = kDefaultLight);
GrayImage render_shaded(const SimState& state, const ClothMesh& mesh, const Camera& cam,
                        const Vec3& light_direction = kDefaultLight);

// Rotates the camera about the horizontal (world x) axis through its target.
Camera incline_camera(const Camera& base, double degrees);

inline constexpr int kSweepViews = 11;
// Inclinations -5..+5 degrees; index 5 is the base camera itself.
std::vector<double> sweep_inclinations();
std::vector<DepthImage> camera_sweep(const SimState& state, const ClothMesh& mesh, const Camera& base);

nlohmann::json depth_metadata(const DepthImage& img, const Camera& cam);

void to_json(nlohmann::json& j, const Camera& c);
void from_json(const nlohmann::json& j, Camera& c);

}  // namespace drape
