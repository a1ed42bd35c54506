#include "drape/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "drape/error.hpp"

namespace drape {

void Camera::validate() const {
  if (!(near_plane > 0.0) || !(far_plane > near_plane)) throw ConfigError("camera needs 0 < near < far");
  if (!(fov_deg > 0.0 && fov_deg < 120.0)) throw ConfigError("camera fov must lie in (0, 120) degrees");
  if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
  if ((target - position).norm() == 0.0) throw ConfigError("camera target coincides with position");
  if ((target - position).cross(up).norm() < 1e-12) throw ConfigError("camera up is parallel to view direction");
}

CameraFrame camera_frame(const Camera& cam) {
  const Vec3 f = (cam.target - cam.position).normalized();
  const Vec3 r = f.cross(cam.up).normalized();
  return {r, r.cross(f), f};
}

Vec3 to_camera(const Camera& cam, const CameraFrame& frame, const Vec3& world) {
  const Vec3 d = world - cam.position;
  return {frame.right.dot(d), frame.up.dot(d), frame.forward.dot(d)};
}

Vec2 project(const Camera& cam, const Vec3& c) {
  const double t = std::tan(0.5 * cam.fov_deg * std::numbers::pi / 180.0);
  const double aspect = static_cast<double>(cam.width) / cam.height;
  const double nx = c.x() / (c.z() * t * aspect);
  const double ny = c.y() / (c.z() * t);
  return {0.5 * (nx + 1.0) * cam.width, 0.5 * (1.0 - ny) * cam.height};
}

namespace {

// Rasterizes into a depth buffer and records the winning triangle per pixel.
void rasterize(std::span<const Vec3> positions, std::span<const std::array<int, 3>> triangles,
               const Camera& cam, Image& depth, std::vector<int>& winner) {
  cam.validate();
  depth = Image(cam.width, cam.height, kBackgroundDepth);
  winner.assign(depth.size(), -1);
  const CameraFrame frame = camera_frame(cam);

  std::vector<Vec3> cpos(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    cpos[i] = to_camera(cam, frame, positions[i]);
    if (!(cpos[i].z() >= cam.near_plane))
      throw GeometryError("vertex " + std::to_string(i) + " lies in front of the camera near plane");
  }
  const double range = cam.far_plane - cam.near_plane;

  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    const Vec3& c0 = cpos[tri[0]];
    const Vec3& c1 = cpos[tri[1]];
    const Vec3& c2 = cpos[tri[2]];
    const Vec2 s0 = project(cam, c0), s1 = project(cam, c1), s2 = project(cam, c2);
    const double area = (s1.x() - s0.x()) * (s2.y() - s0.y()) - (s1.y() - s0.y()) * (s2.x() - s0.x());
    if (std::abs(area) < 1e-12) continue;
    const double inv_area = 1.0 / area;

    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({s0.x(), s1.x(), s2.x()}) - 0.5)));
    const int x_hi = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({s0.x(), s1.x(), s2.x()}) - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({s0.y(), s1.y(), s2.y()}) - 0.5)));
    const int y_hi = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({s0.y(), s1.y(), s2.y()}) - 0.5)));

    for (int y = y_lo; y <= y_hi; ++y) {
      const double py = y + 0.5;
      for (int x = x_lo; x <= x_hi; ++x) {
        const double px = x + 0.5;
        const double w0 = ((s1.x() - px) * (s2.y() - py) - (s1.y() - py) * (s2.x() - px)) * inv_area;
        const double w1 = ((s2.x() - px) * (s0.y() - py) - (s2.y() - py) * (s0.x() - px)) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        // Perspective-correct: 1/z is affine in screen space.
        const double z = 1.0 / (w0 / c0.z() + w1 / c1.z() + w2 / c2.z());
        if (z > cam.far_plane) continue;
        const double d = std::clamp((z - cam.near_plane) / range, 0.0, 1.0);
        double& slot = depth.at(x, y);
        if (d < slot) {
          slot = d;
          winner[static_cast<std::size_t>(y) * cam.width + x] = static_cast<int>(t);
        }
      }
    }
  }
}

}  // namespace

DepthImage render_depth(std::span<const Vec3> positions, std::span<const std::array<int, 3>> triangles,
                        const Camera& cam) {
  DepthImage out;
  std::vector<int> winner;
  rasterize(positions, triangles, cam, out.image, winner);
  out.near_plane = cam.near_plane;
  out.far_plane = cam.far_plane;
  return out;
}

DepthImage render_depth(const SimState& state, const ClothMesh& mesh, const Camera& cam) {
  return render_depth(state.positions, mesh.triangles, cam);
}

GrayImage render_shaded(std::span<const Vec3> positions, std::span<const std::array<int, 3>> triangles,
                        const Camera& cam, const Vec3& light_direction) {
  if (!(std::abs(light_direction.norm() - 1.0) < 1e-6)) throw ConfigError("light direction must be a unit vector");
  Image depth;
  std::vector<int> winner;
  rasterize(positions, triangles, cam, depth, winner);

  std::vector<double> shade(triangles.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    const Vec3 n = (positions[tri[1]] - positions[tri[0]]).cross(positions[tri[2]] - positions[tri[0]]);
    const double len = n.norm();
    const double cosine = len > 0.0 ? n.dot(light_direction) / len : 0.0;
    shade[t] = std::clamp(kAmbient + kAlbedo * std::max(0.0, cosine), 0.0, 1.0);
  }
  GrayImage out(cam.width, cam.height, 0.0);
  for (std::size_t i = 0; i < winner.size(); ++i)
    if (winner[i] >= 0) out.values[i] = shade[winner[i]];
  return out;
}

GrayImage render_shaded(const SimState& state, const ClothMesh& mesh, const Camera& cam,
                        const Vec3& light_direction) {
  return render_shaded(state.positions, mesh.triangles, cam, light_direction);
}

Camera incline_camera(const Camera& base, double degrees) {
  if (degrees == 0.0) return base;
  const Eigen::AngleAxisd rot(degrees * std::numbers::pi / 180.0, Vec3::UnitX());
  Camera cam = base;
  cam.position = base.target + rot * (base.position - base.target);
  cam.up = rot * base.up;
  return cam;
}

std::vector<double> sweep_inclinations() {
  std::vector<double> out;
  for (int k = 0; k < kSweepViews; ++k) out.push_back(static_cast<double>(k - kSweepViews / 2));
  return out;
}

std::vector<DepthImage> camera_sweep(const SimState& state, const ClothMesh& mesh, const Camera& base) {
  std::vector<DepthImage> out;
  out.reserve(kSweepViews);
  for (double deg : sweep_inclinations()) out.push_back(render_depth(state, mesh, incline_camera(base, deg)));
  return out;
}

nlohmann::json depth_metadata(const DepthImage& img, const Camera& cam) {
  return {{"near", img.near_plane},
          {"far", img.far_plane},
          {"encoding", "round(depth * 65535), depth = (z - near) / (far - near), background 1"},
          {"camera", cam}};
}

void to_json(nlohmann::json& j, const Camera& c) {
  j = nlohmann::json{{"position", {c.position.x(), c.position.y(), c.position.z()}},
                     {"target", {c.target.x(), c.target.y(), c.target.z()}},
                     {"up", {c.up.x(), c.up.y(), c.up.z()}},
                     {"fov_deg", c.fov_deg},
                     {"near", c.near_plane},
                     {"far", c.far_plane},
                     {"width", c.width},
                     {"height", c.height}};
}

namespace {

Vec3 vec3_field(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError(std::string("camera ") + key + " needs 3 components");
  return {v[0], v[1], v[2]};
}

}  // namespace

void from_json(const nlohmann::json& j, Camera& c) {
  c = Camera{};
  c.position = vec3_field(j, "position", c.position);
  c.target = vec3_field(j, "target", c.target);
  c.up = vec3_field(j, "up", c.up);
  c.fov_deg = j.value("fov_deg", c.fov_deg);
  c.near_plane = j.value("near", c.near_plane);
  c.far_plane = j.value("far", c.far_plane);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.validate();
}

}  // namespace drape
