#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace drape {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

enum class DirectionClass { kWarp, kWeft, kBias };

std::string_view direction_name(DirectionClass d);

// Warp within 22.5 degrees of the u axis, weft within 22.5 degrees of v, bias otherwise.
DirectionClass classify_direction(const Vec2& material_edge);

/// Interior edge shared by two triangles. Triangle (edge[0], edge[1],
/// opposite[0]) and triangle (edge[1], edge[0], opposite[1]) are both
/// counterclockwise in material space.
struct Hinge {
  std::array<int, 2> edge{};
  std::array<int, 2> opposite{};
  DirectionClass direction = DirectionClass::kBias;
  double rest_angle = 0.0;
  double rest_length = 0.0;
  // |e| / h, with h one third of the mean height of the two rest triangles.
  double rest_weight = 0.0;
};

/// Rest-space triangle mesh. Material axes: u = warp, v = weft.
struct ClothMesh {
  std::vector<Vec2> rest_positions;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Hinge> hinges;
  std::vector<double> vertex_areas;   // mixed Voronoi areas (m^2)
  std::vector<double> vertex_masses;  // density * vertex_areas (kg)
  std::vector<double> rest_areas;
  std::vector<Eigen::Matrix2d> rest_inverse;  // inverse of [X1-X0, X2-X0]
  double density = 0.0;
  int grid_cells = 0;  // cells per side for grid meshes, 0 otherwise
  double size = 0.0;

  std::size_t vertex_count() const { return rest_positions.size(); }
  double total_rest_area() const;
  double total_mass() const;
  // Grid vertex index for column i (along u) and row j (along v).
  int grid_index(int i, int j) const { return j * (grid_cells + 1) + i; }
};

// Builds rest data (areas, inverses, hinges, masses) for an arbitrary
// counterclockwise triangle soup. Throws GeometryError on degenerate input.
ClothMesh build_mesh(std::vector<Vec2> rest_positions, std::vector<std::array<int, 3>> triangles,
                     double density);

ClothMesh make_grid_mesh(double size, double edge_length, double density);

// Wavefront OBJ subset: "v x y z" lines then 1-based "f a b c" lines.
void write_obj(std::ostream& out, const ClothMesh& mesh, std::span<const Vec3> positions);
std::vector<Vec3> read_obj_positions(std::istream& in);

struct ObjMesh {
  std::vector<Vec3> positions;
  std::vector<std::array<int, 3>> triangles;  // 0-based
};
ObjMesh read_obj(std::istream& in);

}  // namespace drape
