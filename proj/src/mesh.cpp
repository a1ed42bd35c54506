#include "drape/mesh.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "drape/error.hpp"

namespace drape {

std::string_view direction_name(DirectionClass d) {
  switch (d) {
    case DirectionClass::kWarp: return "warp";
    case DirectionClass::kWeft: return "weft";
    case DirectionClass::kBias: return "bias";
  }
  return "bias";
}

DirectionClass classify_direction(const Vec2& material_edge) {
  double deg = std::atan2(material_edge.y(), material_edge.x()) * 180.0 / std::numbers::pi;
  // Edges are undirected: fold into [0, 180).
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  if (deg <= 22.5 || deg >= 157.5) return DirectionClass::kWarp;
  if (deg >= 67.5 && deg <= 112.5) return DirectionClass::kWeft;
  return DirectionClass::kBias;
}

double ClothMesh::total_rest_area() const {
  return std::accumulate(rest_areas.begin(), rest_areas.end(), 0.0);
}

double ClothMesh::total_mass() const {
  return std::accumulate(vertex_masses.begin(), vertex_masses.end(), 0.0);
}

namespace {

double cotangent(const Vec2& apex, const Vec2& a, const Vec2& b) {
  const Vec2 u = a - apex;
  const Vec2 v = b - apex;
  const double cross = u.x() * v.y() - u.y() * v.x();
  return u.dot(v) / std::abs(cross);
}

}  // namespace

ClothMesh build_mesh(std::vector<Vec2> rest_positions, std::vector<std::array<int, 3>> triangles,
                     double density) {
  if (!(density > 0.0) || !std::isfinite(density)) throw ConfigError("density must be positive");
  ClothMesh mesh;
  mesh.rest_positions = std::move(rest_positions);
  mesh.triangles = std::move(triangles);
  mesh.density = density;
  const auto nv = static_cast<int>(mesh.rest_positions.size());

  mesh.vertex_areas.assign(mesh.rest_positions.size(), 0.0);
  mesh.rest_areas.reserve(mesh.triangles.size());
  mesh.rest_inverse.reserve(mesh.triangles.size());

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int idx : tri)
      if (idx < 0 || idx >= nv) throw GeometryError("triangle references invalid vertex");
    const Vec2& p = mesh.rest_positions[tri[0]];
    const Vec2& q = mesh.rest_positions[tri[1]];
    const Vec2& r = mesh.rest_positions[tri[2]];
    Eigen::Matrix2d dm;
    dm.col(0) = q - p;
    dm.col(1) = r - p;
    const double area = 0.5 * dm.determinant();
    if (!(area > 1e-14))
      throw GeometryError("degenerate or clockwise rest triangle " + std::to_string(t));
    mesh.rest_areas.push_back(area);
    mesh.rest_inverse.push_back(dm.inverse());

    // Mixed Voronoi areas.
    const double angle_p = (q - p).dot(r - p);
    const double angle_q = (p - q).dot(r - q);
    const double angle_r = (p - r).dot(q - r);
    if (angle_p >= 0.0 && angle_q >= 0.0 && angle_r >= 0.0) {
      mesh.vertex_areas[tri[0]] +=
          0.125 * ((r - p).squaredNorm() * cotangent(q, p, r) + (q - p).squaredNorm() * cotangent(r, p, q));
      mesh.vertex_areas[tri[1]] +=
          0.125 * ((r - q).squaredNorm() * cotangent(p, q, r) + (p - q).squaredNorm() * cotangent(r, p, q));
      mesh.vertex_areas[tri[2]] +=
          0.125 * ((p - r).squaredNorm() * cotangent(q, p, r) + (q - r).squaredNorm() * cotangent(p, q, r));
    } else {
      const std::array<double, 3> dots = {angle_p, angle_q, angle_r};
      for (int k = 0; k < 3; ++k) mesh.vertex_areas[tri[k]] += dots[k] < 0.0 ? 0.5 * area : 0.25 * area;
    }
  }

  mesh.vertex_masses.resize(mesh.vertex_areas.size());
  for (std::size_t i = 0; i < mesh.vertex_areas.size(); ++i)
    mesh.vertex_masses[i] = density * mesh.vertex_areas[i];

  // Directed edge a->b of triangle t, with opposite vertex c.
  struct HalfEdge {
    int triangle, from, to, opposite;
  };
  std::map<std::pair<int, int>, std::vector<HalfEdge>> edges;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3], c = tri[(k + 2) % 3];
      edges[{std::min(a, b), std::max(a, b)}].push_back({static_cast<int>(t), a, b, c});
    }
  }
  for (const auto& [key, halves] : edges) {
    if (halves.size() == 1) continue;
    if (halves.size() > 2) throw GeometryError("non-manifold edge");
    const HalfEdge& h0 = halves[0];
    const HalfEdge& h1 = halves[1];
    if (h0.from != h1.to || h0.to != h1.from) throw GeometryError("inconsistent triangle orientation");
    Hinge hinge;
    hinge.edge = {h0.from, h0.to};
    hinge.opposite = {h0.opposite, h1.opposite};
    const Vec2 e = mesh.rest_positions[h0.to] - mesh.rest_positions[h0.from];
    hinge.direction = classify_direction(e);
    hinge.rest_length = e.norm();
    const double area_sum = mesh.rest_areas[h0.triangle] + mesh.rest_areas[h1.triangle];
    hinge.rest_weight = 3.0 * e.squaredNorm() / area_sum;
    mesh.hinges.push_back(hinge);
  }
  return mesh;
}

ClothMesh make_grid_mesh(double size, double edge_length, double density) {
  if (!(size > 0.0) || !(edge_length > 0.0) || edge_length > size || !std::isfinite(size))
    throw ConfigError("grid mesh needs size > 0 and 0 < edge_length <= size");
  const int n = std::max(1, static_cast<int>(std::lround(size / edge_length)));
  const double h = size / n;

  std::vector<Vec2> rest;
  rest.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) rest.emplace_back(i * h, j * h);

  auto index = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2 * n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = index(i, j), b = index(i + 1, j), c = index(i + 1, j + 1), d = index(i, j + 1);
      // Alternate the cell diagonal so bias hinges run both ways.
      if ((i + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  ClothMesh mesh = build_mesh(std::move(rest), std::move(tris), density);
  mesh.grid_cells = n;
  mesh.size = size;
  return mesh;
}

void write_obj(std::ostream& out, const ClothMesh& mesh, std::span<const Vec3> positions) {
  if (positions.size() != mesh.vertex_count()) throw GeometryError("position count mismatch");
  std::ostringstream buf;
  buf.precision(17);
  buf << "# drape mesh: " << positions.size() << " vertices, " << mesh.triangles.size()
      << " triangles\n";
  for (const auto& p : positions) buf << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& t : mesh.triangles)
    buf << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  out << buf.str();
}

ObjMesh read_obj(std::istream& in) {
  ObjMesh out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2 || line[1] != ' ') continue;
    std::istringstream ls(line.substr(2));
    if (line[0] == 'v') {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw IoError("malformed vertex line: " + line);
      out.positions.emplace_back(x, y, z);
    } else if (line[0] == 'f') {
      std::array<int, 3> t{};
      for (int& idx : t) {
        std::string tok;
        if (!(ls >> tok)) throw IoError("malformed face line: " + line);
        idx = std::stoi(tok.substr(0, tok.find('/'))) - 1;  // ignore v/vt/vn suffixes
      }
      out.triangles.push_back(t);
    }
  }
  for (const auto& t : out.triangles)
    for (int idx : t)
      if (idx < 0 || idx >= static_cast<int>(out.positions.size()))
        throw IoError("face references missing vertex");
  return out;
}

std::vector<Vec3> read_obj_positions(std::istream& in) { return read_obj(in).positions; }

}  // namespace drape
