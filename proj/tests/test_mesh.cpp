#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "doctest.h"
#include "drape/error.hpp"
#include "drape/mesh.hpp"

using namespace drape;

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

TEST_CASE("grid counts for the default resolution") {
  const auto mesh = make_grid_mesh(0.5, 0.005, 0.2);
  CHECK(mesh.grid_cells == 100);
  CHECK(mesh.vertex_count() == 10201);
  CHECK(mesh.triangles.size() == 20000);
  // n x n cells: 2n(n+1) axis edges + n^2 diagonals, 4n of them on the boundary.
  const std::size_t n = 100;
  CHECK(mesh.hinges.size() == 2 * n * (n + 1) + n * n - 4 * n);
  CHECK(mesh.total_rest_area() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(mesh.total_mass() == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("vertex areas partition the rest area") {
  for (double edge : {0.1, 0.05, 0.02}) {
    const auto mesh = make_grid_mesh(0.4, edge, 0.3);
    double sum = 0.0;
    for (double a : mesh.vertex_areas) {
      CHECK(a > 0.0);
      sum += a;
    }
    CHECK(sum == doctest::Approx(mesh.total_rest_area()).epsilon(1e-12));
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
      CHECK(mesh.vertex_masses[i] == doctest::Approx(0.3 * mesh.vertex_areas[i]));
  }
}

TEST_CASE("hinge direction classes on a 2x2 grid") {
  const auto mesh = make_grid_mesh(1.0, 0.5, 1.0);
  REQUIRE(mesh.hinges.size() == 8);
  // index = 3 j + i
  const std::map<std::pair<int, int>, DirectionClass> expected = {
      {key(3, 4), DirectionClass::kWarp}, {key(4, 5), DirectionClass::kWarp},
      {key(1, 4), DirectionClass::kWeft}, {key(4, 7), DirectionClass::kWeft},
      {key(0, 4), DirectionClass::kBias}, {key(2, 4), DirectionClass::kBias},
      {key(4, 6), DirectionClass::kBias}, {key(4, 8), DirectionClass::kBias}};
  std::map<std::pair<int, int>, DirectionClass> got;
  for (const auto& h : mesh.hinges) got[key(h.edge[0], h.edge[1])] = h.direction;
  CHECK(got == expected);
}

TEST_CASE("classification thresholds") {
  CHECK(classify_direction({1, 0}) == DirectionClass::kWarp);
  CHECK(classify_direction({-1, 0}) == DirectionClass::kWarp);
  CHECK(classify_direction({0, 1}) == DirectionClass::kWeft);
  CHECK(classify_direction({0, -2}) == DirectionClass::kWeft);
  CHECK(classify_direction({1, 1}) == DirectionClass::kBias);
  CHECK(classify_direction({-1, 1}) == DirectionClass::kBias);
  CHECK(classify_direction({1, 0.39}) == DirectionClass::kWarp);
  CHECK(classify_direction({1, 0.45}) == DirectionClass::kBias);
  CHECK(classify_direction({0.39, 1}) == DirectionClass::kWeft);
  CHECK(direction_name(DirectionClass::kWeft) == "weft");
}

TEST_CASE("every interior edge is one hinge with consistent orientation") {
  const auto mesh = make_grid_mesh(0.3, 0.05, 0.2);
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) ++edge_use[key(t[k], t[(k + 1) % 3])];
  std::size_t interior = 0;
  for (const auto& [e, count] : edge_use) {
    CHECK(count <= 2);
    interior += count == 2;
  }
  CHECK(mesh.hinges.size() == interior);

  std::set<std::pair<int, int>> seen;
  for (const auto& h : mesh.hinges) {
    CHECK(seen.insert(key(h.edge[0], h.edge[1])).second);
    CHECK(edge_use[key(h.edge[0], h.edge[1])] == 2);
    const auto& r = mesh.rest_positions;
    CHECK(signed_area(r[h.edge[0]], r[h.edge[1]], r[h.opposite[0]]) > 0.0);
    CHECK(signed_area(r[h.edge[1]], r[h.edge[0]], r[h.opposite[1]]) > 0.0);
    CHECK(h.rest_angle == doctest::Approx(0.0));
    CHECK(h.rest_length == doctest::Approx((r[h.edge[0]] - r[h.edge[1]]).norm()));
  }
}

TEST_CASE("hinge rest weight is edge length over a third of the mean height") {
  const std::vector<Vec2> rest = {{0, 0}, {1, 0}, {0.5, 0.5}, {0.5, -0.25}};
  const auto mesh = build_mesh(rest, {{0, 1, 2}, {1, 0, 3}}, 1.0);
  REQUIRE(mesh.hinges.size() == 1);
  const double mean_height = 0.5 * (0.5 + 0.25);
  CHECK(mesh.hinges[0].rest_weight == doctest::Approx(1.0 / (mean_height / 3.0)).epsilon(1e-12));
  CHECK(mesh.hinges[0].direction == DirectionClass::kWarp);
}

TEST_CASE("invalid meshes are rejected") {
  CHECK_THROWS_AS(make_grid_mesh(0.5, 0.0, 0.2), ConfigError);
  CHECK_THROWS_AS(make_grid_mesh(0.5, 1.0, 0.2), ConfigError);
  CHECK_THROWS_AS(make_grid_mesh(0.5, 0.1, -1.0), ConfigError);
  const std::vector<Vec2> rest = {{0, 0}, {1, 0}, {0, 1}};
  CHECK_THROWS_AS(build_mesh(rest, {{0, 2, 1}}, 1.0), GeometryError);
  CHECK_THROWS_AS(build_mesh(rest, {{0, 1, 5}}, 1.0), GeometryError);
}

TEST_CASE("OBJ round trip") {
  const auto mesh = make_grid_mesh(0.2, 0.05, 0.2);
  std::vector<Vec3> pos;
  for (const auto& r : mesh.rest_positions) pos.emplace_back(r.x() - 0.1, 0.25 * r.y(), r.x() * r.y());
  std::stringstream ss;
  write_obj(ss, mesh, pos);
  const auto back = read_obj(ss);
  REQUIRE(back.positions.size() == pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) CHECK((back.positions[i] - pos[i]).norm() < 1e-12);
  CHECK(back.triangles == mesh.triangles);

  std::istringstream with_uv("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1/1 2/1/1 3/1/1\n");
  const auto tri = read_obj(with_uv);
  CHECK(tri.triangles.size() == 1);
  CHECK(tri.triangles[0] == std::array<int, 3>{0, 1, 2});

  std::istringstream bad("v 0 0 0\nf 1 2 3\n");
  CHECK_THROWS(read_obj(bad));
}
