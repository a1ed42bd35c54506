#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "doctest.h"
#include "drape/energy.hpp"
#include "drape/error.hpp"

using namespace drape;

namespace {

std::vector<Vec3> lift(const ClothMesh& mesh) {
  std::vector<Vec3> x;
  for (const auto& r : mesh.rest_positions) x.emplace_back(r.x(), r.y(), 0.0);
  return x;
}

std::vector<Vec3> perturbed(const ClothMesh& mesh, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  auto x = lift(mesh);
  for (auto& p : x) p += Vec3(n(rng), n(rng), n(rng));
  return x;
}

double total(const ClothMesh& mesh, const std::vector<Vec3>& x, const MaterialParams& p) {
  return stretch_energy(mesh, x, p).energy + bending_energy(mesh, x, p).energy;
}

// Largest gradient error relative to the largest gradient entry.
double gradient_error(const ClothMesh& mesh, std::vector<Vec3> x, const MaterialParams& p) {
  const auto s = stretch_energy(mesh, x, p);
  const auto b = bending_energy(mesh, x, p);
  double worst = 0.0, scale = 0.0;
  const double h = 1e-7;
  for (std::size_t v = 0; v < x.size(); ++v)
    for (int d = 0; d < 3; ++d) {
      const double keep = x[v][d];
      x[v][d] = keep + h;
      const double ep = total(mesh, x, p);
      x[v][d] = keep - h;
      const double em = total(mesh, x, p);
      x[v][d] = keep;
      const double fd = (ep - em) / (2.0 * h);
      const double analytic = -(s.force[v][d] + b.force[v][d]);
      worst = std::max(worst, std::abs(fd - analytic));
      scale = std::max(scale, std::abs(analytic));
    }
  return worst / scale;
}

}  // namespace

TEST_CASE("rest state has zero energy and force") {
  const auto mesh = make_grid_mesh(0.2, 0.05, 0.2);
  const auto p = MaterialParams::uniform(500, 1e-5, 0.2);
  const auto x = lift(mesh);
  const auto s = stretch_energy(mesh, x, p);
  const auto b = bending_energy(mesh, x, p);
  CHECK(s.energy == doctest::Approx(0.0).scale(1.0));
  CHECK(b.energy == 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(s.force[i].norm() < 1e-12);
    CHECK(b.force[i].norm() < 1e-12);
  }
}

TEST_CASE("uniform warp stretch matches the closed form") {
  const auto mesh = make_grid_mesh(0.5, 0.05, 0.2);
  MaterialParams p{{100, 300, 700, 1e-5, 1e-5, 1e-5, 0.2}};
  const double lambda = 1.01;
  std::vector<Vec3> x;
  for (const auto& r : mesh.rest_positions) x.emplace_back(lambda * r.x(), r.y(), 0.0);
  const double e = 0.5 * (lambda * lambda - 1.0);
  const double expected = 0.5 * 0.25 * 100.0 * e * e;
  CHECK(stretch_energy(mesh, x, p).energy == doctest::Approx(expected).epsilon(1e-10));
  CHECK(bending_energy(mesh, x, p).energy == doctest::Approx(0.0).scale(1e-20));

  std::vector<Vec3> y;
  for (const auto& r : mesh.rest_positions) y.emplace_back(r.x(), lambda * r.y(), 0.0);
  CHECK(stretch_energy(mesh, y, p).energy == doctest::Approx(0.5 * 0.25 * 300.0 * e * e).epsilon(1e-10));
}

TEST_CASE("simple shear only loads the bias stiffness") {
  const auto mesh = make_grid_mesh(0.5, 0.1, 0.2);
  MaterialParams p{{100, 300, 700, 1e-5, 1e-5, 1e-5, 0.2}};
  const double gamma = 0.02;
  std::vector<Vec3> x;
  for (const auto& r : mesh.rest_positions) x.emplace_back(r.x() + gamma * r.y(), r.y(), 0.0);
  // F = [[1, g], [0, 1]]: e_uu = 0, e_vv = g^2 / 2, e_uv = g / 2.
  const double e_vv = 0.5 * gamma * gamma, e_uv = 0.5 * gamma;
  const double expected = 0.5 * 0.25 * (300.0 * e_vv * e_vv + 700.0 * e_uv * e_uv);
  CHECK(stretch_energy(mesh, x, p).energy == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("single hinge folded to a right angle") {
  const std::vector<Vec2> rest = {{0, 0}, {1, 0}, {0.5, 0.5}, {0.5, -0.5}};
  const auto mesh = build_mesh(rest, {{0, 1, 2}, {1, 0, 3}}, 1.0);
  const double k = 2e-5;
  const MaterialParams p{{100, 100, 100, k, 3 * k, 5 * k, 1.0}};
  // Rotate the second wing 90 degrees about the shared edge (the x axis).
  for (double sign : {1.0, -1.0}) {
    const std::vector<Vec3> x = {{0, 0, 0}, {1, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, sign * 0.5}};
    const double mean_height = 0.5;
    const double expected = k * (std::numbers::pi / 2) * (std::numbers::pi / 2) * 1.0 / (mean_height / 3.0);
    CHECK(bending_energy(mesh, x, p).energy == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(dihedral_angle(x[0], x[1], x[2], x[3])) == doctest::Approx(std::numbers::pi / 2));
  }
  const Vec3 e0(0, 0, 0), e1(1, 0, 0), o0(0.5, 0.5, 0);
  const double up = dihedral_angle(e0, e1, o0, {0.5, -0.4, 0.3});
  const double down = dihedral_angle(e0, e1, o0, {0.5, -0.4, -0.3});
  CHECK(up == doctest::Approx(-down));
  CHECK(up != 0.0);
  CHECK(dihedral_angle(e0, e1, o0, {0.5, -0.5, 0}) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("forces match central differences of the energy") {
  const auto mesh = make_grid_mesh(0.1, 0.025, 0.2);
  const MaterialParams p{{120, 80, 400, 3e-5, 1e-5, 2e-5, 0.2}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = perturbed(mesh, 0.005, seed);
    CAPTURE(seed);
    CHECK(gradient_error(mesh, x, p) < 1e-4);
  }
}

TEST_CASE("hinge gradient matches central differences") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.2);
  Hinge h;
  h.rest_angle = 0.1;
  h.rest_weight = 4.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::array<Vec3, 4> v = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, 0.6, 0), Vec3(0.4, -0.5, 0)};
    for (auto& q : v) q += Vec3(n(rng), n(rng), n(rng));
    const auto hb = hinge_bending(h, 1.5, v[0], v[1], v[2], v[3], true);
    const double step = 1e-7;
    for (int i = 0; i < 12; ++i) {
      auto a = v, b = v;
      a[i / 3][i % 3] += step;
      b[i / 3][i % 3] -= step;
      const double fd = (hinge_bending(h, 1.5, a[0], a[1], a[2], a[3], false).energy -
                         hinge_bending(h, 1.5, b[0], b[1], b[2], b[3], false).energy) /
                        (2 * step);
      CHECK(hb.gradient[i] == doctest::Approx(fd).epsilon(1e-5).scale(hb.gradient.norm()));
    }
    CHECK((hb.hessian - hb.hessian.transpose()).norm() < 1e-12 * (1.0 + hb.hessian.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> es(hb.hessian);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * (1.0 + hb.hessian.norm()));
  }
}

TEST_CASE("stretch Hessian approximation is symmetric positive semi-definite") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.1);
  const MaterialParams p{{120, 80, 400, 3e-5, 1e-5, 2e-5, 0.2}};
  Eigen::Matrix2d dm;
  dm << 1, 0, 0, 1;
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 x0 = Vec3(n(rng), n(rng), n(rng));
    const Vec3 x1 = Vec3(1, 0, 0) + Vec3(n(rng), n(rng), n(rng));
    const Vec3 x2 = Vec3(0, 1, 0) + Vec3(n(rng), n(rng), n(rng));
    const auto t = triangle_stretch(dm, 0.5, x0, x1, x2, p, true);
    CHECK((t.hessian - t.hessian.transpose()).norm() < 1e-12 * (1.0 + t.hessian.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> es(t.hessian);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * (1.0 + t.hessian.norm()));
  }
}

TEST_CASE("energies are non-negative and invariant under rigid motion") {
  const auto mesh = make_grid_mesh(0.2, 0.04, 0.2);
  const MaterialParams p{{120, 80, 400, 3e-5, 1e-5, 2e-5, 0.2}};
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = perturbed(mesh, 0.01, seed);
    const Eigen::Matrix3d r =
        Eigen::AngleAxisd(3.0 * u(rng), Vec3(u(rng), u(rng), u(rng)).normalized()).toRotationMatrix();
    const Vec3 t(u(rng), u(rng), u(rng));
    std::vector<Vec3> y;
    for (const auto& q : x) y.push_back(r * q + t);
    const auto sx = stretch_energy(mesh, x, p), sy = stretch_energy(mesh, y, p);
    const auto bx = bending_energy(mesh, x, p), by = bending_energy(mesh, y, p);
    CHECK(sx.energy >= 0.0);
    CHECK(bx.energy >= 0.0);
    CHECK(sy.energy == doctest::Approx(sx.energy).epsilon(1e-9));
    CHECK(by.energy == doctest::Approx(bx.energy).epsilon(1e-9));
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, (sy.force[i] - r * sx.force[i]).norm());
      scale = std::max(scale, sx.force[i].norm());
    }
    CHECK(worst <= 1e-8 * scale);
  }
}

TEST_CASE("bending stiffness picks the direction class") {
  const MaterialParams p{{1, 2, 3, 4e-6, 5e-6, 6e-6, 0.2}};
  CHECK(bending_stiffness(p, DirectionClass::kWarp) == 4e-6);
  CHECK(bending_stiffness(p, DirectionClass::kWeft) == 5e-6);
  CHECK(bending_stiffness(p, DirectionClass::kBias) == 6e-6);
  const auto mesh = make_grid_mesh(0.2, 0.1, 0.2);
  std::vector<Vec3> wrong(3);
  CHECK_THROWS_AS(stretch_energy(mesh, wrong, p), GeometryError);
}
