#include "drape/energy.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "drape/error.hpp"

namespace drape {

namespace {

void check_positions(const ClothMesh& mesh, std::span<const Vec3> positions) {
  if (positions.size() != mesh.vertex_count())
    throw GeometryError("state has " + std::to_string(positions.size()) + " vertices, mesh has " +
                        std::to_string(mesh.vertex_count()));
}

}  // namespace

GreenStrain triangle_strain(const Eigen::Matrix2d& rest_inverse, const Vec3& x0, const Vec3& x1,
                            const Vec3& x2) {
  Eigen::Matrix<double, 3, 2> ds;
  ds.col(0) = x1 - x0;
  ds.col(1) = x2 - x0;
  const Eigen::Matrix<double, 3, 2> f = ds * rest_inverse;
  return {0.5 * (f.col(0).squaredNorm() - 1.0), 0.5 * (f.col(1).squaredNorm() - 1.0),
          0.5 * f.col(0).dot(f.col(1))};
}

TriangleStretch triangle_stretch(const Eigen::Matrix2d& rest_inverse, double rest_area,
                                 const Vec3& x0, const Vec3& x1, const Vec3& x2,
                                 const MaterialParams& p, bool with_hessian) {
  Eigen::Matrix<double, 3, 2> ds;
  ds.col(0) = x1 - x0;
  ds.col(1) = x2 - x0;
  const Eigen::Matrix<double, 3, 2> f = ds * rest_inverse;
  const Vec3 fu = f.col(0);
  const Vec3 fv = f.col(1);
  const double e_uu = 0.5 * (fu.squaredNorm() - 1.0);
  const double e_vv = 0.5 * (fv.squaredNorm() - 1.0);
  const double e_uv = 0.5 * fu.dot(fv);
  const double kw = p.k_stretch_warp(), kf = p.k_stretch_weft(), kb = p.k_stretch_bias();

  // d(f_u)/d(x_a) = cu[a] * I, d(f_v)/d(x_a) = cv[a] * I.
  const double cu[3] = {-(rest_inverse(0, 0) + rest_inverse(1, 0)), rest_inverse(0, 0),
                        rest_inverse(1, 0)};
  const double cv[3] = {-(rest_inverse(0, 1) + rest_inverse(1, 1)), rest_inverse(0, 1),
                        rest_inverse(1, 1)};

  TriangleStretch out;
  out.energy = 0.5 * rest_area * (kw * e_uu * e_uu + kf * e_vv * e_vv + kb * e_uv * e_uv);

  Eigen::Matrix<double, 9, 1> g_uu, g_vv, g_uv;
  for (int a = 0; a < 3; ++a) {
    g_uu.segment<3>(3 * a) = cu[a] * fu;
    g_vv.segment<3>(3 * a) = cv[a] * fv;
    g_uv.segment<3>(3 * a) = 0.5 * (cu[a] * fv + cv[a] * fu);
  }
  out.gradient = rest_area * (kw * e_uu * g_uu + kf * e_vv * g_vv + kb * e_uv * g_uv);

  if (with_hessian) {
    out.hessian = rest_area * (kw * g_uu * g_uu.transpose() + kf * g_vv * g_vv.transpose() +
                               kb * g_uv * g_uv.transpose());
    // Strain curvature acts as C (x) I3 with C a 3x3 vertex coefficient
    // matrix; negative eigenvalues of C are clamped.
    const double su = rest_area * kw * e_uu, sv = rest_area * kf * e_vv, suv = rest_area * kb * e_uv;
    Eigen::Matrix3d c;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        c(a, b) = su * cu[a] * cu[b] + sv * cv[a] * cv[b] + 0.5 * suv * (cu[a] * cv[b] + cv[a] * cu[b]);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c);
    const Eigen::Matrix3d c_psd =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) out.hessian.block<3, 3>(3 * a, 3 * b).diagonal().array() += c_psd(a, b);
  } else {
    out.hessian.setZero();
  }
  return out;
}

double dihedral_angle(const Vec3& e0, const Vec3& e1, const Vec3& opp0, const Vec3& opp1) {
  const Vec3 e = e1 - e0;
  const Vec3 n1 = e.cross(opp0 - e0);
  const Vec3 n2 = (e0 - e1).cross(opp1 - e1);
  return std::atan2(n1.cross(n2).dot(e.normalized()), n1.dot(n2));
}

HingeBending hinge_bending(const Hinge& hinge, double stiffness, const Vec3& e0, const Vec3& e1,
                           const Vec3& opp0, const Vec3& opp1, bool with_hessian) {
  const Vec3 e = e1 - e0;
  const double e_len2 = e.squaredNorm();
  const Vec3 n1 = e.cross(opp0 - e0);
  const Vec3 n2 = (e0 - e1).cross(opp1 - e1);
  const double n1_sq = n1.squaredNorm();
  const double n2_sq = n2.squaredNorm();
  if (!(e_len2 > 0.0) || n1_sq <= 1e-24 * e_len2 * e_len2 || n2_sq <= 1e-24 * e_len2 * e_len2)
    throw GeometryError("degenerate hinge geometry");
  const double e_len = std::sqrt(e_len2);

  const double theta = std::atan2(n1.cross(n2).dot(e / e_len), n1.dot(n2));
  const double delta = theta - hinge.rest_angle;

  // Opposite vertices rotate their triangle about the edge; edge vertices
  // share the remainder according to where each apex projects on the edge.
  const Vec3 g_opp0 = -(e_len / n1_sq) * n1;
  const Vec3 g_opp1 = -(e_len / n2_sq) * n2;
  const double s0 = (opp0 - e0).dot(e) / e_len2;
  const double s1 = (opp1 - e0).dot(e) / e_len2;
  Eigen::Matrix<double, 12, 1> grad_theta;
  grad_theta.segment<3>(0) = -(1.0 - s0) * g_opp0 - (1.0 - s1) * g_opp1;
  grad_theta.segment<3>(3) = -s0 * g_opp0 - s1 * g_opp1;
  grad_theta.segment<3>(6) = g_opp0;
  grad_theta.segment<3>(9) = g_opp1;

  const double kw = stiffness * hinge.rest_weight;
  HingeBending out;
  out.energy = kw * delta * delta;
  out.gradient = 2.0 * kw * delta * grad_theta;
  if (with_hessian)
    out.hessian = 2.0 * kw * grad_theta * grad_theta.transpose();
  else
    out.hessian.setZero();
  return out;
}

double bending_stiffness(const MaterialParams& p, DirectionClass d) {
  switch (d) {
    case DirectionClass::kWarp: return p.k_bending_warp();
    case DirectionClass::kWeft: return p.k_bending_weft();
    case DirectionClass::kBias: return p.k_bending_bias();
  }
  return p.k_bending_bias();
}

EnergyResult stretch_energy(const ClothMesh& mesh, std::span<const Vec3> positions,
                            const MaterialParams& p) {
  check_positions(mesh, positions);
  EnergyResult out;
  out.force.assign(positions.size(), Vec3::Zero());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto s = triangle_stretch(mesh.rest_inverse[t], mesh.rest_areas[t], positions[tri[0]],
                                    positions[tri[1]], positions[tri[2]], p, false);
    out.energy += s.energy;
    for (int a = 0; a < 3; ++a) out.force[tri[a]] -= s.gradient.segment<3>(3 * a);
  }
  return out;
}

EnergyResult bending_energy(const ClothMesh& mesh, std::span<const Vec3> positions,
                            const MaterialParams& p) {
  check_positions(mesh, positions);
  EnergyResult out;
  out.force.assign(positions.size(), Vec3::Zero());
  for (const auto& h : mesh.hinges) {
    const auto b = hinge_bending(h, bending_stiffness(p, h.direction), positions[h.edge[0]],
                                 positions[h.edge[1]], positions[h.opposite[0]],
                                 positions[h.opposite[1]], false);
    out.energy += b.energy;
    const int idx[4] = {h.edge[0], h.edge[1], h.opposite[0], h.opposite[1]};
    for (int a = 0; a < 4; ++a) out.force[idx[a]] -= b.gradient.segment<3>(3 * a);
  }
  return out;
}

}  // namespace drape
