#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "drape/material.hpp"
#include "drape/mesh.hpp"

namespace drape {

struct EnergyResult {
  double energy = 0.0;
  std::vector<Vec3> force;  // -dE/dx per vertex
};

/// Membrane energy 0.5 * A * (kWarp e_uu^2 + kWeft e_vv^2 + kBias e_uv^2)
/// on the Green-Lagrange strain of each triangle.
EnergyResult stretch_energy(const ClothMesh& mesh, std::span<const Vec3> positions,
                            const MaterialParams& p);

/// Hinge energy k * (theta - theta_rest)^2 * |e| / h.
EnergyResult bending_energy(const ClothMesh& mesh, std::span<const Vec3> positions,
                            const MaterialParams& p);

struct GreenStrain {
  double uu = 0.0;
  double vv = 0.0;
  double uv = 0.0;
};

GreenStrain triangle_strain(const Eigen::Matrix2d& rest_inverse, const Vec3& x0, const Vec3& x1,
                            const Vec3& x2);

struct TriangleStretch {
  double energy = 0.0;
  Eigen::Matrix<double, 9, 1> gradient;
  // Positive semi-definite approximation of the Hessian: Gauss-Newton plus
  // the strain curvature with negative eigenvalues clamped.
  Eigen::Matrix<double, 9, 9> hessian;
};

TriangleStretch triangle_stretch(const Eigen::Matrix2d& rest_inverse, double rest_area,
                                 const Vec3& x0, const Vec3& x1, const Vec3& x2,
                                 const MaterialParams& p, bool with_hessian);

// Signed dihedral angle; zero when both triangles are coplanar and unfolded.
double dihedral_angle(const Vec3& e0, const Vec3& e1, const Vec3& opp0, const Vec3& opp1);

struct HingeBending {
  double energy = 0.0;
  Eigen::Matrix<double, 12, 1> gradient;  // order: edge0, edge1, opp0, opp1
  Eigen::Matrix<double, 12, 12> hessian;  // Gauss-Newton 2 k w grad(theta) grad(theta)^T
};

HingeBending hinge_bending(const Hinge& hinge, double stiffness, const Vec3& e0, const Vec3& e1,
                           const Vec3& opp0, const Vec3& opp1, bool with_hessian);

double bending_stiffness(const MaterialParams& p, DirectionClass d);

}  // namespace drape
