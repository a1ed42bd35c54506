#pragma once

#include <optional>

#include "json.hpp"

#include "drape/material.hpp"
#include "drape/mesh.hpp"
#include "drape/scene.hpp"

namespace drape {

/// Implicit Euler steps start at time_step; each step that lowers the total
/// (potential + kinetic) energy grows the step by step_growth up to
/// max_time_step, and a step that raises it is retried at half size (never
/// below time_step). Growth is then capped just below the failed step for the
/// rest of the solve.
/// max_time_step == time_step gives fixed stepping.
struct SolverConfig {
  double time_step = 2e-3;
  double max_time_step = 0.05;
  double step_growth = 1.2;
  double mass_damping = 2.0;         // 1/s
  double stiffness_damping = 1e-3;   // s
  long max_steps = 20000;
  double velocity_tolerance = 1e-4;  // m/s
  double residual_tolerance = 1e-5;  // N per vertex

  void validate() const;
};

struct ConvergenceReport {
  bool converged = false;
  long steps = 0;
  double max_speed = 0.0;
  double max_residual = 0.0;
  double energy = 0.0;  // elastic + gravitational potential at the end
  long factorizations = 0;
  long rejected_steps = 0;
  double final_time_step = 0.0;
  double wall_seconds = 0.0;
};

struct SolveResult {
  SimState state;
  ConvergenceReport report;
};

/// Damped, linearized implicit Euler relaxation to static equilibrium.
/// Vertex masses come from the mesh areas and p.density(). Throws
/// SolverError when the trajectory diverges.
SolveResult solve_static(const Scene& scene, const ClothMesh& mesh, const MaterialParams& p,
                         const SolverConfig& solver,
                         const std::optional<JitterConfig>& jitter = std::nullopt);

// Net force (gravity + internal) on each vertex; pinned vertices report zero.
std::vector<Vec3> residual_forces(const SceneConfig& scene, const ClothMesh& mesh,
                                  const SimState& state, const MaterialParams& p);

void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);
void to_json(nlohmann::json& j, const ConvergenceReport& r);

}  // namespace drape
