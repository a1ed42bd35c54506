#include "drape/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "drape/energy.hpp"
#include "drape/error.hpp"

namespace drape {

void SolverConfig::validate() const {
  if (!(time_step > 0.0)) throw ConfigError("time_step must be > 0");
  if (!(max_time_step >= time_step)) throw ConfigError("max_time_step must be >= time_step");
  if (!(step_growth >= 1.0)) throw ConfigError("step_growth must be >= 1");
  if (mass_damping < 0.0 || stiffness_damping < 0.0) throw ConfigError("damping must be >= 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(velocity_tolerance > 0.0) || !(residual_tolerance > 0.0))
    throw ConfigError("tolerances must be > 0");
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Gradient, PSD Hessian blocks and their product with the velocity, for all
// elements at the current configuration.
struct ForceEvaluation {
  std::vector<Vec3> force;   // gravity + internal
  std::vector<Vec3> k_times_v;
  double energy = 0.0;
};

class Relaxer {
 public:
  Relaxer(const ClothMesh& mesh, const SimState& state, const MaterialParams& p,
          const Vec3& gravity)
      : mesh_(mesh), params_(p), gravity_(gravity) {
    const auto nv = mesh.vertex_count();
    masses_.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) masses_[i] = p.density() * mesh.vertex_areas[i];
    free_.assign(nv, -1);
    int next = 0;
    for (std::size_t i = 0; i < nv; ++i)
      if (!state.pins.contains(static_cast<int>(i))) free_[i] = next++;
    dofs_ = 3 * next;
    build_pattern();
  }

  void evaluate(const std::vector<Vec3>& x, const std::vector<Vec3>& v, bool with_hessian,
                ForceEvaluation& out) {
    const auto nv = x.size();
    out.force.assign(nv, Vec3::Zero());
    out.k_times_v.assign(nv, Vec3::Zero());
    out.energy = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
      out.force[i] = masses_[i] * gravity_;
      out.energy -= masses_[i] * gravity_.dot(x[i]);
    }
    if (with_hessian) std::fill(k_values_.begin(), k_values_.end(), 0.0);

    for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
      const auto& tri = mesh_.triangles[t];
      const auto s = triangle_stretch(mesh_.rest_inverse[t], mesh_.rest_areas[t], x[tri[0]],
                                      x[tri[1]], x[tri[2]], params_, with_hessian);
      out.energy += s.energy;
      Eigen::Matrix<double, 9, 1> vl;
      for (int a = 0; a < 3; ++a) {
        out.force[tri[a]] -= s.gradient.segment<3>(3 * a);
        vl.segment<3>(3 * a) = v[tri[a]];
      }
      if (!with_hessian) continue;
      const Eigen::Matrix<double, 9, 1> kv = s.hessian * vl;
      for (int a = 0; a < 3; ++a) out.k_times_v[tri[a]] += kv.segment<3>(3 * a);
      scatter<9>(s.hessian, &tri_offsets_[t * 81]);
    }
    for (std::size_t h = 0; h < mesh_.hinges.size(); ++h) {
      const auto& hinge = mesh_.hinges[h];
      const int idx[4] = {hinge.edge[0], hinge.edge[1], hinge.opposite[0], hinge.opposite[1]};
      const auto b = hinge_bending(hinge, bending_stiffness(params_, hinge.direction), x[idx[0]],
                                   x[idx[1]], x[idx[2]], x[idx[3]], with_hessian);
      out.energy += b.energy;
      Eigen::Matrix<double, 12, 1> vl;
      for (int a = 0; a < 4; ++a) {
        out.force[idx[a]] -= b.gradient.segment<3>(3 * a);
        vl.segment<3>(3 * a) = v[idx[a]];
      }
      if (!with_hessian) continue;
      const Eigen::Matrix<double, 12, 1> kv = b.hessian * vl;
      for (int a = 0; a < 4; ++a) out.k_times_v[idx[a]] += kv.segment<3>(3 * a);
      scatter<12>(b.hessian, &hinge_offsets_[h * 144]);
    }
  }

  // System matrix (1 + h*alpha) M + (h*beta + h^2) K, lower triangle.
  void assemble_system(double mass_scale, double hessian_scale) {
    for (std::size_t k = 0; k < k_values_.size(); ++k)
      matrix_.valuePtr()[k] = hessian_scale * k_values_[k];
    for (std::size_t i = 0; i < free_.size(); ++i) {
      if (free_[i] < 0) continue;
      for (int c = 0; c < 3; ++c)
        matrix_.valuePtr()[diag_offsets_[3 * free_[i] + c]] += mass_scale * masses_[i];
    }
  }

  // Solves A dv = rhs by conjugate gradients preconditioned with the most
  // recent Cholesky factor of A. The factor is refreshed whenever CG needs
  // more than kRefactorIterations, so near equilibrium it is rarely rebuilt.
  bool solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) {
    if (has_factor_ && pcg(rhs, out)) return true;
    factor_.factorize(matrix_);
    ++factorizations_;
    if (factor_.info() != Eigen::Success) return false;
    has_factor_ = true;
    out = factor_.solve(rhs);
    return factor_.info() == Eigen::Success && out.allFinite();
  }

  long factorizations() const { return factorizations_; }

  int free_index(std::size_t v) const { return free_[v]; }
  int dofs() const { return dofs_; }
  double mass(std::size_t v) const { return masses_[v]; }

 private:
  // Each stored lower-triangle slot receives exactly one local entry.
  template <int N>
  void scatter(const Eigen::Matrix<double, N, N>& local, const int* offsets) {
    for (int c = 0; c < N; ++c)
      for (int r = 0; r < N; ++r) {
        const int off = offsets[c * N + r];
        if (off >= 0) k_values_[off] += local(r, c);
      }
  }

  static constexpr int kRefactorIterations = 8;

  bool pcg(const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
      x.setZero(rhs.size());
      return true;
    }
    const auto a = matrix_.selfadjointView<Eigen::Lower>();
    x = factor_.solve(rhs);
    Eigen::VectorXd r = rhs - a * x;
    Eigen::VectorXd z = factor_.solve(r);
    Eigen::VectorXd d = z;
    double rz = r.dot(z);
    for (int it = 0; it < kRefactorIterations; ++it) {
      if (r.norm() <= kCgTolerance * rhs_norm) return x.allFinite();
      const Eigen::VectorXd ad = a * d;
      const double curvature = d.dot(ad);
      if (!(curvature > 0.0)) return false;
      const double step = rz / curvature;
      x += step * d;
      r -= step * ad;
      z = factor_.solve(r);
      const double rz_next = r.dot(z);
      d = z + (rz_next / rz) * d;
      rz = rz_next;
    }
    return r.norm() <= kCgTolerance * rhs_norm && x.allFinite();
  }

  static constexpr double kCgTolerance = 1e-9;

  int lookup(int row, int col) const {
    const int* inner = matrix_.innerIndexPtr();
    const int begin = matrix_.outerIndexPtr()[col];
    const int end = matrix_.outerIndexPtr()[col + 1];
    const int* it = std::lower_bound(inner + begin, inner + end, row);
    return static_cast<int>(it - inner);
  }

  void build_pattern();

  const ClothMesh& mesh_;
  MaterialParams params_;
  Vec3 gravity_;
  std::vector<double> masses_;
  std::vector<int> free_;
  int dofs_ = 0;
  SparseMatrix matrix_;
  std::vector<double> k_values_;  // unscaled stiffness, same layout as matrix_
  std::vector<int> tri_offsets_;
  std::vector<int> hinge_offsets_;
  std::vector<int> diag_offsets_;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower> factor_;
  bool has_factor_ = false;
  long factorizations_ = 0;
};

void Relaxer::build_pattern() {
  // Pass 1: gather every (row >= col) slot touched by an element.
  std::vector<Eigen::Triplet<double>> entries;
  for (int d = 0; d < dofs_; ++d) entries.emplace_back(d, d, 0.0);
  auto add_block = [&](const int* verts, int count) {
    for (int a = 0; a < count; ++a)
      for (int b = 0; b < count; ++b) {
        const int fa = free_[verts[a]], fb = free_[verts[b]];
        if (fa < 0 || fb < 0) continue;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const int r = 3 * fa + i, c = 3 * fb + j;
            if (r >= c) entries.emplace_back(r, c, 0.0);
          }
      }
  };
  for (const auto& tri : mesh_.triangles) add_block(tri.data(), 3);
  for (const auto& h : mesh_.hinges) {
    const int idx[4] = {h.edge[0], h.edge[1], h.opposite[0], h.opposite[1]};
    add_block(idx, 4);
  }
  matrix_.resize(dofs_, dofs_);
  matrix_.setFromTriplets(entries.begin(), entries.end());
  matrix_.makeCompressed();
  k_values_.assign(static_cast<std::size_t>(matrix_.nonZeros()), 0.0);

  // Pass 2: slot table per element. Each unordered global pair (r, c) must
  // receive the symmetric local entry exactly once.
  auto fill_table = [&](const int* verts, int count, std::vector<int>& table) {
    const int n = 3 * count;
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) {
        const int fr = free_[verts[r / 3]], fc = free_[verts[c / 3]];
        int slot = -1;
        if (fr >= 0 && fc >= 0) {
          const int gr = 3 * fr + r % 3, gc = 3 * fc + c % 3;
          if (gr >= gc) slot = lookup(gr, gc);
        }
        table.push_back(slot);
      }
  };
  tri_offsets_.reserve(mesh_.triangles.size() * 81);
  for (const auto& tri : mesh_.triangles) fill_table(tri.data(), 3, tri_offsets_);
  hinge_offsets_.reserve(mesh_.hinges.size() * 144);
  for (const auto& h : mesh_.hinges) {
    const int idx[4] = {h.edge[0], h.edge[1], h.opposite[0], h.opposite[1]};
    fill_table(idx, 4, hinge_offsets_);
  }
  diag_offsets_.resize(static_cast<std::size_t>(dofs_));
  for (int d = 0; d < dofs_; ++d) diag_offsets_[d] = lookup(d, d);
  if (dofs_ > 0) factor_.analyzePattern(matrix_);
}

}  // namespace

std::vector<Vec3> residual_forces(const SceneConfig& scene, const ClothMesh& mesh,
                                  const SimState& state, const MaterialParams& p) {
  const auto st = stretch_energy(mesh, state.positions, p);
  const auto be = bending_energy(mesh, state.positions, p);
  std::vector<Vec3> f(mesh.vertex_count());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (state.pins.contains(static_cast<int>(i))) {
      f[i].setZero();
      continue;
    }
    f[i] = p.density() * mesh.vertex_areas[i] * scene.gravity + st.force[i] + be.force[i];
  }
  return f;
}

SolveResult solve_static(const Scene& scene, const ClothMesh& mesh, const MaterialParams& p,
                         const SolverConfig& solver, const std::optional<JitterConfig>& jitter) {
  solver.validate();
  p.validate();
  const auto started = std::chrono::steady_clock::now();

  SolveResult result;
  result.state = jitter ? perturb_initial(scene.initial, *jitter) : scene.initial;
  SimState& st = result.state;
  if (st.positions.size() != mesh.vertex_count() || st.velocities.size() != mesh.vertex_count())
    throw GeometryError("initial state does not match mesh");
  for (const auto& [v, target] : st.pins) {
    if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertex_count())
      throw ConfigError("pin references invalid vertex " + std::to_string(v));
    st.positions[v] = target;
    st.velocities[v].setZero();
  }

  Relaxer relaxer(mesh, st, p, scene.config.gravity);
  const double alpha = solver.mass_damping;
  const double beta = solver.stiffness_damping;
  double h = solver.time_step;

  ForceEvaluation eval;
  Eigen::VectorXd rhs(relaxer.dofs());
  Eigen::VectorXd dv(relaxer.dofs());
  auto& report = result.report;

  auto kinetic_energy = [&] {
    double ke = 0.0;
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
      ke += 0.5 * relaxer.mass(i) * st.velocities[i].squaredNorm();
    return ke;
  };

  // Last accepted state, restored when a grown step raises the energy.
  std::vector<Vec3> saved_x, saved_v;
  double saved_total = std::numeric_limits<double>::infinity();
  double saved_h = h;
  // Growth ceiling. Each rejection lowers it below the failed step so the
  // step cannot keep growing back into an overshooting size.
  double h_cap = solver.max_time_step;
  constexpr double kDivergenceSpeed = 100.0;  // m/s
  constexpr int kMaxHalvings = 6;

  long step = 0;
  for (;;) {
    const bool may_step = step < solver.max_steps;
    try {
      relaxer.evaluate(st.positions, st.velocities, may_step, eval);
    } catch (const GeometryError& e) {
      throw SolverError(std::string("geometry collapsed: ") + e.what(), step);
    }
    const double total = eval.energy + kinetic_energy();
    if (!std::isfinite(total)) throw SolverError("non-finite energy", step);

    if (step > 0 && saved_h > solver.time_step &&
        total > saved_total + 1e-12 * std::abs(saved_total)) {
      st.positions = saved_x;
      st.velocities = saved_v;
      h_cap = std::max(solver.time_step, 0.9 * saved_h);
      h = std::max(solver.time_step, 0.5 * saved_h);
      saved_h = h;
      ++report.rejected_steps;
      // Re-evaluate from the restored state with the smaller step.
      relaxer.evaluate(st.positions, st.velocities, may_step, eval);
    } else if (step > 0) {
      h = std::min(h_cap, saved_h * solver.step_growth);
    }

    report.energy = eval.energy;
    report.max_residual = 0.0;
    report.max_speed = 0.0;
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
      if (relaxer.free_index(i) < 0) continue;
      report.max_residual = std::max(report.max_residual, eval.force[i].norm());
      report.max_speed = std::max(report.max_speed, st.velocities[i].norm());
    }
    report.steps = step;
    if (!std::isfinite(report.max_residual)) throw SolverError("non-finite force", step);
    if (report.max_residual < solver.residual_tolerance &&
        report.max_speed < solver.velocity_tolerance) {
      report.converged = true;
      break;
    }
    if (!may_step) break;

    saved_x = st.positions;
    saved_v = st.velocities;
    saved_total = eval.energy + kinetic_energy();

    // A velocity update above the divergence limit is retried at half the
    // step, a few times below time_step if needed, before giving up. These are
    // start-up transients, so they leave the growth ceiling alone.
    for (int halvings = 0;; ++halvings) {
      relaxer.assemble_system(1.0 + h * alpha, h * beta + h * h);
      for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        const int fi = relaxer.free_index(i);
        if (fi < 0) continue;
        rhs.segment<3>(3 * fi) = h * (eval.force[i] - alpha * relaxer.mass(i) * st.velocities[i] -
                                      (beta + h) * eval.k_times_v[i]);
      }
      if (relaxer.dofs() > 0 && !relaxer.solve(rhs, dv)) throw SolverError("linear solve failed", step);
      if (!dv.allFinite()) throw SolverError("non-finite velocity update", step);
      double top_speed = 0.0;
      for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        const int fi = relaxer.free_index(i);
        if (fi >= 0) top_speed = std::max(top_speed, (st.velocities[i] + dv.segment<3>(3 * fi)).norm());
      }
      if (top_speed <= kDivergenceSpeed) break;
      if (halvings == kMaxHalvings) throw SolverError("divergence: vertex speed exceeded 100 m/s", step);
      h *= 0.5;
      ++report.rejected_steps;
    }
    saved_h = h;

    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
      const int fi = relaxer.free_index(i);
      if (fi < 0) continue;
      st.velocities[i] += dv.segment<3>(3 * fi);
      st.positions[i] += h * st.velocities[i];
    }
    ++step;
  }

  report.final_time_step = h;
  report.factorizations = relaxer.factorizations();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"time_step", c.time_step},
                     {"max_time_step", c.max_time_step},
                     {"step_growth", c.step_growth},
                     {"mass_damping", c.mass_damping},
                     {"stiffness_damping", c.stiffness_damping},
                     {"max_steps", c.max_steps},
                     {"velocity_tolerance", c.velocity_tolerance},
                     {"residual_tolerance", c.residual_tolerance}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
  c = SolverConfig{};
  c.time_step = j.value("time_step", c.time_step);
  c.max_time_step = j.value("max_time_step", std::max(c.max_time_step, c.time_step));
  c.step_growth = j.value("step_growth", c.step_growth);
  c.mass_damping = j.value("mass_damping", c.mass_damping);
  c.stiffness_damping = j.value("stiffness_damping", c.stiffness_damping);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.velocity_tolerance = j.value("velocity_tolerance", c.velocity_tolerance);
  c.residual_tolerance = j.value("residual_tolerance", c.residual_tolerance);
  c.validate();
}

void to_json(nlohmann::json& j, const ConvergenceReport& r) {
  j = nlohmann::json{{"converged", r.converged},
                     {"steps", r.steps},
                     {"max_speed", r.max_speed},
                     {"final_residual", r.max_residual},
                     {"energy", r.energy},
                     {"factorizations", r.factorizations},
                     {"rejected_steps", r.rejected_steps},
                     {"final_time_step", r.final_time_step},
                     {"wall_seconds", r.wall_seconds}};
}

}  // namespace drape
