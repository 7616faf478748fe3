#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rvelle/fem.hpp"
#include "rvelle/material.hpp"
#include "rvelle/mesh.hpp"
#include "rvelle/parallel.hpp"

namespace rvelle {

/// In-plane small strain (tensor shear component, not engineering shear).
/// Plane strain: the out-of-plane component is zero.
struct Strain2 {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;
};

/// In-plane stress plus the out-of-plane normal component, MPa.
struct Stress2 {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;
  double zz = 0.0;
};

/// Volumetric/deviatoric energy split of the matrix. Moduli in MPa, energies
/// in mJ/mm^3. The deviator is the 3D one with eps_zz = 0.
namespace split {

inline double trace(const Strain2& e) { return e.xx + e.yy; }
inline double pos(double a) { return a > 0.0 ? a : 0.0; }
inline double neg(double a) { return a < 0.0 ? a : 0.0; }

/// ||dev eps||^2 including the out-of-plane entry -tr/3.
inline double dev_norm_sq(const Strain2& e) {
  const double m = trace(e) / 3.0;
  const double a = e.xx - m;
  const double b = e.yy - m;
  return a * a + b * b + m * m + 2.0 * e.xy * e.xy;
}

inline double psi_plus(const Strain2& e, double bulk, double mu) {
  const double t = pos(trace(e));
  return 0.5 * bulk * t * t + mu * dev_norm_sq(e);
}

inline double psi_minus(const Strain2& e, double bulk) {
  const double t = neg(trace(e));
  return 0.5 * bulk * t * t;
}

/// sigma = g (K <tr>+ 1 + 2 mu dev eps) + K <tr>- 1.
inline Stress2 stress(const Strain2& e, double g, double bulk, double mu) {
  const double t = trace(e);
  const double m = t / 3.0;
  const double vol = g * bulk * pos(t) + bulk * neg(t);
  return {vol + 2.0 * g * mu * (e.xx - m), vol + 2.0 * g * mu * (e.yy - m), 2.0 * g * mu * e.xy,
          vol - 2.0 * g * mu * m};
}

inline double isotropic_energy(const Strain2& e, double lambda, double mu) {
  const double t = trace(e);
  return 0.5 * lambda * t * t + mu * (e.xx * e.xx + e.yy * e.yy + 2.0 * e.xy * e.xy);
}

inline Stress2 isotropic_stress(const Strain2& e, double lambda, double mu) {
  const double t = trace(e);
  return {lambda * t + 2.0 * mu * e.xx, lambda * t + 2.0 * mu * e.yy, 2.0 * mu * e.xy, lambda * t};
}

}  // namespace split

/// Nodal phase field (length D) and displacements (length 2D, x/y
/// interleaved per node).
struct FieldState {
  Eigen::VectorXd d;
  Eigen::VectorXd u;
};

/// Macroscopic strain imposed as u = eps_bar . x on the whole boundary.
struct LoadCase {
  Eigen::Matrix2d macro_strain = Eigen::Matrix2d::Zero();

  static LoadCase uniaxial_y(double eps22) {
    LoadCase lc;
    lc.macro_strain(1, 1) = eps22;
    return lc;
  }
  [[nodiscard]] LoadCase transposed_axes() const {
    LoadCase lc;
    lc.macro_strain(0, 0) = macro_strain(1, 1);
    lc.macro_strain(1, 1) = macro_strain(0, 0);
    lc.macro_strain(0, 1) = lc.macro_strain(1, 0) = macro_strain(0, 1);
    return lc;
  }
};

/// Volume-averaged stress in GPa. sigma_z uses the phase-local closure
/// nu (sigma_x + sigma_y) before averaging.
struct HomogenizedStress {
  double sx = 0.0;
  double sy = 0.0;
  double sz = 0.0;
  double sxy = 0.0;

  [[nodiscard]] std::array<double, 4> as_array() const { return {sx, sy, sz, sxy}; }
};

struct SolverControls {
  double tol = 1e-3;
  int max_iter = 200;
  /// Inner semismooth-Newton iterations per displacement step.
  int max_newton = 25;
  /// Record the energy after every half step.
  bool trace_energy = false;
};

struct EnergySample {
  int iteration;
  char half_step;  // 'u' or 'd', '0' for the initial state
  double energy;
};

struct EvolutionResult {
  FieldState state;
  int iterations = 0;
  double final_increment = 0.0;
  std::vector<EnergySample> energy_trace;
};

/// Strain at the four Gauss points of element e.
std::array<Strain2, 4> element_strains(const RveMesh& mesh, const Q1Square& q1, int e,
                                       const Eigen::VectorXd& u);

/// Total energy in mJ:
///   sum over matrix elements of g(d) psi+ + psi- + g_c/2 (d^2/l + l |grad d|^2)
///   plus sum over fiber elements of the isotropic fiber energy.
/// Quadrature is 2x2 Gauss. In the reaction terms g(d) and d^2 each Gauss
/// point takes d from its nearest element corner (row-sum lumping), which
/// keeps the discrete phase-field problem monotone.
double energy(const FieldState& state, const RveMesh& mesh, const MaterialParams& mat);

/// Linear interpolation of the macro strain: u = eps_bar . x at every node.
Eigen::VectorXd affine_displacement(const RveMesh& mesh, const LoadCase& load);

/// Nodes with no incident matrix element; the phase field is held at 0 there.
std::vector<int> fiber_interior_nodes(const RveMesh& mesh);

/// Owns the assembly patterns and solver scratch for one mesh/material pair.
/// One instance per thread.
class PhaseFieldSolver {
 public:
  PhaseFieldSolver(const RveMesh& mesh, const MaterialParams& mat, Exec exec = Exec::serial);

  [[nodiscard]] const RveMesh& mesh() const { return mesh_; }
  [[nodiscard]] const MaterialParams& material() const { return mat_; }

  /// psi+ at every Gauss point (4 per element, 0 in fiber elements), MPa.
  [[nodiscard]] Eigen::VectorXd psi_plus_at_gauss(const Eigen::VectorXd& u) const;

  /// Minimizes the energy over d for fixed crack driving force psi+ (per
  /// Gauss point). `pinned_one` nodes are held at 1, fiber-interior nodes
  /// at 0; the result is clamped to [0, 1].
  Eigen::VectorXd solve_phase(const Eigen::VectorXd& psi_plus, const std::vector<int>& pinned_one);

  /// Minimizes the energy over u at fixed d with u = eps_bar . x on the
  /// boundary. Each Newton step freezes the sign of tr eps per Gauss point
  /// (taken from the current iterate) and solves one SPD system; a
  /// backtracking line search keeps the energy from increasing. `u_start`
  /// supplies the first sign pattern; empty means all '+'.
  Eigen::VectorXd solve_displacement(const Eigen::VectorXd& d, const LoadCase& load,
                                     const Eigen::VectorXd& u_start, int max_newton = 25);

  /// Phase field minimizing the crack functional with d = 1 on `pinned_one`.
  Eigen::VectorXd equilibrate(const std::vector<int>& pinned_one);

  /// Staggered alternate minimization starting from input phase field X.
  /// Nodes with X == 1 are held at 1. Throws SolverError after
  /// ctrl.max_iter iterations without reaching ctrl.tol.
  EvolutionResult evolve(const Eigen::VectorXd& X, const LoadCase& load, const SolverControls& ctrl);

  [[nodiscard]] HomogenizedStress homogenize(const FieldState& state) const;

 private:
  [[nodiscard]] double elastic_energy(const Eigen::VectorXd& d, const Eigen::VectorXd& u) const;
  /// Gradient of the elastic energy w.r.t. u (internal force vector).
  [[nodiscard]] Eigen::VectorXd internal_force(const Eigen::VectorXd& d, const Eigen::VectorXd& u) const;
  [[nodiscard]] std::vector<char> trace_signs(const Eigen::VectorXd& u) const;

  const RveMesh& mesh_;
  MaterialParams mat_;
  Exec exec_;
  Q1Square q1_;
  AssemblyPattern scalar_pattern_;
  AssemblyPattern vector_pattern_;
  SpdSolver phase_solver_;
  SpdSolver displacement_solver_;
  std::vector<int> fiber_interior_;
  std::vector<int> boundary_nodes_;
};

// Free-function forms of the solver operations.

Eigen::VectorXd equilibrate_seed(const std::array<int, 3>& seed_nodes, const RveMesh& mesh,
                                 const MaterialParams& mat);

EvolutionResult solve_evolution(const Eigen::VectorXd& X, const RveMesh& mesh, const MaterialParams& mat,
                                const LoadCase& load, const SolverControls& ctrl);

HomogenizedStress homogenize(const FieldState& state, const RveMesh& mesh, const MaterialParams& mat);

}  // namespace rvelle
