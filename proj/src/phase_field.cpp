#include "rvelle/phase_field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rvelle/errors.hpp"

namespace rvelle {

namespace {

using Voigt = Eigen::Matrix3d;
using ElementMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

Eigen::Matrix<double, 3, 8> strain_operator(const Q1Square& q1, std::size_t q) {
  Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
  for (std::size_t a = 0; a < 4; ++a) {
    const auto c = static_cast<Eigen::Index>(2 * a);
    B(0, c) = q1.dNdx[q][a];
    B(1, c + 1) = q1.dNdy[q][a];
    B(2, c) = q1.dNdy[q][a];
    B(2, c + 1) = q1.dNdx[q][a];
  }
  return B;
}

// Tangent of the split stress with the sign of tr eps frozen; engineering
// shear in the third slot.
Voigt matrix_tangent(double g, bool tensile, double bulk, double mu) {
  const double c = tensile ? g : 1.0;
  Voigt D;
  D << c * bulk + 2.0 * g * mu * (2.0 / 3.0), c * bulk - 2.0 * g * mu / 3.0, 0.0,
      c * bulk - 2.0 * g * mu / 3.0, c * bulk + 2.0 * g * mu * (2.0 / 3.0), 0.0,
      0.0, 0.0, g * mu;
  return D;
}

Voigt isotropic_tangent(double lambda, double mu) {
  Voigt D;
  D << lambda + 2.0 * mu, lambda, 0.0, lambda, lambda + 2.0 * mu, 0.0, 0.0, 0.0, mu;
  return D;
}

void check_dims(const RveMesh& mesh, const Eigen::VectorXd& d, const Eigen::VectorXd& u) {
  if (d.size() != mesh.node_count() || u.size() != 2 * mesh.node_count()) {
    std::ostringstream msg;
    msg << "field dimensions (" << d.size() << ", " << u.size() << ") do not match mesh with "
        << mesh.node_count() << " nodes";
    throw ConfigError(msg.str());
  }
}

}  // namespace

std::array<Strain2, 4> element_strains(const RveMesh& mesh, const Q1Square& q1, int e,
                                       const Eigen::VectorXd& u) {
  const auto& conn = mesh.element(e);
  std::array<Strain2, 4> out{};
  for (std::size_t q = 0; q < 4; ++q) {
    Strain2 s;
    double dux_dy = 0.0;
    double duy_dx = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      const double ux = u[2 * conn[a]];
      const double uy = u[2 * conn[a] + 1];
      s.xx += q1.dNdx[q][a] * ux;
      s.yy += q1.dNdy[q][a] * uy;
      dux_dy += q1.dNdy[q][a] * ux;
      duy_dx += q1.dNdx[q][a] * uy;
    }
    s.xy = 0.5 * (dux_dy + duy_dx);
    out[q] = s;
  }
  return out;
}

double energy(const FieldState& state, const RveMesh& mesh, const MaterialParams& mat) {
  check_dims(mesh, state.d, state.u);
  const Q1Square q1(mesh.element_size());
  const double bulk = mat.bulk_m_mpa();
  const double mu = mat.mu_m_mpa();
  double total = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto eps = element_strains(mesh, q1, e, state.u);
    const auto& conn = mesh.element(e);
    for (std::size_t q = 0; q < 4; ++q) {
      if (mesh.phase(e) == Phase::Fiber) {
        total += q1.jac_weight * split::isotropic_energy(eps[q], mat.lambda_f_mpa(), mat.mu_f_mpa());
        continue;
      }
      const double dn = state.d[conn[q]];
      double gx = 0.0;
      double gy = 0.0;
      for (std::size_t a = 0; a < 4; ++a) {
        gx += q1.dNdx[q][a] * state.d[conn[a]];
        gy += q1.dNdy[q][a] * state.d[conn[a]];
      }
      const double bulk_term = mat.degradation(dn) * split::psi_plus(eps[q], bulk, mu) +
                               split::psi_minus(eps[q], bulk);
      const double crack = 0.5 * mat.g_c * (dn * dn / mat.l + mat.l * (gx * gx + gy * gy));
      total += q1.jac_weight * (bulk_term + crack);
    }
  }
  return total;
}

Eigen::VectorXd affine_displacement(const RveMesh& mesh, const LoadCase& load) {
  Eigen::VectorXd u(2 * mesh.node_count());
  const Eigen::Matrix2d& E = load.macro_strain;
  for (int a = 0; a < mesh.node_count(); ++a) {
    const Point2 p = mesh.node(a);
    u[2 * a] = E(0, 0) * p.x + E(0, 1) * p.y;
    u[2 * a + 1] = E(1, 0) * p.x + E(1, 1) * p.y;
  }
  return u;
}

std::vector<int> fiber_interior_nodes(const RveMesh& mesh) {
  std::vector<int> out;
  for (int a = 0; a < mesh.node_count(); ++a)
    if (!mesh.is_matrix_node(a)) out.push_back(a);
  return out;
}

PhaseFieldSolver::PhaseFieldSolver(const RveMesh& mesh, const MaterialParams& mat, Exec exec)
    : mesh_(mesh),
      mat_(mat),
      exec_(exec),
      q1_(mesh.element_size()),
      scalar_pattern_(mesh, 1),
      vector_pattern_(mesh, 2),
      fiber_interior_(fiber_interior_nodes(mesh)) {
  mat_.validate();
  for (int a = 0; a < mesh.node_count(); ++a)
    if (mesh.on_boundary(a)) boundary_nodes_.push_back(a);
}

Eigen::VectorXd PhaseFieldSolver::psi_plus_at_gauss(const Eigen::VectorXd& u) const {
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(4 * mesh_.element_count());
  const double bulk = mat_.bulk_m_mpa();
  const double mu = mat_.mu_m_mpa();
  for_each_index(exec_, mesh_.element_count(), [&](std::ptrdiff_t ei) {
    const int e = static_cast<int>(ei);
    if (mesh_.phase(e) == Phase::Fiber) return;
    const auto eps = element_strains(mesh_, q1_, e, u);
    for (std::size_t q = 0; q < 4; ++q) psi[4 * e + static_cast<int>(q)] = split::psi_plus(eps[q], bulk, mu);
  });
  return psi;
}

Eigen::VectorXd PhaseFieldSolver::solve_phase(const Eigen::VectorXd& psi_plus,
                                              const std::vector<int>& pinned_one) {
  if (psi_plus.size() != 4 * mesh_.element_count())
    throw ConfigError("solve_phase: psi+ must hold 4 values per element");
  const double gc = mat_.g_c;
  const double l = mat_.l;
  const double w = q1_.jac_weight;

  SparseSystem sys;
  sys.matrix = scalar_pattern_.zero_matrix();
  scalar_pattern_.assemble(mesh_, sys.matrix, exec_, [&](int e, ElementMatrix& ke) {
    if (mesh_.phase(e) == Phase::Fiber) return false;
    ke.setZero();
    for (std::size_t q = 0; q < 4; ++q) {
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
          ke(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
              w * gc * l * (q1_.dNdx[q][a] * q1_.dNdx[q][b] + q1_.dNdy[q][a] * q1_.dNdy[q][b]);
      const auto qi = static_cast<Eigen::Index>(q);
      ke(qi, qi) += w * (gc / l + 2.0 * psi_plus[4 * e + qi]);
    }
    return true;
  });

  sys.rhs = Eigen::VectorXd::Zero(mesh_.node_count());
  for (int e = 0; e < mesh_.element_count(); ++e) {
    if (mesh_.phase(e) == Phase::Fiber) continue;
    const auto& conn = mesh_.element(e);
    for (std::size_t q = 0; q < 4; ++q) sys.rhs[conn[q]] += w * 2.0 * psi_plus[4 * e + static_cast<int>(q)];
  }

  for (int a : fiber_interior_) sys.constraints.push_back({a, 0.0});
  for (int a : pinned_one) sys.constraints.push_back({a, 1.0});
  apply_dirichlet(sys);
  Eigen::VectorXd d = phase_solver_.solve(sys);
  return d.cwiseMax(0.0).cwiseMin(1.0);
}

std::vector<char> PhaseFieldSolver::trace_signs(const Eigen::VectorXd& u) const {
  std::vector<char> signs(static_cast<std::size_t>(4 * mesh_.element_count()), 1);
  for (int e = 0; e < mesh_.element_count(); ++e) {
    if (mesh_.phase(e) == Phase::Fiber) continue;
    const auto eps = element_strains(mesh_, q1_, e, u);
    for (std::size_t q = 0; q < 4; ++q)
      signs[static_cast<std::size_t>(4 * e) + q] = split::trace(eps[q]) >= 0.0 ? 1 : 0;
  }
  return signs;
}

double PhaseFieldSolver::elastic_energy(const Eigen::VectorXd& d, const Eigen::VectorXd& u) const {
  const double bulk = mat_.bulk_m_mpa();
  const double mu = mat_.mu_m_mpa();
  double total = 0.0;
  for (int e = 0; e < mesh_.element_count(); ++e) {
    const auto eps = element_strains(mesh_, q1_, e, u);
    const auto& conn = mesh_.element(e);
    for (std::size_t q = 0; q < 4; ++q) {
      if (mesh_.phase(e) == Phase::Fiber) {
        total += q1_.jac_weight * split::isotropic_energy(eps[q], mat_.lambda_f_mpa(), mat_.mu_f_mpa());
      } else {
        total += q1_.jac_weight * (mat_.degradation(d[conn[q]]) * split::psi_plus(eps[q], bulk, mu) +
                                   split::psi_minus(eps[q], bulk));
      }
    }
  }
  return total;
}

Eigen::VectorXd PhaseFieldSolver::internal_force(const Eigen::VectorXd& d, const Eigen::VectorXd& u) const {
  const double bulk = mat_.bulk_m_mpa();
  const double mu = mat_.mu_m_mpa();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(u.size());
  for (int e = 0; e < mesh_.element_count(); ++e) {
    const auto eps = element_strains(mesh_, q1_, e, u);
    const auto& conn = mesh_.element(e);
    Eigen::Matrix<double, 8, 1> fe = Eigen::Matrix<double, 8, 1>::Zero();
    for (std::size_t q = 0; q < 4; ++q) {
      const Stress2 s = mesh_.phase(e) == Phase::Fiber
                            ? split::isotropic_stress(eps[q], mat_.lambda_f_mpa(), mat_.mu_f_mpa())
                            : split::stress(eps[q], mat_.degradation(d[conn[q]]), bulk, mu);
      const Eigen::Vector3d sv(s.xx, s.yy, s.xy);
      fe.noalias() += q1_.jac_weight * strain_operator(q1_, q).transpose() * sv;
    }
    for (std::size_t a = 0; a < 4; ++a) {
      f[2 * conn[a]] += fe[static_cast<Eigen::Index>(2 * a)];
      f[2 * conn[a] + 1] += fe[static_cast<Eigen::Index>(2 * a + 1)];
    }
  }
  return f;
}

Eigen::VectorXd PhaseFieldSolver::solve_displacement(const Eigen::VectorXd& d, const LoadCase& load,
                                                     const Eigen::VectorXd& u_start, int max_newton) {
  const Eigen::VectorXd affine = affine_displacement(mesh_, load);
  Eigen::VectorXd u = u_start.size() == 0 ? affine : u_start;
  check_dims(mesh_, d, u);
  for (int a : boundary_nodes_) {
    u[2 * a] = affine[2 * a];
    u[2 * a + 1] = affine[2 * a + 1];
  }
  std::vector<char> signs = u_start.size() == 0
                                ? std::vector<char>(static_cast<std::size_t>(4 * mesh_.element_count()), 1)
                                : trace_signs(u);
  const double bulk = mat_.bulk_m_mpa();
  const double mu = mat_.mu_m_mpa();
  const Voigt fiber_D = isotropic_tangent(mat_.lambda_f_mpa(), mat_.mu_f_mpa());
  double E = elastic_energy(d, u);

  for (int it = 0; it < max_newton; ++it) {
    SparseSystem sys;
    sys.matrix = vector_pattern_.zero_matrix();
    vector_pattern_.assemble(mesh_, sys.matrix, exec_, [&](int e, ElementMatrix& ke) {
      ke.setZero();
      const auto& conn = mesh_.element(e);
      for (std::size_t q = 0; q < 4; ++q) {
        const auto B = strain_operator(q1_, q);
        const Voigt D = mesh_.phase(e) == Phase::Fiber
                            ? fiber_D
                            : matrix_tangent(mat_.degradation(d[conn[q]]),
                                             signs[static_cast<std::size_t>(4 * e) + q] != 0, bulk, mu);
        ke.noalias() += q1_.jac_weight * B.transpose() * D * B;
      }
      return true;
    });
    const Eigen::VectorXd r = internal_force(d, u);
    sys.rhs = -r;
    for (int a : boundary_nodes_) {
      sys.constraints.push_back({2 * a, 0.0});
      sys.constraints.push_back({2 * a + 1, 0.0});
    }
    apply_dirichlet(sys);
    const Eigen::VectorXd delta = displacement_solver_.solve(sys);
    if (delta.squaredNorm() == 0.0) break;

    // Free-dof slope of the energy along delta (boundary entries of delta are 0).
    const double slope = r.dot(delta);
    if (!(slope < 0.0)) break;
    double alpha = 1.0;
    bool accepted = false;
    double E_try = E;
    Eigen::VectorXd u_try;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      u_try = u + alpha * delta;
      E_try = elastic_energy(d, u_try);
      if (E_try <= E + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    u = std::move(u_try);
    E = E_try;
    std::vector<char> new_signs = trace_signs(u);
    if (alpha == 1.0 && new_signs == signs) break;
    signs = std::move(new_signs);
    if (alpha * delta.norm() <= 1e-13 * u.norm()) break;
  }
  return u;
}

Eigen::VectorXd PhaseFieldSolver::equilibrate(const std::vector<int>& pinned_one) {
  return solve_phase(Eigen::VectorXd::Zero(4 * mesh_.element_count()), pinned_one);
}

EvolutionResult PhaseFieldSolver::evolve(const Eigen::VectorXd& X, const LoadCase& load,
                                         const SolverControls& ctrl) {
  if (X.size() != mesh_.node_count()) throw ConfigError("solve_evolution: input length does not match mesh");
  if (ctrl.max_iter < 1 || !(ctrl.tol > 0.0)) throw ConfigError("solve_evolution: need tol > 0 and max_iter >= 1");
  std::vector<int> pinned;
  for (int a = 0; a < X.size(); ++a)
    if (X[a] == 1.0) pinned.push_back(a);

  EvolutionResult res;
  res.state.d = X;
  res.state.u = affine_displacement(mesh_, load);
  auto record = [&](int m, char half) {
    if (ctrl.trace_energy) res.energy_trace.push_back({m, half, energy(res.state, mesh_, mat_)});
  };
  record(0, '0');
  Eigen::VectorXd u_prev;  // empty: all-tensile signs on the first u-step
  for (int m = 1; m <= ctrl.max_iter; ++m) {
    res.state.u = solve_displacement(res.state.d, load, u_prev, ctrl.max_newton);
    u_prev = res.state.u;
    record(m, 'u');
    Eigen::VectorXd d_new = solve_phase(psi_plus_at_gauss(res.state.u), pinned);
    res.final_increment = (d_new - res.state.d).cwiseAbs().maxCoeff();
    res.state.d = std::move(d_new);
    record(m, 'd');
    res.iterations = m;
    if (res.final_increment < ctrl.tol) return res;
  }
  std::ostringstream msg;
  msg << "staggered scheme did not converge in " << ctrl.max_iter << " iterations, final |dd|_inf = "
      << res.final_increment;
  throw SolverError(msg.str());
}

HomogenizedStress PhaseFieldSolver::homogenize(const FieldState& state) const {
  check_dims(mesh_, state.d, state.u);
  const double bulk = mat_.bulk_m_mpa();
  const double mu = mat_.mu_m_mpa();
  const double nu_m = mat_.nu_m();
  const double nu_f = mat_.nu_f();
  double sx = 0.0, sy = 0.0, sz = 0.0, sxy = 0.0;
  for (int e = 0; e < mesh_.element_count(); ++e) {
    const auto eps = element_strains(mesh_, q1_, e, state.u);
    const auto& conn = mesh_.element(e);
    const bool fiber = mesh_.phase(e) == Phase::Fiber;
    for (std::size_t q = 0; q < 4; ++q) {
      const Stress2 s = fiber ? split::isotropic_stress(eps[q], mat_.lambda_f_mpa(), mat_.mu_f_mpa())
                              : split::stress(eps[q], mat_.degradation(state.d[conn[q]]), bulk, mu);
      const double nu = fiber ? nu_f : nu_m;
      sx += q1_.jac_weight * s.xx;
      sy += q1_.jac_weight * s.yy;
      sxy += q1_.jac_weight * s.xy;
      sz += q1_.jac_weight * nu * (s.xx + s.yy);
    }
  }
  const double scale = 1.0 / (mesh_.area() * MaterialParams::kMpaPerGpa);
  return {sx * scale, sy * scale, sz * scale, sxy * scale};
}

Eigen::VectorXd equilibrate_seed(const std::array<int, 3>& seed_nodes, const RveMesh& mesh,
                                 const MaterialParams& mat) {
  PhaseFieldSolver solver(mesh, mat);
  return solver.equilibrate({seed_nodes.begin(), seed_nodes.end()});
}

EvolutionResult solve_evolution(const Eigen::VectorXd& X, const RveMesh& mesh, const MaterialParams& mat,
                                const LoadCase& load, const SolverControls& ctrl) {
  PhaseFieldSolver solver(mesh, mat);
  return solver.evolve(X, load, ctrl);
}

HomogenizedStress homogenize(const FieldState& state, const RveMesh& mesh, const MaterialParams& mat) {
  return PhaseFieldSolver(mesh, mat).homogenize(state);
}

}  // namespace rvelle
