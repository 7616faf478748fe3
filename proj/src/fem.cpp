#include "rvelle/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rvelle/errors.hpp"

namespace rvelle {

const std::array<GaussPoint, 4>& gauss_points() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<GaussPoint, 4> pts{{{-g, -g, 1.0}, {g, -g, 1.0}, {g, g, 1.0}, {-g, g, 1.0}}};
  return pts;
}

std::array<double, 4> shape_values(double xi, double eta) {
  return {0.25 * (1 - xi) * (1 - eta), 0.25 * (1 + xi) * (1 - eta), 0.25 * (1 + xi) * (1 + eta),
          0.25 * (1 - xi) * (1 + eta)};
}

Q1Square::Q1Square(double side) : h(side), jac_weight(0.25 * side * side) {
  static constexpr std::array<double, 4> xa{-1, 1, 1, -1};
  static constexpr std::array<double, 4> ya{-1, -1, 1, 1};
  const auto& gp = gauss_points();
  for (std::size_t q = 0; q < 4; ++q) {
    N[q] = shape_values(gp[q].xi, gp[q].eta);
    for (std::size_t a = 0; a < 4; ++a) {
      // d/dx = (2/h) d/dxi
      dNdx[q][a] = 0.25 * xa[a] * (1 + ya[a] * gp[q].eta) * 2.0 / h;
      dNdy[q][a] = 0.25 * ya[a] * (1 + xa[a] * gp[q].xi) * 2.0 / h;
    }
  }
}

AssemblyPattern::AssemblyPattern(const RveMesh& mesh, int dofs_per_node)
    : dpn_(dofs_per_node), ndof_(mesh.node_count() * dofs_per_node) {
  const int ne = mesh.element_count();
  const int ls = local_size();
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(static_cast<std::size_t>(ne) * ls * ls);
  for (int e = 0; e < ne; ++e)
    for (int c = 0; c < ls; ++c)
      for (int r = 0; r < ls; ++r) trip.emplace_back(dof(mesh, e, r), dof(mesh, e, c), 0.0);
  zero_.resize(ndof_, ndof_);
  zero_.setFromTriplets(trip.begin(), trip.end());
  zero_.makeCompressed();

  value_index_.resize(static_cast<std::size_t>(ne) * ls * ls);
  const int* outer = zero_.outerIndexPtr();
  const int* inner = zero_.innerIndexPtr();
  for (int e = 0; e < ne; ++e) {
    for (int c = 0; c < ls; ++c) {
      const int col = dof(mesh, e, c);
      for (int r = 0; r < ls; ++r) {
        const int row = dof(mesh, e, r);
        const int* begin = inner + outer[col];
        const int* end = inner + outer[col + 1];
        const int* it = std::lower_bound(begin, end, row);
        value_index_[static_cast<std::size_t>(e) * ls * ls + c * ls + r] = static_cast<int>(it - inner);
      }
    }
  }

  const int n = mesh.elements_per_side();
  for (int e = 0; e < ne; ++e) {
    const int i = e % n;
    const int j = e / n;
    colors_[static_cast<std::size_t>((j % 2) * 2 + (i % 2))].push_back(e);
  }
}

void apply_dirichlet(SparseSystem& system) {
  SparseMatrix& A = system.matrix;
  Eigen::VectorXd& b = system.rhs;
  const Eigen::Index n = A.rows();
  std::vector<char> fixed(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  for (const auto& bc : system.constraints) {
    if (bc.dof < 0 || bc.dof >= n) throw ConfigError("dirichlet: constrained dof out of range");
    fixed[static_cast<std::size_t>(bc.dof)] = 1;
    value[bc.dof] = bc.value;
  }
  for (Eigen::Index c = 0; c < A.outerSize(); ++c) {
    const bool cfixed = fixed[static_cast<std::size_t>(c)] != 0;
    for (SparseMatrix::InnerIterator it(A, c); it; ++it) {
      const bool rfixed = fixed[static_cast<std::size_t>(it.row())] != 0;
      if (cfixed && !rfixed) b[it.row()] -= it.value() * value[c];
      if (cfixed || rfixed) it.valueRef() = (it.row() == c) ? 1.0 : 0.0;
    }
  }
  for (const auto& bc : system.constraints) b[bc.dof] = bc.value;
}

Eigen::VectorXd SpdSolver::solve(const SparseSystem& system) {
  const SparseMatrix& A = system.matrix;
  if (!analyzed_ || analyzed_size_ != A.rows()) {
    ldlt_.analyzePattern(A);
    analyzed_ = true;
    analyzed_size_ = A.rows();
  }
  ldlt_.factorize(A);
  if (ldlt_.info() != Eigen::Success) throw SolverError("spd solve: numerical factorization failed");
  const Eigen::VectorXd& D = ldlt_.vectorD();
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    if (!(D[i] > 0.0)) {
      std::ostringstream msg;
      msg << "spd solve: matrix not positive definite, pivot " << i << " = " << D[i];
      throw SolverError(msg.str());
    }
  }
  const double bnorm = system.rhs.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(A.rows());
  Eigen::VectorXd x = ldlt_.solve(system.rhs);
  double res = (A * x - system.rhs).norm();
  if (res > 1e-10 * bnorm) {
    x += ldlt_.solve(system.rhs - A * x);
    res = (A * x - system.rhs).norm();
  }
  if (!std::isfinite(res) || res > 1e-10 * bnorm) {
    std::ostringstream msg;
    msg << "spd solve: relative residual " << res / bnorm << " above 1e-10 after 1 refinement step";
    throw SolverError(msg.str());
  }
  for (const auto& bc : system.constraints) x[bc.dof] = bc.value;
  return x;
}

Eigen::VectorXd solve_spd(SparseSystem system) {
  apply_dirichlet(system);
  SpdSolver solver;
  return solver.solve(system);
}

}  // namespace rvelle
