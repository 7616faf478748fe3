#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "rvelle/mesh.hpp"
#include "rvelle/parallel.hpp"

namespace rvelle {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct GaussPoint {
  double xi;
  double eta;
  double weight;
};

/// 2x2 Gauss rule on [-1, 1]^2. Point q sits next to corner q of the
/// counter-clockwise element numbering.
const std::array<GaussPoint, 4>& gauss_points();

/// Bilinear shape functions on the reference square.
std::array<double, 4> shape_values(double xi, double eta);

/// Shape data of a square element of side h at the four Gauss points. All
/// elements of a structured mesh share it.
struct Q1Square {
  explicit Q1Square(double h);

  double h;
  double jac_weight;  // weight * det J, identical for every point
  std::array<std::array<double, 4>, 4> N{};     // [q][a]
  std::array<std::array<double, 4>, 4> dNdx{};  // [q][a]
  std::array<std::array<double, 4>, 4> dNdy{};  // [q][a]
};

struct DirichletBc {
  int dof;
  double value;
};

/// Symmetric matrix (full storage), right-hand side and the constraint list.
struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::vector<DirichletBc> constraints;
};

/// Fixed sparsity of a Q1 field with `dofs_per_node` components plus, for
/// every element, the positions of its local matrix entries inside the
/// compressed value array. Assembly only touches values, so the symbolic
/// Cholesky analysis is reusable across solves.
class AssemblyPattern {
 public:
  AssemblyPattern(const RveMesh& mesh, int dofs_per_node);

  [[nodiscard]] int dofs_per_node() const { return dpn_; }
  [[nodiscard]] int local_size() const { return 4 * dpn_; }
  [[nodiscard]] int dof_count() const { return ndof_; }
  [[nodiscard]] const SparseMatrix& zero_matrix() const { return zero_; }

  /// Global dof of local index `k` of element e (node-major, component-minor).
  [[nodiscard]] int dof(const RveMesh& mesh, int e, int k) const {
    return mesh.element(e)[static_cast<std::size_t>(k / dpn_)] * dpn_ + k % dpn_;
  }

  /// Adds the element matrix (local_size^2, column-major) of every element
  /// for which element_matrix(e, out) returns true. Elements are visited in
  /// four colour classes of non-touching elements; the parallel variant runs
  /// each class concurrently, so both variants sum in the same order.
  template <typename ElementMatrixFn>
  void assemble(const RveMesh& mesh, SparseMatrix& A, Exec exec, ElementMatrixFn&& element_matrix) const;

 private:
  int dpn_;
  int ndof_;
  SparseMatrix zero_;
  std::vector<int> value_index_;  // [e][k_col * local + k_row]
  std::array<std::vector<int>, 4> colors_;
};

template <typename ElementMatrixFn>
void AssemblyPattern::assemble(const RveMesh& mesh, SparseMatrix& A, Exec exec,
                               ElementMatrixFn&& element_matrix) const {
  const int ls = local_size();
  const int ls2 = ls * ls;
  double* values = A.valuePtr();
  for (const auto& color : colors_) {
    for_each_index(exec, static_cast<std::ptrdiff_t>(color.size()), [&](std::ptrdiff_t idx) {
      const int e = color[static_cast<std::size_t>(idx)];
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8> ke(ls, ls);
      if (!element_matrix(e, ke)) return;
      const int* map = value_index_.data() + static_cast<std::ptrdiff_t>(e) * ls2;
      for (int c = 0; c < ls; ++c)
        for (int r = 0; r < ls; ++r) values[map[c * ls + r]] += ke(r, c);
    });
  }
}

/// Row/column elimination of the constraints: the right-hand side is
/// corrected with the eliminated columns, constrained rows become identity
/// rows carrying the prescribed value.
void apply_dirichlet(SparseSystem& system);

/// Sparse LDL^T solver that keeps the symbolic analysis of the first matrix
/// it sees. Not thread-safe; give every worker its own instance.
class SpdSolver {
 public:
  /// Solves the constrained system. Guarantees ||Ax - b|| <= 1e-10 ||b||
  /// (one refinement step is attempted) and exact constrained values.
  /// Throws SolverError on an indefinite pivot or when the residual bound
  /// cannot be met.
  Eigen::VectorXd solve(const SparseSystem& system);

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  Eigen::Index analyzed_size_ = -1;
};

/// Convenience: copy the system, apply its constraints and solve.
Eigen::VectorXd solve_spd(SparseSystem system);

}  // namespace rvelle
