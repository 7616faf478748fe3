#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rvelle/parallel.hpp"

namespace rvelle {

/// Samples stored one per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// Indices of the k rows of `data` closest to `query` in the Euclidean norm,
/// nearest first, ties broken by the smaller index. `exclude` is never
/// returned. Exhaustive scan.
std::vector<int> knn(const RowMatrix& data, const VecRef& query, int k, std::optional<int> exclude = {});

/// knn of every row against the others (self excluded). Row i of the
/// result lists the neighbours of sample i.
std::vector<std::vector<int>> knn_all(const RowMatrix& data, int k, Exec exec);

/// Affine reconstruction weights of `query` from the rows of `neighbors`:
/// minimizes ||query - sum_j w_j n_j||^2 subject to sum_j w_j = 1 by solving
/// (C + reg tr(C)/k I) w = 1 and normalizing, C_ij = (q - n_i).(q - n_j).
///
/// A neighbour that coincides with the query gets the whole weight. With
/// reg = 0 a rank-one-deficient C (query in the affine hull of the
/// neighbours) is resolved through its null vector; any other singular case
/// throws NumericalError.
Eigen::VectorXd local_weights(const VecRef& query, const RowMatrix& neighbors, double reg);

/// Fitted embedding. W holds k1 weights per row, Y one embedded sample per row.
struct Manifold {
  RowMatrix X;
  RowMatrix Y;
  RowSparse W;
  Eigen::VectorXd eigenvalues;  // of (I - W)^T (I - W) for the kept directions
  int k1 = 0;
  int dim = 0;
  double reg = 1e-3;

  [[nodiscard]] int size() const { return static_cast<int>(X.rows()); }
};

/// Locally linear embedding of the rows of X into `dim` dimensions. The
/// columns of Y are the unit eigenvectors of M = (I - W)^T (I - W) for its
/// smallest eigenvalues once the constant vector is removed; each column's
/// largest-magnitude entry is positive.
Manifold fit(const RowMatrix& X, int k1, int dim, double reg = 1e-3, Exec exec = Exec::parallel);

/// Gathers rows `idx` of `m`.
RowMatrix gather_rows(const RowMatrix& m, const std::vector<int>& idx);

struct Embedding {
  Eigen::VectorXd y;
  std::vector<int> neighbors;
  Eigen::VectorXd weights;
  double fit_residual = 0.0;
};

/// Maps a new input onto the manifold through its k2 nearest training inputs.
Embedding embed_new(const Manifold& man, const VecRef& x_star, int k2, std::optional<int> exclude = {});

struct ReconstructionResult {
  Eigen::VectorXd z_star;
  Eigen::VectorXd y_star;
  double distance = 0.0;      // ||x* - sum_{j in S*} w_j X_j|| with the low-dimensional weights
  double fit_residual = 0.0;  // same norm with the high-dimensional step-1 weights
  std::vector<int> neighbors;  // S*
  Eigen::VectorXd weights;     // low-dimensional weights over S*
};

/// Out-of-sample reconstruction: embed x*, take its k2 nearest embedded
/// training samples, and combine their outputs (rows of z_train, any width)
/// with the weights that reconstruct y* from them. `exclude` drops one
/// training row from both neighbour searches (leave-one-out).
ReconstructionResult reconstruct(const Manifold& man, const VecRef& x_star, int k2, const RowMatrix& z_train,
                                 std::optional<int> exclude = {});

}  // namespace rvelle
