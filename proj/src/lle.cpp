#include "rvelle/lle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rvelle/errors.hpp"

namespace rvelle {

std::vector<int> knn(const RowMatrix& data, const VecRef& query, int k, std::optional<int> exclude) {
  const auto n = static_cast<int>(data.rows());
  const int available = n - (exclude && *exclude >= 0 && *exclude < n ? 1 : 0);
  if (k < 1 || k > available) {
    std::ostringstream msg;
    msg << "knn: k=" << k << " out of range for " << available << " candidate rows";
    throw ConfigError(msg.str());
  }
  if (query.size() != data.cols()) throw ConfigError("knn: query dimension does not match data");
  std::vector<std::pair<double, int>> dist;
  dist.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (exclude && *exclude == i) continue;
    dist.emplace_back((data.row(i).transpose() - query).squaredNorm(), i);
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(j)].second;
  return out;
}

std::vector<std::vector<int>> knn_all(const RowMatrix& data, int k, Exec exec) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(data.rows()));
  for_each_index(exec, data.rows(), [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] = knn(data, data.row(i).transpose(), k, static_cast<int>(i));
  });
  return out;
}

Eigen::VectorXd local_weights(const VecRef& query, const RowMatrix& neighbors, double reg) {
  const auto k = neighbors.rows();
  if (k < 1) throw ConfigError("local_weights: need at least one neighbour");
  if (!(reg >= 0.0)) throw ConfigError("local_weights: reg must be >= 0");
  if (neighbors.cols() != query.size()) throw ConfigError("local_weights: dimension mismatch");

  const RowMatrix G = neighbors.rowwise() - query.transpose();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (G.row(j).squaredNorm() == 0.0) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
      w[j] = 1.0;
      return w;
    }
  }
  Eigen::MatrixXd C = G * G.transpose();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);

  if (reg > 0.0) {
    C.diagonal().array() += reg * C.trace() / static_cast<double>(k);
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw NumericalError("local_weights: regularized Gram matrix not SPD");
    Eigen::VectorXd w = llt.solve(ones);
    return w / w.sum();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw NumericalError("local_weights: eigen decomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double tol = 1e-12 * static_cast<double>(k) * std::max(lam[k - 1], std::numeric_limits<double>::min());
  int null_dim = 0;
  while (null_dim < k && lam[null_dim] <= tol) ++null_dim;
  if (null_dim == 0) {
    Eigen::VectorXd w = C.ldlt().solve(ones);
    return w / w.sum();
  }
  if (null_dim == 1) {
    const Eigen::VectorXd v = es.eigenvectors().col(0);
    const double s = v.sum();
    if (std::abs(s) > 1e-8 * std::sqrt(static_cast<double>(k))) return v / s;
  }
  throw NumericalError("local_weights: singular Gram matrix with reg = 0; retry with reg > 0");
}

RowMatrix gather_rows(const RowMatrix& m, const std::vector<int>& idx) {
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = m.row(idx[j]);
  return out;
}

Manifold fit(const RowMatrix& X, int k1, int dim, double reg, Exec exec) {
  const auto n = static_cast<int>(X.rows());
  if (k1 < 1 || k1 >= n) throw ConfigError("fit: need 1 <= k1 < N");
  if (dim < 1 || dim >= n - 1) throw ConfigError("fit: need 1 <= dim < N - 1");

  const auto nbrs = knn_all(X, k1, exec);
  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(n));
  for_each_index(exec, n, [&](std::ptrdiff_t i) {
    const auto& nb = nbrs[static_cast<std::size_t>(i)];
    rows[static_cast<std::size_t>(i)] = local_weights(X.row(i).transpose(), gather_rows(X, nb), reg);
  });

  Manifold man;
  man.X = X;
  man.k1 = k1;
  man.dim = dim;
  man.reg = reg;
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(static_cast<std::size_t>(n) * k1);
  for (int i = 0; i < n; ++i) {
    const auto& nb = nbrs[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < nb.size(); ++j)
      trip.emplace_back(i, nb[j], rows[static_cast<std::size_t>(i)][static_cast<Eigen::Index>(j)]);
  }
  man.W.resize(n, n);
  man.W.setFromTriplets(trip.begin(), trip.end());
  man.W.makeCompressed();

  // M = (I - W)^T (I - W), with the constant vector (an exact null vector
  // since rows of W sum to 1) shifted above the spectrum.
  Eigen::MatrixXd IW = -Eigen::MatrixXd(man.W);
  IW.diagonal().array() += 1.0;
  Eigen::MatrixXd M = IW.transpose() * IW;
  const double shift = M.trace() + 1.0;
  M.array() += shift / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw NumericalError("fit: eigen decomposition failed");
  man.eigenvalues = es.eigenvalues().head(dim);
  man.Y.resize(n, dim);
  for (int c = 0; c < dim; ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(c);
    v.normalize();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    man.Y.col(c) = v;
  }
  return man;
}

Embedding embed_new(const Manifold& man, const VecRef& x_star, int k2, std::optional<int> exclude) {
  Embedding out;
  out.neighbors = knn(man.X, x_star, k2, exclude);
  const RowMatrix nx = gather_rows(man.X, out.neighbors);
  out.weights = local_weights(x_star, nx, man.reg);
  out.y = gather_rows(man.Y, out.neighbors).transpose() * out.weights;
  out.fit_residual = (x_star - nx.transpose() * out.weights).norm();
  return out;
}

ReconstructionResult reconstruct(const Manifold& man, const VecRef& x_star, int k2, const RowMatrix& z_train,
                                 std::optional<int> exclude) {
  if (z_train.rows() != man.X.rows()) throw ConfigError("reconstruct: output rows do not match training rows");
  const Embedding emb = embed_new(man, x_star, k2, exclude);
  ReconstructionResult res;
  res.y_star = emb.y;
  res.fit_residual = emb.fit_residual;
  res.neighbors = knn(man.Y, res.y_star, k2, exclude);
  res.weights = local_weights(res.y_star, gather_rows(man.Y, res.neighbors), man.reg);
  res.z_star = gather_rows(z_train, res.neighbors).transpose() * res.weights;
  res.distance = (x_star - gather_rows(man.X, res.neighbors).transpose() * res.weights).norm();
  return res;
}

}  // namespace rvelle
