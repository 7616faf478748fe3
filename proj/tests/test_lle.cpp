#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "rvelle/errors.hpp"
#include "rvelle/lle.hpp"

using namespace rvelle;

namespace {

RowMatrix random_matrix(int rows, int cols, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  RowMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

/// N points on a random dim-dimensional affine subspace of R^D.
RowMatrix affine_data(int n, int dim, int D, std::mt19937& rng) {
  const RowMatrix coords = random_matrix(n, dim, rng);
  const RowMatrix basis = random_matrix(dim, D, rng);
  const RowMatrix offset = random_matrix(1, D, rng);
  RowMatrix X = coords * basis;
  X.rowwise() += offset.row(0);
  return X;
}

Eigen::MatrixXd random_rotation(int D, std::mt19937& rng) {
  const Eigen::MatrixXd A = random_matrix(D, D, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  return qr.householderQ();
}

}  // namespace

TEST_CASE("knn: examples") {
  RowMatrix line(4, 1);
  line << 0, 1, 2, 3;
  Eigen::VectorXd q(1);
  q << 0.6;
  CHECK(knn(line, q, 2) == std::vector<int>{1, 0});

  std::mt19937 rng(1);
  const RowMatrix data = random_matrix(10, 3, rng);
  const auto nn = knn(data, data.row(5).transpose(), 1, 5);
  CHECK(nn.size() == 1);
  CHECK(nn[0] != 5);
  CHECK(nn == oracle::brute_knn(data, data.row(5).transpose(), 1, 5));

  RowMatrix ties(3, 1);
  ties << 1, -1, 1;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  CHECK(knn(ties, zero, 3) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(knn(ties, zero, 4), ConfigError);
}

TEST_CASE("knn: matches the exhaustive oracle") {
  std::mt19937 rng(2);
  const RowMatrix data = random_matrix(100, 5, rng);
  for (int k : {1, 3, 10, 50, 99}) {
    for (int t = 0; t < 10; ++t) {
      const Eigen::VectorXd q = random_matrix(1, 5, rng).row(0).transpose();
      CHECK(knn(data, q, k) == oracle::brute_knn(data, q, k));
    }
    const auto all = knn_all(data, k, Exec::parallel);
    for (int i = 0; i < 100; ++i) CHECK(all[static_cast<std::size_t>(i)] == oracle::brute_knn(data, data.row(i).transpose(), k, i));
    CHECK(all == knn_all(data, k, Exec::serial));
  }
}

TEST_CASE("local_weights: examples") {
  std::mt19937 rng(3);
  const RowMatrix nb = random_matrix(4, 6, rng);
  const Eigen::VectorXd w = local_weights(nb.row(2).transpose(), nb, 1e-9);
  CHECK(w[2] >= 1.0 - 1e-3);
  CHECK(std::abs(w.sum() - 1.0) <= 1e-10);

  RowMatrix tri(3, 2);
  tri << 1, 0, -0.5, std::sqrt(3.0) / 2, -0.5, -std::sqrt(3.0) / 2;
  const Eigen::VectorXd c = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd wt = local_weights(c, tri, 0.0);
  for (int i = 0; i < 3; ++i) CHECK(wt[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  for (int t = 0; t < 20; ++t) {
    const int D = 6, k = 2 + t % 5;
    const RowMatrix n = random_matrix(k, D, rng);
    Eigen::VectorXd a = random_matrix(1, k, rng).row(0).transpose();
    a /= a.sum();
    const Eigen::VectorXd q = n.transpose() * a;
    const Eigen::VectorXd w2 = local_weights(q, n, 0.0);
    CHECK((n.transpose() * w2 - q).norm() <= 1e-10 * std::max(1.0, q.norm()));
    CHECK((w2 - oracle::kkt_weights(q, n, 0.0)).cwiseAbs().maxCoeff() <= 1e-8);
  }

  // Two coincident neighbours with the query elsewhere: singular without
  // regularization.
  RowMatrix dup(3, 2);
  dup << 1, 0, 1, 0, 0, 1;
  Eigen::VectorXd far(2);
  far << 5, 5;
  CHECK_THROWS_AS(local_weights(far, dup, 0.0), NumericalError);
  CHECK_NOTHROW(local_weights(far, dup, 1e-3));
}

TEST_CASE("local_weights: KKT oracle equivalence on random instances") {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> ud(2, 8), uk(1, 4);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const int D = ud(rng), k = uk(rng);
    const double reg = (t % 2 == 0) ? 1e-3 : 0.0;
    const RowMatrix n = random_matrix(k, D, rng);
    const Eigen::VectorXd q = random_matrix(1, D, rng).row(0).transpose();
    if (reg == 0.0 && k > D) continue;
    const Eigen::VectorXd w = local_weights(q, n, reg);
    CHECK((w - oracle::kkt_weights(q, n, reg)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::abs(w.sum() - 1.0) <= 1e-10);
    ++checked;
  }
  CHECK(checked >= 90);
}

TEST_CASE("local_weights: invariance under rotation, scaling and translation") {
  std::mt19937 rng(5);
  for (int t = 0; t < 50; ++t) {
    const int D = 3 + t % 4, k = 2 + t % 4;
    const RowMatrix n = random_matrix(k, D, rng);
    const Eigen::VectorXd q = random_matrix(1, D, rng).row(0).transpose();
    const Eigen::MatrixXd R = random_rotation(D, rng);
    const double s = 0.1 + 10.0 * (t % 7);
    const Eigen::VectorXd b = random_matrix(1, D, rng, 5.0).row(0).transpose();
    RowMatrix n2 = (s * (n * R.transpose())).rowwise() + b.transpose();
    const Eigen::VectorXd q2 = s * (R * q) + b;
    const Eigen::VectorXd w1 = local_weights(q, n, 1e-3), w2 = local_weights(q2, n2, 1e-3);
    CHECK((w1 - w2).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("fit: invariants") {
  std::mt19937 rng(6);
  const RowMatrix X = random_matrix(60, 7, rng);
  const Manifold man = fit(X, 8, 3);
  CHECK(man.Y.rows() == 60);
  CHECK(man.Y.cols() == 3);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(60);
  const Eigen::VectorXd resid = ones - man.W * ones;
  CHECK(resid.cwiseAbs().maxCoeff() <= 1e-12);
  for (int i = 0; i < 60; ++i) {
    CHECK(man.W.row(i).nonZeros() == 8);
    CHECK(man.W.coeff(i, i) == 0.0);
  }
  for (int c = 0; c < 3; ++c) {
    const auto col = man.Y.col(c);
    CHECK(col.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(col.sum()) <= 1e-8);
    Eigen::Index arg;
    col.cwiseAbs().maxCoeff(&arg);
    CHECK(col[arg] > 0.0);
    for (int c2 = 0; c2 < c; ++c2) CHECK(std::abs(col.dot(man.Y.col(c2))) <= 1e-8);
  }
  // The constant vector is an exact null vector of M, below every kept one.
  Eigen::SparseMatrix<double> I(60, 60);
  I.setIdentity();
  const Eigen::MatrixXd IW = Eigen::MatrixXd(I) - Eigen::MatrixXd(man.W);
  const Eigen::MatrixXd M = IW.transpose() * IW;
  CHECK((M * ones).norm() / ones.norm() <= 1e-8);
  for (int c = 0; c < 3; ++c) {
    CHECK(man.eigenvalues[c] >= -1e-10);
    CHECK((M * man.Y.col(c) - man.eigenvalues[c] * man.Y.col(c)).norm() <= 1e-8);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  CHECK(es.eigenvalues()[0] <= 1e-8);
  for (int c = 0; c < 3; ++c) CHECK(man.eigenvalues[c] == doctest::Approx(es.eigenvalues()[c + 1]).epsilon(1e-8));

  CHECK_THROWS_AS(fit(X, 60, 3), ConfigError);
  CHECK_THROWS_AS(fit(X, 8, 59), ConfigError);
}

TEST_CASE("fit: serial and parallel agree bitwise, repeated fits are identical") {
  std::mt19937 rng(7);
  const RowMatrix X = random_matrix(80, 10, rng);
  const Manifold a = fit(X, 10, 4, 1e-3, Exec::serial);
  const Manifold b = fit(X, 10, 4, 1e-3, Exec::parallel);
  const Manifold c = fit(X, 10, 4, 1e-3, Exec::parallel);
  CHECK(a.Y == b.Y);
  CHECK(b.Y == c.Y);
  CHECK(Eigen::MatrixXd(a.W) == Eigen::MatrixXd(b.W));
}

TEST_CASE("fit: affine data are reconstructed exactly") {
  std::mt19937 rng(8);
  const RowMatrix X = affine_data(50, 3, 12, rng);
  const Manifold man = fit(X, 8, 3, 1e-9);
  const RowMatrix R = X - man.W * X;
  CHECK(R.squaredNorm() <= 1e-8 * X.squaredNorm());
}

TEST_CASE("fit: swiss roll trustworthiness") {
  const RowMatrix X = oracle::swiss_roll(1000, 42);
  const Manifold man = fit(X, 10, 2);
  const double t = oracle::trustworthiness(X, man.Y, 10);
  MESSAGE("trustworthiness = " << t);
  CHECK(t >= 0.90);
}

TEST_CASE("embed_new: interpolation at samples and affine midpoints") {
  std::mt19937 rng(9);
  const RowMatrix X = affine_data(60, 2, 8, rng);
  const Manifold man = fit(X, 6, 2, 1e-9);
  for (int i : {0, 17, 59}) {
    const Embedding e = embed_new(man, X.row(i).transpose(), 6);
    CHECK((e.y - man.Y.row(i).transpose()).norm() <= 1e-3 * man.Y.row(i).norm());
    CHECK(e.fit_residual <= 1e-6 * X.row(i).norm());
  }
  const auto nn = knn(X, X.row(3).transpose(), 1, 3);
  const Eigen::VectorXd mid = 0.5 * (X.row(3) + X.row(nn[0])).transpose();
  const Embedding e = embed_new(man, mid, 6);
  const Eigen::VectorXd ymid = 0.5 * (man.Y.row(3) + man.Y.row(nn[0])).transpose();
  CHECK((e.y - ymid).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("embed_new: weights match the KKT oracle with k2 = N - 1") {
  std::mt19937 rng(10);
  const RowMatrix X = random_matrix(5, 6, rng);
  const Manifold man = fit(X, 3, 2);
  const Eigen::VectorXd q = random_matrix(1, 6, rng).row(0).transpose();
  const Embedding e = embed_new(man, q, 4);
  CHECK(e.neighbors == oracle::brute_knn(X, q, 4));
  const RowMatrix nb = gather_rows(X, e.neighbors);
  const Eigen::VectorXd w = oracle::kkt_weights(q, nb, man.reg);
  CHECK((e.weights - w).cwiseAbs().maxCoeff() <= 1e-8);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  for (int j = 0; j < 4; ++j) y += w[j] * man.Y.row(e.neighbors[static_cast<std::size_t>(j)]).transpose();
  CHECK((e.y - y).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("reconstruct: samples, constants and linear maps") {
  std::mt19937 rng(11);
  const RowMatrix X = affine_data(80, 2, 10, rng);
  const Manifold man = fit(X, 6, 2, 1e-9);
  const RowMatrix A = random_matrix(4, 10, rng);
  const RowMatrix Z = X * A.transpose();

  for (int i : {1, 40, 79}) {
    const auto r = reconstruct(man, X.row(i).transpose(), 6, Z);
    CHECK((r.z_star - Z.row(i).transpose()).norm() <= 1e-3 * Z.row(i).norm());
    CHECK(r.distance <= 1e-6 * X.row(i).norm());
    CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-10);
    CHECK(r.distance >= 0.0);
  }

  RowMatrix C(80, 3);
  C.rowwise() = Eigen::RowVector3d(1.5, -2.0, 0.25);
  const Eigen::VectorXd q = 0.3 * X.row(5).transpose() + 0.7 * X.row(6).transpose();
  const auto rc = reconstruct(man, q, 6, C);
  CHECK((rc.z_star - C.row(0).transpose()).cwiseAbs().maxCoeff() <= 1e-12);

  // Inside the sampled region: affine combination of nearby samples.
  for (int t = 0; t < 5; ++t) {
    const int i = 10 * t + 3;
    const auto nn = knn(X, X.row(i).transpose(), 2, i);
    const Eigen::VectorXd x = (0.5 * X.row(i) + 0.3 * X.row(nn[0]) + 0.2 * X.row(nn[1])).transpose();
    const auto r = reconstruct(man, x, 6, Z);
    const Eigen::VectorXd expect = A * x;
    CHECK((r.z_star - expect).norm() <= 1e-6 * expect.norm());
  }
}
