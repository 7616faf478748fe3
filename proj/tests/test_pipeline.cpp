#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"

#include "rvelle/errors.hpp"
#include "rvelle/pipeline.hpp"

using namespace rvelle;

namespace {

GenerationConfig small_config() {
  GenerationConfig cfg;
  cfg.mesh = {160.0, 16, 64.0};
  return cfg;
}

const Dataset& small_dataset() {
  static const Dataset ds = generate_dataset(40, small_config(), 17);
  return ds;
}

Dataset toy_dataset(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Dataset ds;
  ds.X.resize(n, 6);
  ds.Zpf.resize(n, 6);
  ds.Zsig.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    const double t = nd(rng), s = nd(rng);
    for (int j = 0; j < 6; ++j) {
      ds.X(i, j) = std::sin(t * (j + 1)) + 0.3 * s * j + 0.01 * nd(rng);
      ds.Zpf(i, j) = std::cos(t + j) + s;
    }
    for (int j = 0; j < 4; ++j) ds.Zsig(i, j) = 1.0 + 0.1 * t * (j + 1) + 0.05 * s;
  }
  return ds;
}

}  // namespace

TEST_CASE("generate_dataset: shapes, bounds and seeds") {
  const GenerationConfig cfg = small_config();
  const RveMesh mesh = build_mesh(cfg.mesh, cfg.material.l);
  const Dataset ds = generate_dataset(8, cfg, 3);
  CHECK(ds.size() == 8);
  CHECK(ds.X.cols() == mesh.node_count());
  CHECK(ds.Zpf.cols() == mesh.node_count());
  CHECK(ds.Zsig.cols() == 4);
  CHECK(ds.seeds.size() == 8);
  std::set<std::array<int, 3>> distinct;
  for (int i = 0; i < 8; ++i) {
    const CrackSeed& s = ds.seeds[static_cast<std::size_t>(i)];
    CHECK(seed_violation(s, mesh) == "");
    distinct.insert(s.canonical());
    for (int n : s.nodes) {
      CHECK(ds.X(i, n) == 1.0);
      CHECK(ds.Zpf(i, n) == 1.0);
    }
  }
  CHECK(distinct.size() == 8);
  CHECK(ds.X.minCoeff() >= 0.0);
  CHECK(ds.X.maxCoeff() <= 1.0);
  CHECK(ds.Zpf.minCoeff() >= 0.0);
  CHECK(ds.Zpf.maxCoeff() <= 1.0);
  CHECK(ds.Zsig.allFinite());
}

TEST_CASE("generate_dataset: deterministic across runs and execution modes") {
  const GenerationConfig cfg = small_config();
  const Dataset a = generate_dataset(4, cfg, 99, Exec::parallel);
  const Dataset b = generate_dataset(4, cfg, 99, Exec::parallel);
  const Dataset c = generate_dataset(4, cfg, 99, Exec::serial);
  CHECK(a.X == b.X);
  CHECK(a.Zpf == b.Zpf);
  CHECK(a.Zsig == b.Zsig);
  CHECK(a.X == c.X);
  CHECK(a.Zpf == c.Zpf);
  CHECK(a.Zsig == c.Zsig);
  const Dataset d = generate_dataset(4, cfg, 100);
  CHECK(d.X != a.X);
}

TEST_CASE("generate_dataset: invalid configuration") {
  GenerationConfig cfg = small_config();
  cfg.mesh.n = 4;
  CHECK_THROWS_AS(generate_dataset(2, cfg, 1), ConfigError);
  CHECK_THROWS_AS(generate_dataset(0, small_config(), 1), ConfigError);
}

TEST_CASE("random_seed: every drawn seed satisfies the seeding rules") {
  const RveMesh mesh = build_mesh(500, 50, 200, 40);
  std::mt19937_64 rng(4);
  const double clear = seed_clearance(mesh);
  CHECK(clear == doctest::Approx(50.0));
  for (int t = 0; t < 200; ++t) {
    const CrackSeed s = random_seed(mesh, rng);
    CHECK(is_valid_seed(s, mesh));
    const int c = s.nodes[0];
    const Point2 p = mesh.node(c);
    CHECK(mesh.half_width() - std::max(std::abs(p.x), std::abs(p.y)) > clear);
    CHECK(std::hypot(p.x, p.y) - mesh.fiber_radius() > clear);
  }
}

TEST_CASE("crack seed rules") {
  const RveMesh mesh = build_mesh(160, 16, 64, 40);
  auto id = [&](int i, int j) { return mesh.node_id(i, j); };
  CHECK(is_valid_seed({{id(2, 8), id(3, 8), id(4, 8)}}, mesh));
  CHECK(seed_violation({{id(2, 8), id(3, 8), id(3, 9)}}, mesh) != "");  // one element
  CHECK(seed_violation({{id(2, 8), id(4, 8), id(5, 8)}}, mesh) != "");  // not an edge
  CHECK(seed_violation({{id(0, 8), id(1, 8), id(2, 8)}}, mesh) != "");  // boundary
  CHECK(seed_violation({{id(2, 8), id(2, 8), id(3, 8)}}, mesh) != "");  // repeated
  CHECK(seed_violation({{id(4, 8), id(5, 8), id(6, 8)}}, mesh) != "");  // next to the fiber
  CHECK_THROWS_AS(straight_seed(mesh, 16, 8, true), ConfigError);
}

TEST_CASE("make_folds: partition of the truncated index set") {
  const auto folds = make_folds(496, 10, 5);
  CHECK(folds.size() == 10);
  std::set<int> seen;
  for (const auto& f : folds) {
    CHECK(f.size() == 49);
    for (int i : f) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 490);
  CHECK(*seen.rbegin() <= 495);
  CHECK(make_folds(496, 10, 5) == folds);
  CHECK(make_folds(496, 10, 6) != folds);
  CHECK_THROWS_AS(make_folds(5, 10, 1), ConfigError);
}

TEST_CASE("cross_validate: grid coverage, consistency and determinism") {
  const Dataset& ds = small_dataset();
  std::vector<HyperParams> grid;
  for (int k1 : {4, 6})
    for (int k2 : {4, 6})
      for (int dim : {2, 3}) grid.push_back({k1, k2, dim});
  const CvReport rep = cross_validate(ds, 5, grid, OutputKind::PhaseField, 8);
  CHECK(rep.cells.size() == grid.size());
  CHECK(rep.used_rows == 40);
  CHECK(rep.truncated_rows == 0);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const CvCell& cell = rep.cells[c];
    CHECK(cell.hp == grid[c]);
    CHECK_FALSE(cell.failed);
    CHECK(cell.R >= 0.0);
    CHECK(cell.fold_errors.size() == 5);
    double mean = 0.0;
    for (int f = 0; f < 5; ++f) {
      const double direct = fold_error(ds, rep.fold_indices, f, cell.hp, OutputKind::PhaseField, 1e-3);
      CHECK(direct == cell.fold_errors[static_cast<std::size_t>(f)]);
      mean += direct;
    }
    CHECK(cell.R == doctest::Approx(mean / 5).epsilon(1e-15));
    CHECK(cell.mean_error == doctest::Approx(cell.R / 8).epsilon(1e-15));
  }
  const CvReport serial = cross_validate(ds, 5, grid, OutputKind::PhaseField, 8, 1e-3, Exec::serial);
  for (std::size_t c = 0; c < grid.size(); ++c) CHECK(serial.cells[c].R == rep.cells[c].R);
}

TEST_CASE("cross_validate: hand-driven loop on a toy dataset") {
  const Dataset ds = toy_dataset(10, 21);
  const HyperParams hp{3, 3, 2};
  const CvReport rep = cross_validate(ds, 5, {hp}, OutputKind::Stress, 2);
  double R = 0.0;
  for (std::size_t f = 0; f < rep.fold_indices.size(); ++f) {
    const auto& fold = rep.fold_indices[f];
    std::vector<int> train;
    for (std::size_t g = 0; g < rep.fold_indices.size(); ++g)
      if (g != f) train.insert(train.end(), rep.fold_indices[g].begin(), rep.fold_indices[g].end());
    const Manifold man = fit(gather_rows(ds.X, train), hp.k1, hp.dim, 1e-3, Exec::serial);
    const RowMatrix z = gather_rows(ds.Zsig, train);
    double e = 0.0;
    for (int i : fold) {
      const auto r = reconstruct(man, ds.X.row(i).transpose(), hp.k2, z);
      e += (r.z_star - ds.Zsig.row(i).transpose()).norm() / ds.Zsig.row(i).norm();
    }
    R += e;
  }
  R /= 5;
  CHECK(rep.cells[0].R == R);
}

TEST_CASE("cross_validate: infeasible cells are reported, not fatal") {
  const Dataset ds = toy_dataset(10, 22);
  const CvReport rep = cross_validate(ds, 5, {{3, 3, 2}, {9, 3, 2}}, OutputKind::PhaseField, 2);
  CHECK_FALSE(rep.cells[0].failed);
  CHECK(rep.cells[1].failed);
  CHECK(rep.cells[1].error != "");
}

TEST_CASE("normalized_error: nonnegative and scale invariant") {
  std::mt19937 rng(23);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a(5), b(5);
    for (int j = 0; j < 5; ++j) {
      a[j] = nd(rng);
      b[j] = nd(rng);
    }
    const double e = normalized_error(a, b);
    CHECK(e >= 0.0);
    const double c = 0.001 + std::abs(nd(rng)) * 100;
    CHECK(std::abs(normalized_error(c * a, c * b) - e) <= 1e-12 * std::max(1.0, e));
  }
  CHECK(normalized_error(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)) == 0.0);
}

TEST_CASE("evaluate: training rows reconstruct themselves") {
  const Dataset& ds = small_dataset();
  const Dataset test = ds.subset({0, 5, 9});
  const EvaluationReport rep = evaluate(ds, test, {6, 6, 3}, OutputKind::PhaseField);
  CHECK(rep.records.size() == 3);
  for (const auto& r : rep.records) {
    CHECK(r.error <= 1e-3);
    CHECK(r.distance <= 1e-6 * ds.X.row(0).norm());
  }
  Dataset other = test;
  other.config.load = LoadCase::uniaxial_y(2e-4);
  CHECK_THROWS_AS(evaluate(ds, other, {6, 6, 3}, OutputKind::PhaseField), ConfigError);
}

TEST_CASE("gate: threshold semantics") {
  CHECK(gate(0.1, 0.5).decision == Decision::Reconstruct);
  CHECK(gate(0.6, 0.5).decision == Decision::HighFidelity);
  CHECK(gate(0.5, 0.5).decision == Decision::Reconstruct);
  const GateVerdict v = gate(0.3, 0.5);
  CHECK(v.distance == 0.3);
  CHECK(v.threshold == 0.5);
  bool switched = false;
  for (double d = 0.0; d < 1.0; d += 0.01) {
    const bool hf = gate(d, 0.37).decision == Decision::HighFidelity;
    if (switched) CHECK(hf);
    switched = switched || hf;
  }
  CHECK_THROWS_AS(gate(0.1, 0.0), ConfigError);
}

TEST_CASE("percentile and the default threshold") {
  CHECK(percentile({1, 2, 3, 4, 5}, 50) == 3.0);
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({4, 1, 3, 2}, 100) == 4.0);
  CHECK(percentile({4, 1, 3, 2}, 0) == 1.0);
  CHECK(percentile({0, 10}, 90) == doctest::Approx(9.0));

  const Dataset& ds = small_dataset();
  const Manifold man = fit(ds.X, 6, 3);
  const auto loo = loo_distances(man, 6);
  const double tau = default_threshold(man, 6);
  int flagged = 0;
  for (double d : loo) flagged += gate(d, tau).decision == Decision::HighFidelity;
  CHECK(flagged >= 3);
  CHECK(flagged <= 5);
  CHECK(loo == loo_distances(man, 6, Exec::serial));
}

TEST_CASE("pearson and bootstrap interval") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10}, z{5, 4, 3, 2, 1};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> a, b;
  for (int i = 0; i < 60; ++i) {
    a.push_back(nd(rng));
    b.push_back(a.back() + 0.5 * nd(rng));
  }
  const auto [lo, hi] = bootstrap_pearson_ci(a, b, 2000, 0.95, 4);
  const double r = pearson(a, b);
  CHECK(lo < r);
  CHECK(r < hi);
  CHECK(lo > 0.0);
  CHECK(bootstrap_pearson_ci(a, b, 2000, 0.95, 4) == std::make_pair(lo, hi));
}

TEST_CASE("augment: duplicates are flagged and new points become samples") {
  const Dataset& ds = small_dataset();
  const Dataset train = ds.subset([] {
    std::vector<int> v(30);
    std::iota(v.begin(), v.end(), 0);
    return v;
  }());
  const HighFidelityFn hf = high_fidelity_solver(train);

  const AugmentResult dup = augment(train, train.X.row(3).transpose(), hf);
  CHECK(dup.duplicate);
  CHECK(dup.dataset.size() == 31);

  const Eigen::VectorXd x = ds.X.row(35).transpose();
  const AugmentResult res = augment(train, x, hf);
  CHECK_FALSE(res.duplicate);
  REQUIRE(res.dataset.size() == 31);
  CHECK(res.dataset.Zpf.row(30) == ds.Zpf.row(35));
  CHECK(res.dataset.Zsig.row(30) == ds.Zsig.row(35));
  const Manifold man = fit(res.dataset.X, 6, 3);
  const auto r = reconstruct(man, x, 6, res.dataset.Zpf);
  CHECK(r.distance <= 1e-6 * x.norm());
}
