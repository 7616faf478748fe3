#include "rvelle/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "rvelle/errors.hpp"

namespace rvelle {

bool Dataset::compatible_with(const Dataset& other) const {
  const auto& a = config;
  const auto& b = other.config;
  return a.mesh == b.mesh && a.material == b.material && a.load.macro_strain == b.load.macro_strain &&
         a.controls.tol == b.controls.tol && a.controls.max_iter == b.controls.max_iter && X.cols() == other.X.cols();
}

Dataset Dataset::subset(const std::vector<int>& idx) const {
  Dataset out;
  out.config = config;
  out.rng_seed = rng_seed;
  out.X = gather_rows(X, idx);
  out.Zpf = gather_rows(Zpf, idx);
  out.Zsig = gather_rows(Zsig, idx);
  for (int i : idx)
    if (i < static_cast<int>(seeds.size())) out.seeds.push_back(seeds[static_cast<std::size_t>(i)]);
  return out;
}

const RowMatrix& outputs(const Dataset& ds, OutputKind kind) {
  return kind == OutputKind::PhaseField ? ds.Zpf : ds.Zsig;
}

Sample high_fidelity_sample(const RveMesh& mesh, const GenerationConfig& cfg, const CrackSeed& seed) {
  PhaseFieldSolver solver(mesh, cfg.material);
  Sample s;
  s.seed = seed;
  s.X = solver.equilibrate({seed.nodes.begin(), seed.nodes.end()});
  const EvolutionResult evo = solver.evolve(s.X, cfg.load, cfg.controls);
  s.Zpf = evo.state.d;
  s.Zsig = Eigen::Map<const Eigen::Vector4d>(solver.homogenize(evo.state).as_array().data());
  return s;
}

Dataset generate_dataset(int n, const GenerationConfig& cfg, std::uint64_t rng_seed, Exec exec) {
  if (n < 1) throw ConfigError("generate_dataset: need at least one sample");
  cfg.material.validate();
  const RveMesh mesh = build_mesh(cfg.mesh, cfg.material.l);
  std::mt19937_64 rng(rng_seed);
  std::set<std::array<int, 3>> used;
  const int budget = n / 10;  // more than 10% excluded -> failure

  Dataset ds;
  ds.config = cfg;
  ds.rng_seed = rng_seed;
  std::vector<Sample> accepted;
  while (static_cast<int>(accepted.size()) < n) {
    std::vector<CrackSeed> batch;
    while (static_cast<int>(accepted.size() + batch.size()) < n) {
      CrackSeed s = random_seed(mesh, rng);
      if (used.insert(s.canonical()).second) batch.push_back(s);
    }
    std::vector<std::optional<Sample>> results(batch.size());
    std::vector<std::string> errors(batch.size());
    for_each_index(exec, static_cast<std::ptrdiff_t>(batch.size()), [&](std::ptrdiff_t b) {
      const auto i = static_cast<std::size_t>(b);
      try {
        results[i] = high_fidelity_sample(mesh, cfg, batch[i]);
      } catch (const SolverError& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (results[i]) {
        accepted.push_back(std::move(*results[i]));
        continue;
      }
      const auto& nd = batch[i].nodes;
      std::clog << "generate_dataset: excluding seed (" << nd[0] << ", " << nd[1] << ", " << nd[2]
                << "): " << errors[i] << '\n';
      ds.excluded.push_back({batch[i], errors[i]});
      if (static_cast<int>(ds.excluded.size()) > budget) {
        std::ostringstream msg;
        msg << "generate_dataset: " << ds.excluded.size() << " of " << n
            << " samples failed, above the 10% exclusion budget; last: " << errors[i];
        throw SolverError(msg.str());
      }
    }
  }

  const Eigen::Index D = mesh.node_count();
  ds.X.resize(n, D);
  ds.Zpf.resize(n, D);
  ds.Zsig.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    const auto& s = accepted[static_cast<std::size_t>(i)];
    ds.X.row(i) = s.X.transpose();
    ds.Zpf.row(i) = s.Zpf.transpose();
    ds.Zsig.row(i) = s.Zsig.transpose();
    ds.seeds.push_back(s.seed);
  }
  return ds;
}

std::vector<std::vector<int>> make_folds(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross validation: need at least 2 folds");
  if (n < folds) throw ConfigError("cross validation: fewer rows than folds");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int per_fold = n / folds;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f)
    out[static_cast<std::size_t>(f)].assign(order.begin() + f * per_fold, order.begin() + (f + 1) * per_fold);
  return out;
}

double normalized_error(const VecRef& z_star, const VecRef& z) { return (z_star - z).norm() / z.norm(); }

namespace {

std::vector<int> training_rows(const std::vector<std::vector<int>>& folds, int held_out) {
  std::vector<int> rows;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (static_cast<int>(f) != held_out) rows.insert(rows.end(), folds[f].begin(), folds[f].end());
  return rows;
}

double fold_error_with(const Manifold& man, const Dataset& ds, const std::vector<int>& train_rows,
                       const std::vector<int>& test_rows, int k2, OutputKind kind) {
  const RowMatrix z_train = gather_rows(outputs(ds, kind), train_rows);
  double sum = 0.0;
  for (int i : test_rows) {
    const auto res = reconstruct(man, ds.X.row(i).transpose(), k2, z_train);
    sum += normalized_error(res.z_star, outputs(ds, kind).row(i).transpose());
  }
  return sum;
}

}  // namespace

double fold_error(const Dataset& ds, const std::vector<std::vector<int>>& folds, int held_out, const HyperParams& hp,
                  OutputKind kind, double reg) {
  const auto train_rows = training_rows(folds, held_out);
  const Manifold man = fit(gather_rows(ds.X, train_rows), hp.k1, hp.dim, reg, Exec::serial);
  return fold_error_with(man, ds, train_rows, folds[static_cast<std::size_t>(held_out)], hp.k2, kind);
}

CvReport cross_validate(const Dataset& ds, int folds, const std::vector<HyperParams>& grid, OutputKind kind,
                        std::uint64_t seed, double reg, Exec exec) {
  if (grid.empty()) throw ConfigError("cross validation: empty hyperparameter grid");
  CvReport rep;
  rep.folds = folds;
  rep.fold_indices = make_folds(ds.size(), folds, seed);
  rep.used_rows = folds * static_cast<int>(rep.fold_indices.front().size());
  rep.truncated_rows = ds.size() - rep.used_rows;
  if (rep.truncated_rows > 0)
    std::clog << "cross_validate: truncated " << rep.truncated_rows << " rows to " << rep.used_rows << " ("
              << folds << " folds)\n";

  rep.cells.resize(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    rep.cells[c].hp = grid[c];
    rep.cells[c].fold_errors.assign(static_cast<std::size_t>(folds), 0.0);
  }

  // One task per (k1, dim, fold); every k2 of that (k1, dim) reuses the fit.
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < grid.size(); ++c) groups[{grid[c].k1, grid[c].dim}].push_back(c);
  std::vector<std::pair<std::vector<std::size_t>, int>> tasks;
  for (const auto& [key, cells] : groups)
    for (int f = 0; f < folds; ++f) tasks.emplace_back(cells, f);

  std::vector<std::string> failures(grid.size() * static_cast<std::size_t>(folds));
  for_each_index(exec, static_cast<std::ptrdiff_t>(tasks.size()), [&](std::ptrdiff_t t) {
    const auto& [cells, f] = tasks[static_cast<std::size_t>(t)];
    const auto train_rows = training_rows(rep.fold_indices, f);
    const auto& test_rows = rep.fold_indices[static_cast<std::size_t>(f)];
    const HyperParams& first = grid[cells.front()];
    std::optional<Manifold> man;
    std::string fit_error;
    try {
      man = fit(gather_rows(ds.X, train_rows), first.k1, first.dim, reg, Exec::serial);
    } catch (const std::exception& e) {
      fit_error = e.what();
    }
    for (std::size_t c : cells) {
      const auto slot = c * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f);
      if (!man) {
        failures[slot] = fit_error;
        continue;
      }
      try {
        rep.cells[c].fold_errors[static_cast<std::size_t>(f)] =
            fold_error_with(*man, ds, train_rows, test_rows, grid[c].k2, kind);
      } catch (const std::exception& e) {
        failures[slot] = e.what();
      }
    }
  });

  const double fold_size = static_cast<double>(rep.fold_indices.front().size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    auto& cell = rep.cells[c];
    for (int f = 0; f < folds; ++f) {
      const auto& why = failures[c * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)];
      if (!why.empty() && !cell.failed) {
        cell.failed = true;
        cell.error = "fold " + std::to_string(f) + ": " + why;
      }
    }
    double sum = 0.0;
    for (double e : cell.fold_errors) sum += e;
    cell.R = cell.failed ? std::nan("") : sum / folds;
    cell.mean_error = cell.R / fold_size;
  }
  return rep;
}

EvaluationReport evaluate(const Manifold& man, const Dataset& train, const Dataset& test, int k2, OutputKind kind,
                          Exec exec) {
  if (!train.compatible_with(test))
    throw ConfigError("evaluate: train and test datasets were generated with different mesh/material/load settings");
  EvaluationReport rep;
  rep.records.resize(static_cast<std::size_t>(test.size()));
  const RowMatrix& z_train = outputs(train, kind);
  const RowMatrix& z_test = outputs(test, kind);
  for_each_index(exec, test.size(), [&](std::ptrdiff_t i) {
    const auto res = reconstruct(man, test.X.row(i).transpose(), k2, z_train);
    rep.records[static_cast<std::size_t>(i)] = {static_cast<int>(i),
                                                normalized_error(res.z_star, z_test.row(i).transpose()),
                                                res.distance, res.fit_residual};
  });
  std::vector<double> dist, err;
  for (const auto& r : rep.records) {
    dist.push_back(r.distance);
    err.push_back(r.error);
  }
  rep.pearson_r = rep.records.size() >= 2 ? pearson(dist, err) : std::nan("");
  return rep;
}

EvaluationReport evaluate(const Dataset& train, const Dataset& test, const HyperParams& hp, OutputKind kind,
                          double reg, Exec exec) {
  if (!train.compatible_with(test))
    throw ConfigError("evaluate: train and test datasets were generated with different mesh/material/load settings");
  const Manifold man = fit(train.X, hp.k1, hp.dim, reg, exec);
  return evaluate(man, train, test, hp.k2, kind, exec);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("pearson: need two equal-length samples of size >= 2");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::pair<double, double> bootstrap_pearson_ci(const std::vector<double>& x, const std::vector<double>& y,
                                               int resamples, double level, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> stats;
  std::vector<double> bx(x.size()), by(y.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t j = pick(rng);
      bx[i] = x[j];
      by[i] = y[j];
    }
    const double r = pearson(bx, by);
    if (std::isfinite(r)) stats.push_back(r);
  }
  const double tail = 50.0 * (1.0 - level);
  return {percentile(stats, tail), percentile(stats, 100.0 - tail)};
}

GateVerdict gate(double distance, double tau) {
  if (!(tau > 0.0)) throw ConfigError("gate: threshold must be > 0");
  return {distance, tau, distance <= tau ? Decision::Reconstruct : Decision::HighFidelity};
}

GateVerdict gate(const ReconstructionResult& result, double tau) { return gate(result.distance, tau); }

std::vector<double> loo_distances(const Manifold& man, int k2, Exec exec) {
  std::vector<double> out(static_cast<std::size_t>(man.size()));
  const RowMatrix no_outputs = RowMatrix::Zero(man.size(), 1);
  for_each_index(exec, man.size(), [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] =
        reconstruct(man, man.X.row(i).transpose(), k2, no_outputs, static_cast<int>(i)).distance;
  });
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double default_threshold(const Manifold& man, int k2, Exec exec) {
  return percentile(loo_distances(man, k2, exec), 90.0);
}

AugmentResult augment(const Dataset& train, const Eigen::VectorXd& x_star, const HighFidelityFn& solve) {
  if (x_star.size() != train.X.cols()) throw ConfigError("augment: input length does not match the dataset");
  AugmentResult out;
  for (int i = 0; i < train.size() && !out.duplicate; ++i)
    out.duplicate = train.X.row(i).transpose() == x_star;
  if (out.duplicate) std::clog << "augment: input duplicates an existing training row\n";

  auto [zpf, zsig] = solve(x_star);
  Dataset& ds = out.dataset;
  ds = train;
  const Eigen::Index n = train.size();
  ds.X.conservativeResize(n + 1, Eigen::NoChange);
  ds.Zpf.conservativeResize(n + 1, Eigen::NoChange);
  ds.Zsig.conservativeResize(n + 1, Eigen::NoChange);
  ds.X.row(n) = x_star.transpose();
  ds.Zpf.row(n) = zpf.transpose();
  ds.Zsig.row(n) = zsig.transpose();

  CrackSeed seed{{-1, -1, -1}};
  std::vector<int> pinned;
  for (Eigen::Index a = 0; a < x_star.size(); ++a)
    if (x_star[a] == 1.0) pinned.push_back(static_cast<int>(a));
  if (pinned.size() == 3) seed.nodes = {pinned[0], pinned[1], pinned[2]};
  ds.seeds.push_back(seed);
  return out;
}

HighFidelityFn high_fidelity_solver(const Dataset& ds) {
  const GenerationConfig cfg = ds.config;
  return [cfg](const Eigen::VectorXd& x) {
    const RveMesh mesh = build_mesh(cfg.mesh, cfg.material.l);
    PhaseFieldSolver solver(mesh, cfg.material);
    const EvolutionResult evo = solver.evolve(x, cfg.load, cfg.controls);
    Eigen::VectorXd zsig = Eigen::Map<const Eigen::Vector4d>(solver.homogenize(evo.state).as_array().data());
    return std::make_pair(Eigen::VectorXd(evo.state.d), zsig);
  };
}

}  // namespace rvelle
