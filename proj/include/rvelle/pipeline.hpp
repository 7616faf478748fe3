#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rvelle/crack_seed.hpp"
#include "rvelle/lle.hpp"
#include "rvelle/material.hpp"
#include "rvelle/mesh.hpp"
#include "rvelle/phase_field.hpp"

namespace rvelle {

/// Everything needed to regenerate a dataset.
struct GenerationConfig {
  MeshConfig mesh;
  MaterialParams material;
  LoadCase load = LoadCase::uniaxial_y(1.4e-4);
  SolverControls controls;
};

struct ExcludedSample {
  CrackSeed seed;
  std::string reason;
};

/// Row-aligned inputs and outputs. X and Zpf have one column per mesh node,
/// Zsig holds (sigma_x, sigma_y, sigma_z, sigma_xy) in GPa.
struct Dataset {
  GenerationConfig config;
  std::uint64_t rng_seed = 0;
  RowMatrix X;
  RowMatrix Zpf;
  RowMatrix Zsig;
  std::vector<CrackSeed> seeds;
  std::vector<ExcludedSample> excluded;

  [[nodiscard]] int size() const { return static_cast<int>(X.rows()); }
  /// Same mesh, material, load and solver settings.
  [[nodiscard]] bool compatible_with(const Dataset& other) const;
  /// Rows `idx`, metadata unchanged.
  [[nodiscard]] Dataset subset(const std::vector<int>& idx) const;
};

enum class OutputKind { PhaseField, Stress };

const RowMatrix& outputs(const Dataset& ds, OutputKind kind);

struct Sample {
  CrackSeed seed;
  Eigen::VectorXd X;
  Eigen::VectorXd Zpf;
  Eigen::VectorXd Zsig;
};

/// Equilibrated input, evolved phase field and homogenized stress for one
/// crack seed.
Sample high_fidelity_sample(const RveMesh& mesh, const GenerationConfig& cfg, const CrackSeed& seed);

/// Draws n distinct random seeds from rng_seed and solves each sample.
/// Samples whose solve fails are recorded in `excluded` and replaced by
/// further draws; throws SolverError once more than 10% of n have failed.
/// Seeds are drawn sequentially, so the result does not depend on exec or
/// the thread count.
Dataset generate_dataset(int n, const GenerationConfig& cfg, std::uint64_t rng_seed, Exec exec = Exec::parallel);

struct HyperParams {
  int k1 = 20;
  int k2 = 20;
  int dim = 80;
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct CvCell {
  HyperParams hp;
  /// Mean over folds of the summed normalized errors of the fold's points.
  double R = 0.0;
  /// R divided by the fold size (mean normalized error per point).
  double mean_error = 0.0;
  std::vector<double> fold_errors;
  bool failed = false;
  std::string error;
};

struct CvReport {
  int folds = 0;
  int used_rows = 0;
  int truncated_rows = 0;
  std::vector<std::vector<int>> fold_indices;
  std::vector<CvCell> cells;  // in grid order
};

/// Shuffles 0..n-1 with `seed`, truncates to the largest multiple of
/// `folds`, and deals consecutive blocks into folds.
std::vector<std::vector<int>> make_folds(int n, int folds, std::uint64_t seed);

/// Normalized error of one point, fold-summed, for one cell and one fold.
double fold_error(const Dataset& ds, const std::vector<std::vector<int>>& folds, int held_out, const HyperParams& hp,
                  OutputKind kind, double reg);

/// n-fold cross validation over a grid of hyperparameters. All cells share
/// the same folds; each (k1, dim, fold) manifold is fitted once and reused
/// for every k2.
CvReport cross_validate(const Dataset& ds, int folds, const std::vector<HyperParams>& grid, OutputKind kind,
                        std::uint64_t seed, double reg = 1e-3, Exec exec = Exec::parallel);

/// ||z* - z|| / ||z||.
double normalized_error(const VecRef& z_star, const VecRef& z);

struct PointRecord {
  int index = 0;
  double error = 0.0;
  double distance = 0.0;
  double fit_residual = 0.0;
};

struct EvaluationReport {
  std::vector<PointRecord> records;
  double pearson_r = 0.0;  // between distance and error
};

/// Fits on `train` and reconstructs every row of `test`. Throws ConfigError
/// when the datasets were generated with different settings.
EvaluationReport evaluate(const Dataset& train, const Dataset& test, const HyperParams& hp, OutputKind kind,
                          double reg = 1e-3, Exec exec = Exec::parallel);
EvaluationReport evaluate(const Manifold& man, const Dataset& train, const Dataset& test, int k2, OutputKind kind,
                          Exec exec = Exec::parallel);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Percentile bootstrap interval of the Pearson coefficient.
std::pair<double, double> bootstrap_pearson_ci(const std::vector<double>& x, const std::vector<double>& y,
                                               int resamples, double level, std::uint64_t seed);

enum class Decision { Reconstruct, HighFidelity };

struct GateVerdict {
  double distance = 0.0;
  double threshold = 0.0;
  Decision decision = Decision::Reconstruct;
};

/// Reconstruct iff distance <= tau.
GateVerdict gate(const ReconstructionResult& result, double tau);
GateVerdict gate(double distance, double tau);

/// Distance of every training sample to the manifold with itself left out
/// of the neighbour searches.
std::vector<double> loo_distances(const Manifold& man, int k2, Exec exec = Exec::parallel);

/// Linear-interpolation percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Default gate threshold: 90th percentile of the leave-one-out distances.
double default_threshold(const Manifold& man, int k2, Exec exec = Exec::parallel);

using HighFidelityFn = std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(const Eigen::VectorXd&)>;

struct AugmentResult {
  Dataset dataset;
  bool duplicate = false;
};

/// Appends x_star and its high-fidelity outputs. A row equal to an existing
/// input is allowed but flagged (and logged). The caller refits.
AugmentResult augment(const Dataset& train, const Eigen::VectorXd& x_star, const HighFidelityFn& solve);

/// High-fidelity solver for inputs compatible with `ds`.
HighFidelityFn high_fidelity_solver(const Dataset& ds);

}  // namespace rvelle
