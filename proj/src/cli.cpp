#include "rvelle/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "rvelle/dataset_io.hpp"
#include "rvelle/errors.hpp"
#include "rvelle/lle.hpp"
#include "rvelle/parallel.hpp"
#include "rvelle/pipeline.hpp"

namespace rvelle::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using io::CsvWriter;

namespace {

struct GenOptions {
  int n = 496;
  int mesh_n = 50;
  double rve_size = 500.0;
  std::optional<double> fiber_radius;
  double fiber_fraction = 0.4;
  double eps22 = 1.4e-4;
  std::uint64_t seed = 1;
  std::string out;
  MaterialParams mat;
  double tol = 1e-3;
  int max_iter = 200;
};

struct TrainOptions {
  std::string data;
  std::string out;
  int k1 = 20;
  int dim = 80;
  double reg = 1e-3;
};

struct CvOptions {
  std::string data;
  std::string out;
  int folds = 10;
  std::vector<int> k1{20};
  std::string k2 = "same";
  std::vector<int> dims{80};
  std::string output = "pf";
  std::uint64_t seed = 1;
  double reg = 1e-3;
};

struct ReconstructOptions {
  std::string model;
  std::string data;
  std::string input;
  std::string out;
  int k2 = 20;
  std::optional<double> tau;
  std::string output = "pf";
  std::optional<int> row;
};

struct EvaluateOptions {
  std::string train;
  std::string test;
  std::string out;
  int k1 = 20;
  int k2 = 20;
  int dim = 80;
  double reg = 1e-3;
  int bins = 10;
};

OutputKind parse_output(const std::string& s) {
  if (s == "pf" || s == "phase-field") return OutputKind::PhaseField;
  if (s == "stress") return OutputKind::Stress;
  throw ConfigError("--output must be 'pf' or 'stress', got '" + s + "'");
}

/// Effective values of every option of a subcommand, defaults included.
json effective_config(const CLI::App& sub, int threads) {
  json cfg;
  cfg["subcommand"] = sub.get_name();
  json opts = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      std::string joined;
      for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
      opts[name] = joined;
    } else {
      opts[name] = opt->get_default_str();
    }
  }
  cfg["options"] = opts;
  cfg["threads_used"] = threads;
  return cfg;
}

void echo_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  io::write_atomic(dir / "config.json", cfg.dump(2) + "\n");
}

json dataset_provenance(const fs::path& dir) {
  const fs::path m = dir / "manifest.json";
  return {{"path", dir.string()}, {"manifest_crc32", io::file_crc32(m)}};
}

int cmd_gen_data(const GenOptions& o, const json& cfg, std::ostream& out) {
  GenerationConfig gc;
  gc.mesh.half_width = o.rve_size;
  gc.mesh.n = o.mesh_n;
  gc.mesh.fiber_radius = o.fiber_radius.value_or(o.fiber_fraction * o.rve_size);
  gc.material = o.mat;
  gc.load = LoadCase::uniaxial_y(o.eps22);
  gc.controls.tol = o.tol;
  gc.controls.max_iter = o.max_iter;
  gc.material.validate();
  (void)build_mesh(gc.mesh, gc.material.l);

  const Dataset ds = generate_dataset(o.n, gc, o.seed, Exec::parallel);
  io::save_dataset(ds, o.out);
  echo_config(o.out, cfg);
  out << "wrote " << ds.size() << " samples (" << ds.excluded.size() << " excluded) to " << o.out << '\n';
  return kOk;
}

int cmd_train(const TrainOptions& o, const json& cfg, std::ostream& out) {
  const Dataset ds = io::load_dataset(o.data);
  const Manifold man = fit(ds.X, o.k1, o.dim, o.reg, Exec::parallel);
  json prov = {{"dataset", dataset_provenance(o.data)}, {"generation", io::to_json(ds.config)}};
  io::save_manifold(man, o.out, prov);
  echo_config(o.out, cfg);
  out << "fitted manifold N=" << man.size() << " k1=" << man.k1 << " dim=" << man.dim << " -> " << o.out << '\n';
  return kOk;
}

int cmd_cv(const CvOptions& o, const json& cfg, std::ostream& out) {
  const Dataset ds = io::load_dataset(o.data);
  const OutputKind kind = parse_output(o.output);
  std::vector<HyperParams> grid;
  if (o.k2 == "same") {
    for (int k : o.k1)
      for (int d : o.dims) grid.push_back({k, k, d});
  } else {
    std::vector<int> k2s;
    std::stringstream ss(o.k2);
    for (std::string tok; std::getline(ss, tok, ',');) {
      try {
        k2s.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("--k2 must be 'same' or a comma-separated list of integers");
      }
    }
    for (int k1 : o.k1)
      for (int k2 : k2s)
        for (int d : o.dims) grid.push_back({k1, k2, d});
  }
  const CvReport rep = cross_validate(ds, o.folds, grid, kind, o.seed, o.reg, Exec::parallel);

  CsvWriter table({"k1", "k2", "dim", "R", "mean_error", "status", "error"});
  for (const auto& c : rep.cells)
    table.row({CsvWriter::num(c.hp.k1), CsvWriter::num(c.hp.k2), CsvWriter::num(c.hp.dim), CsvWriter::num(c.R),
               CsvWriter::num(c.mean_error), c.failed ? "failed" : "ok", c.error});
  CsvWriter by_dim({"k1", "k2", "dim", "R"});
  std::vector<CvCell> sorted = rep.cells;
  std::stable_sort(sorted.begin(), sorted.end(), [](const CvCell& a, const CvCell& b) {
    return std::tie(a.hp.k1, a.hp.k2, a.hp.dim) < std::tie(b.hp.k1, b.hp.k2, b.hp.dim);
  });
  for (const auto& c : sorted)
    if (c.hp.k1 == c.hp.k2)
      by_dim.row({CsvWriter::num(c.hp.k1), CsvWriter::num(c.hp.k2), CsvWriter::num(c.hp.dim), CsvWriter::num(c.R)});

  fs::create_directories(o.out);
  table.save(fs::path(o.out) / "cv_grid.csv");
  by_dim.save(fs::path(o.out) / "cv_vs_dim.csv");
  json summary = cfg;
  summary["rows_used"] = rep.used_rows;
  summary["rows_truncated"] = rep.truncated_rows;
  summary["dataset"] = dataset_provenance(o.data);
  echo_config(o.out, summary);
  out << "cv: " << rep.cells.size() << " cells, " << rep.folds << " folds, " << rep.used_rows << " rows used ("
      << rep.truncated_rows << " truncated)\n";
  const bool any_failed = std::any_of(rep.cells.begin(), rep.cells.end(), [](const CvCell& c) { return c.failed; });
  return any_failed ? kNumerical : kOk;
}

int cmd_reconstruct(const ReconstructOptions& o, const json& cfg, std::ostream& out) {
  const Manifold man = io::load_manifold(o.model);
  const Dataset train = io::load_dataset(o.data);
  const Dataset inputs = io::load_dataset(o.input);
  if (train.size() != man.size() || train.X != man.X)
    throw ConfigError("--data must be the dataset the model was trained on");
  if (!train.compatible_with(inputs)) throw ConfigError("--input was generated with different settings than --data");
  const OutputKind kind = parse_output(o.output);
  const double tau = o.tau ? *o.tau : default_threshold(man, o.k2, Exec::parallel);

  std::vector<int> rows;
  if (o.row) {
    if (*o.row < 0 || *o.row >= inputs.size()) throw ConfigError("--row out of range");
    rows.push_back(*o.row);
  } else {
    for (int i = 0; i < inputs.size(); ++i) rows.push_back(i);
  }

  const RowMatrix& z_train = outputs(train, kind);
  std::vector<ReconstructionResult> results(rows.size());
  for_each_index(Exec::parallel, static_cast<std::ptrdiff_t>(rows.size()), [&](std::ptrdiff_t i) {
    results[static_cast<std::size_t>(i)] =
        reconstruct(man, inputs.X.row(rows[static_cast<std::size_t>(i)]).transpose(), o.k2, z_train);
  });

  CsvWriter table({"index", "distance", "fit_residual", "tau", "verdict", "error"});
  RowMatrix zstar(static_cast<Eigen::Index>(rows.size()), z_train.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = results[i];
    const GateVerdict v = gate(r, tau);
    const char* verdict = v.decision == Decision::Reconstruct ? "Reconstruct" : "HighFidelity";
    const double err = normalized_error(r.z_star, outputs(inputs, kind).row(rows[i]).transpose());
    out << rows[i] << ' ' << verdict << " distance=" << CsvWriter::num(r.distance) << " tau=" << CsvWriter::num(tau)
        << '\n';
    table.row({CsvWriter::num(rows[i]), CsvWriter::num(r.distance), CsvWriter::num(r.fit_residual),
               CsvWriter::num(tau), verdict, CsvWriter::num(err)});
    zstar.row(static_cast<Eigen::Index>(i)) = r.z_star.transpose();
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    table.save(fs::path(o.out) / "reconstruction.csv");
    json manifest = {{"format_version", io::kFormatVersion},
                     {"kind", "reconstruction"},
                     {"output", o.output},
                     {"rows", rows},
                     {"arrays", json::array({io::save_matrix(o.out, "Zstar", zstar)})}};
    io::write_atomic(fs::path(o.out) / "manifest.json", manifest.dump(2) + "\n");
    echo_config(o.out, cfg);
  }
  return kOk;
}

void write_error_table(const EvaluationReport& rep, const fs::path& file) {
  CsvWriter t({"index", "error", "distance", "fit_residual"});
  for (const auto& r : rep.records)
    t.row({CsvWriter::num(r.index), CsvWriter::num(r.error), CsvWriter::num(r.distance), CsvWriter::num(r.fit_residual)});
  t.row({"pearson_r", CsvWriter::num(rep.pearson_r), "", ""});
  t.save(file);
}

int cmd_evaluate(const EvaluateOptions& o, const json& cfg, std::ostream& out) {
  const Dataset train = io::load_dataset(o.train);
  const Dataset test = io::load_dataset(o.test);
  if (!train.compatible_with(test)) throw ConfigError("evaluate: train and test were generated with different settings");
  if (o.bins < 1) throw ConfigError("--bins must be >= 1");
  const Manifold man = fit(train.X, o.k1, o.dim, o.reg, Exec::parallel);
  const EvaluationReport pf = evaluate(man, train, test, o.k2, OutputKind::PhaseField, Exec::parallel);
  const EvaluationReport st = evaluate(man, train, test, o.k2, OutputKind::Stress, Exec::parallel);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_error_table(pf, dir / "error_vs_distance.csv");
  write_error_table(st, dir / "stress_error_vs_distance.csv");

  double lo = pf.records.empty() ? 0.0 : pf.records.front().error;
  double hi = lo;
  for (const auto& r : pf.records) {
    lo = std::min(lo, r.error);
    hi = std::max(hi, r.error);
  }
  if (hi == lo) hi = lo + 1.0;
  std::vector<int> counts(static_cast<std::size_t>(o.bins), 0);
  for (const auto& r : pf.records) {
    auto b = static_cast<int>((r.error - lo) / (hi - lo) * o.bins);
    counts[static_cast<std::size_t>(std::clamp(b, 0, o.bins - 1))]++;
  }
  CsvWriter hist({"bin_lo", "bin_hi", "count"});
  for (int b = 0; b < o.bins; ++b)
    hist.row({CsvWriter::num(lo + (hi - lo) * b / o.bins), CsvWriter::num(lo + (hi - lo) * (b + 1) / o.bins),
              CsvWriter::num(counts[static_cast<std::size_t>(b)])});
  hist.save(dir / "error_hist.csv");

  // Two-dimensional embedding of the training inputs with the test inputs
  // mapped onto it.
  const Manifold flat = fit(train.X, o.k1, 2, o.reg, Exec::parallel);
  CsvWriter emb({"index", "set", "y1", "y2"});
  for (int i = 0; i < flat.size(); ++i)
    emb.row({CsvWriter::num(i), "train", CsvWriter::num(flat.Y(i, 0)), CsvWriter::num(flat.Y(i, 1))});
  for (int i = 0; i < test.size(); ++i) {
    const Embedding e = embed_new(flat, test.X.row(i).transpose(), o.k2);
    emb.row({CsvWriter::num(i), "test", CsvWriter::num(e.y[0]), CsvWriter::num(e.y[1])});
  }
  emb.save(dir / "embedding_2d.csv");

  json summary = cfg;
  summary["pearson_r_phase_field"] = pf.pearson_r;
  summary["pearson_r_stress"] = st.pearson_r;
  summary["train"] = dataset_provenance(o.train);
  summary["test"] = dataset_provenance(o.test);
  echo_config(dir, summary);
  out << "evaluate: " << test.size() << " test points, pearson r (phase field) = " << CsvWriter::num(pf.pearson_r)
      << ", (stress) = " << CsvWriter::num(st.pearson_r) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phase-field RVE surrogate: dataset generation, LLE training and reconstruction", "rvelle"};
  app.require_subcommand(1);
  app.allow_extras(false);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();

  GenOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a dataset of equilibrated and evolved phase fields");
  g->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  g->add_option("--mesh-n", gen.mesh_n, "Elements per side")->capture_default_str();
  g->add_option("--rve-size", gen.rve_size, "RVE half width L in mm (domain (-L, L)^2)")->capture_default_str();
  g->add_option("--fiber-radius", gen.fiber_radius, "Fiber radius in mm (default: fiber-fraction * L)");
  g->add_option("--fiber-fraction", gen.fiber_fraction, "Fiber radius as a fraction of L")->capture_default_str();
  g->add_option("--eps22", gen.eps22, "Macroscopic strain eps_22")->capture_default_str();
  g->add_option("--seed", gen.seed, "RNG seed for crack placement")->capture_default_str();
  g->add_option("--out", gen.out, "Output dataset directory")->required();
  g->add_option("--lambda-m", gen.mat.lambda_m, "Matrix Lame lambda (GPa)")->capture_default_str();
  g->add_option("--mu-m", gen.mat.mu_m, "Matrix Lame mu (GPa)")->capture_default_str();
  g->add_option("--lambda-f", gen.mat.lambda_f, "Fiber Lame lambda (GPa)")->capture_default_str();
  g->add_option("--mu-f", gen.mat.mu_f, "Fiber Lame mu (GPa)")->capture_default_str();
  g->add_option("--gc", gen.mat.g_c, "Energy release rate (mJ/mm^2)")->capture_default_str();
  g->add_option("--length-scale", gen.mat.l, "Regularization length l (mm)")->capture_default_str();
  g->add_option("--k-res", gen.mat.k_res, "Residual stiffness")->capture_default_str();
  g->add_option("--tol", gen.tol, "Staggered tolerance on max |d increment|")->capture_default_str();
  g->add_option("--max-iter", gen.max_iter, "Staggered iteration cap")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Fit the manifold to a dataset's inputs");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Output model directory")->required();
  t->add_option("--k1", tr.k1, "Neighbours per training point")->capture_default_str();
  t->add_option("--dims", tr.dim, "Embedding dimension")->capture_default_str();
  t->add_option("--reg", tr.reg, "Relative Gram regularization")->capture_default_str();

  CvOptions cv;
  auto* c = app.add_subcommand("cv", "Cross-validate a hyperparameter grid");
  c->add_option("--data", cv.data, "Dataset directory")->required();
  c->add_option("--out", cv.out, "Report directory")->required();
  c->add_option("--folds", cv.folds, "Number of folds")->capture_default_str();
  c->add_option("--k1", cv.k1, "k1 values")->delimiter(',')->capture_default_str();
  c->add_option("--k2", cv.k2, "k2 values, or 'same' for k2 = k1")->capture_default_str();
  c->add_option("--dims", cv.dims, "Embedding dimensions")->delimiter(',')->capture_default_str();
  c->add_option("--output", cv.output, "Output to reconstruct: pf | stress")->capture_default_str();
  c->add_option("--seed", cv.seed, "Fold shuffle seed")->capture_default_str();
  c->add_option("--reg", cv.reg, "Relative Gram regularization")->capture_default_str();

  ReconstructOptions rc;
  auto* r = app.add_subcommand("reconstruct", "Reconstruct outputs for new inputs and gate them by distance");
  r->add_option("--model", rc.model, "Model directory from 'train'")->required();
  r->add_option("--data", rc.data, "Dataset the model was trained on (supplies outputs)")->required();
  r->add_option("--input", rc.input, "Dataset whose inputs are reconstructed")->required();
  r->add_option("--out", rc.out, "Optional output directory");
  r->add_option("--k2", rc.k2, "Neighbours for reconstruction")->capture_default_str();
  r->add_option("--tau", rc.tau, "Distance threshold (default: 90th percentile of leave-one-out distances)");
  r->add_option("--output", rc.output, "Output to reconstruct: pf | stress")->capture_default_str();
  r->add_option("--row", rc.row, "Only reconstruct this input row");

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Train on one dataset, report errors and distances on another");
  e->add_option("--train", ev.train, "Training dataset directory")->required();
  e->add_option("--test", ev.test, "Test dataset directory")->required();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--k1", ev.k1, "Neighbours per training point")->capture_default_str();
  e->add_option("--k2", ev.k2, "Neighbours for reconstruction")->capture_default_str();
  e->add_option("--dims", ev.dim, "Embedding dimension")->capture_default_str();
  e->add_option("--reg", ev.reg, "Relative Gram regularization")->capture_default_str();
  e->add_option("--bins", ev.bins, "Histogram bins for error_hist.csv")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kConfig;
  }

  set_thread_count(threads);
  const int used_threads = max_threads();
  try {
    if (*g) return cmd_gen_data(gen, effective_config(*g, used_threads), out);
    if (*t) return cmd_train(tr, effective_config(*t, used_threads), out);
    if (*c) return cmd_cv(cv, effective_config(*c, used_threads), out);
    if (*r) return cmd_reconstruct(rc, effective_config(*r, used_threads), out);
    if (*e) return cmd_evaluate(ev, effective_config(*e, used_threads), out);
  } catch (const ConfigError& ex) {
    err << "configuration error: " << ex.what() << '\n';
    return kConfig;
  } catch (const FormatError& ex) {
    err << "format error: " << ex.what() << '\n';
    return kFormat;
  } catch (const SolverError& ex) {
    err << "solver error: " << ex.what() << '\n';
    return *g ? kSolver : kNumerical;
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "file error: " << ex.what() << '\n';
    return kFormat;
  }
  return kUsage;
}

}  // namespace rvelle::cli
