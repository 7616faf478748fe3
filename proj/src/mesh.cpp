#include "rvelle/mesh.hpp"

#include <cmath>
#include <sstream>

#include "rvelle/errors.hpp"

namespace rvelle {

RveMesh::RveMesh(double half_width, int n, double fiber_radius)
    : half_width_(half_width), n_(n), h_(2.0 * half_width / n), fiber_radius_(fiber_radius) {
  const int np = n + 1;
  nodes_.resize(static_cast<std::size_t>(np) * np);
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < np; ++i)
      nodes_[static_cast<std::size_t>(node_id(i, j))] = {-half_width + i * h_, -half_width + j * h_};

  elements_.resize(static_cast<std::size_t>(n) * n);
  phase_.resize(elements_.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto e = static_cast<std::size_t>(j * n + i);
      elements_[e] = {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)};
      const Point2 c = centroid(static_cast<int>(e));
      const bool fiber = std::hypot(c.x, c.y) <= fiber_radius_;
      phase_[e] = fiber ? Phase::Fiber : Phase::Matrix;
      if (fiber) ++fiber_elements_;
    }
  }

  matrix_node_.assign(nodes_.size(), 0);
  pure_matrix_node_.assign(nodes_.size(), 1);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    for (int v : elements_[e]) {
      if (phase_[e] == Phase::Matrix)
        matrix_node_[static_cast<std::size_t>(v)] = 1;
      else
        pure_matrix_node_[static_cast<std::size_t>(v)] = 0;
    }
  }
}

Point2 RveMesh::centroid(int e) const {
  const auto& c = elements_[static_cast<std::size_t>(e)];
  const Point2 a = node(c[0]);
  return {a.x + 0.5 * h_, a.y + 0.5 * h_};
}

bool RveMesh::on_boundary(int node) const {
  const int i = node_col(node);
  const int j = node_row(node);
  return i == 0 || j == 0 || i == n_ || j == n_;
}

std::vector<int> RveMesh::incident_elements(int node) const {
  const int i = node_col(node);
  const int j = node_row(node);
  std::vector<int> out;
  for (int dj = -1; dj <= 0; ++dj)
    for (int di = -1; di <= 0; ++di) {
      const int ei = i + di;
      const int ej = j + dj;
      if (ei >= 0 && ej >= 0 && ei < n_ && ej < n_) out.push_back(ej * n_ + ei);
    }
  return out;
}

RveMesh build_mesh(double half_width, int n, double fiber_radius, double length_scale) {
  if (!(half_width > 0.0)) throw ConfigError("mesh: half width L must be > 0");
  if (n < 1) throw ConfigError("mesh: elements per side must satisfy n >= 4");
  if (!(fiber_radius >= 0.0)) throw ConfigError("mesh: fiber radius must be >= 0");
  const double h = 2.0 * half_width / n;
  if (!(fiber_radius + h < half_width)) {
    std::ostringstream msg;
    msg << "mesh: fiber not strictly interior, need r + h < L (" << fiber_radius << " + " << h
        << " >= " << half_width << ")";
    throw ConfigError(msg.str());
  }
  if (n < 4) throw ConfigError("mesh: elements per side must satisfy n >= 4");
  if (!(h <= 0.5 * length_scale)) {
    std::ostringstream msg;
    msg << "mesh: element size too coarse for the length scale, need h <= l/2 (h=" << h
        << " > l/2=" << 0.5 * length_scale << ")";
    throw ConfigError(msg.str());
  }
  return RveMesh(half_width, n, fiber_radius);
}

}  // namespace rvelle
