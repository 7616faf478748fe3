#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace rvelle {

enum class Phase : std::uint8_t { Matrix, Fiber };

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Geometry inputs for build_mesh. Lengths in mm.
struct MeshConfig {
  double half_width = 500.0;    // L
  int n = 50;                   // elements per side
  double fiber_radius = 200.0;  // r, default 0.4 L

  friend bool operator==(const MeshConfig&, const MeshConfig&) = default;
};

/// Structured square-element mesh over (-L, L)^2 with a circular fiber at the
/// centre. Nodes are numbered row-major from (-L, -L); element e = j*n + i
/// has corners counter-clockwise starting at the lower-left node.
class RveMesh {
 public:
  RveMesh(double half_width, int n, double fiber_radius);

  [[nodiscard]] double half_width() const { return half_width_; }
  [[nodiscard]] int elements_per_side() const { return n_; }
  [[nodiscard]] double element_size() const { return h_; }
  [[nodiscard]] double fiber_radius() const { return fiber_radius_; }
  [[nodiscard]] int nodes_per_side() const { return n_ + 1; }
  [[nodiscard]] int node_count() const { return (n_ + 1) * (n_ + 1); }
  [[nodiscard]] int element_count() const { return n_ * n_; }
  [[nodiscard]] double area() const { return 4.0 * half_width_ * half_width_; }
  [[nodiscard]] MeshConfig config() const { return {half_width_, n_, fiber_radius_}; }

  [[nodiscard]] int node_id(int i, int j) const { return j * (n_ + 1) + i; }
  [[nodiscard]] int node_col(int node) const { return node % (n_ + 1); }
  [[nodiscard]] int node_row(int node) const { return node / (n_ + 1); }
  [[nodiscard]] Point2 node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  [[nodiscard]] const std::vector<Point2>& nodes() const { return nodes_; }

  [[nodiscard]] const std::array<int, 4>& element(int e) const {
    return elements_[static_cast<std::size_t>(e)];
  }
  [[nodiscard]] Phase phase(int e) const { return phase_[static_cast<std::size_t>(e)]; }
  [[nodiscard]] Point2 centroid(int e) const;

  [[nodiscard]] bool on_boundary(int node) const;
  /// Elements touching a node (1, 2 or 4 of them).
  [[nodiscard]] std::vector<int> incident_elements(int node) const;
  /// True if at least one incident element is matrix.
  [[nodiscard]] bool is_matrix_node(int node) const {
    return matrix_node_[static_cast<std::size_t>(node)] != 0;
  }
  /// True if every incident element is matrix.
  [[nodiscard]] bool is_pure_matrix_node(int node) const {
    return pure_matrix_node_[static_cast<std::size_t>(node)] != 0;
  }
  [[nodiscard]] int fiber_element_count() const { return fiber_elements_; }
  [[nodiscard]] double matrix_area() const {
    return static_cast<double>(element_count() - fiber_elements_) * h_ * h_;
  }

  /// Same dimensions, centroid rule and numbering.
  friend bool operator==(const RveMesh& a, const RveMesh& b) { return a.config() == b.config(); }

 private:
  double half_width_;
  int n_;
  double h_;
  double fiber_radius_;
  std::vector<Point2> nodes_;
  std::vector<std::array<int, 4>> elements_;
  std::vector<Phase> phase_;
  std::vector<std::uint8_t> matrix_node_;
  std::vector<std::uint8_t> pure_matrix_node_;
  int fiber_elements_ = 0;
};

/// Builds the mesh after checking n >= 4, r + h < L and h <= l/2. Throws
/// ConfigError naming the violated inequality.
RveMesh build_mesh(double half_width, int n, double fiber_radius, double length_scale);
inline RveMesh build_mesh(const MeshConfig& cfg, double length_scale) {
  return build_mesh(cfg.half_width, cfg.n, cfg.fiber_radius, length_scale);
}

}  // namespace rvelle
