#include "rvelle/crack_seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "rvelle/errors.hpp"

namespace rvelle {

std::array<int, 3> CrackSeed::canonical() const {
  auto c = nodes;
  std::sort(c.begin(), c.end());
  return c;
}

namespace {

bool share_edge(const RveMesh& mesh, int a, int b) {
  const int di = std::abs(mesh.node_col(a) - mesh.node_col(b));
  const int dj = std::abs(mesh.node_row(a) - mesh.node_row(b));
  return di + dj == 1;
}

bool same_element(const RveMesh& mesh, const std::array<int, 3>& n) {
  const auto ea = mesh.incident_elements(n[0]);
  for (int e : ea) {
    const auto& c = mesh.element(e);
    const auto has = [&](int v) { return std::find(c.begin(), c.end(), v) != c.end(); };
    if (has(n[1]) && has(n[2])) return true;
  }
  return false;
}

}  // namespace

std::string seed_violation(const CrackSeed& seed, const RveMesh& mesh) {
  const auto& n = seed.nodes;
  for (int v : n)
    if (v < 0 || v >= mesh.node_count()) return "node id out of range";
  if (n[0] == n[1] || n[1] == n[2] || n[0] == n[2]) return "repeated node";
  if (!share_edge(mesh, n[0], n[1]) || !share_edge(mesh, n[1], n[2])) return "consecutive nodes do not share an edge";
  if (same_element(mesh, n)) return "all three nodes belong to one element";
  for (int v : n) {
    if (mesh.on_boundary(v)) return "node on the RVE boundary";
    if (!mesh.is_pure_matrix_node(v)) return "node adjacent to a fiber element";
  }
  return {};
}

double seed_clearance(const RveMesh& mesh) {
  return std::max(2.0 * mesh.element_size(), 0.1 * mesh.half_width());
}

CrackSeed random_seed(const RveMesh& mesh, std::mt19937_64& rng) {
  const double clear = seed_clearance(mesh);
  const double L = mesh.half_width();
  const bool has_fiber = mesh.fiber_element_count() > 0;
  std::vector<int> starts;
  for (int a = 0; a < mesh.node_count(); ++a) {
    if (!mesh.is_pure_matrix_node(a)) continue;
    const Point2 p = mesh.node(a);
    if (L - std::max(std::abs(p.x), std::abs(p.y)) <= clear) continue;
    if (has_fiber && std::hypot(p.x, p.y) - mesh.fiber_radius() <= clear) continue;
    starts.push_back(a);
  }
  if (starts.empty()) throw ConfigError("crack seeding: no matrix node has the required clearance");

  static constexpr std::array<std::array<int, 2>, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
  std::uniform_int_distribution<int> pick_step(0, 3);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const int a = starts[pick_start(rng)];
    const auto s1 = steps[static_cast<std::size_t>(pick_step(rng))];
    const auto s2 = steps[static_cast<std::size_t>(pick_step(rng))];
    const int bi = mesh.node_col(a) + s1[0], bj = mesh.node_row(a) + s1[1];
    const int ci = bi + s2[0], cj = bj + s2[1];
    const int np = mesh.nodes_per_side();
    if (bi < 0 || bj < 0 || ci < 0 || cj < 0 || bi >= np || bj >= np || ci >= np || cj >= np) continue;
    CrackSeed seed{{a, mesh.node_id(bi, bj), mesh.node_id(ci, cj)}};
    if (is_valid_seed(seed, mesh)) return seed;
  }
  throw ConfigError("crack seeding: no valid seed found after 100000 attempts");
}

CrackSeed straight_seed(const RveMesh& mesh, int i, int j, bool horizontal) {
  const int di = horizontal ? 1 : 0;
  const int dj = horizontal ? 0 : 1;
  const int np = mesh.nodes_per_side();
  if (i - di < 0 || j - dj < 0 || i + di >= np || j + dj >= np) throw ConfigError("crack seed: outside the mesh");
  CrackSeed seed{{mesh.node_id(i - di, j - dj), mesh.node_id(i, j), mesh.node_id(i + di, j + dj)}};
  if (auto why = seed_violation(seed, mesh); !why.empty()) throw ConfigError("crack seed: " + why);
  return seed;
}

}  // namespace rvelle
