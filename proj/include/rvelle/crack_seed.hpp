#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include "rvelle/mesh.hpp"

namespace rvelle {

/// Initial crack: three matrix nodes joined by two mesh edges.
struct CrackSeed {
  std::array<int, 3> nodes{};

  /// Node ids in ascending order; two seeds describe the same crack iff
  /// their canonical forms match.
  [[nodiscard]] std::array<int, 3> canonical() const;
  friend bool operator==(const CrackSeed&, const CrackSeed&) = default;
};

/// Empty string if the seed is valid, otherwise the violated rule:
/// consecutive nodes share an edge, the three nodes are not corners of one
/// element, every node is interior to the RVE and all its elements are
/// matrix.
std::string seed_violation(const CrackSeed& seed, const RveMesh& mesh);
inline bool is_valid_seed(const CrackSeed& seed, const RveMesh& mesh) { return seed_violation(seed, mesh).empty(); }

/// Distance below which a starting node is rejected: max(2h, 0.1 L) from
/// the RVE boundary and, when the mesh has a fiber, from the fiber.
double seed_clearance(const RveMesh& mesh);

/// Draws a random seed: a uniformly chosen matrix node with enough clearance,
/// extended by two random axis-aligned edge steps. Invalid paths are
/// rejected and redrawn.
CrackSeed random_seed(const RveMesh& mesh, std::mt19937_64& rng);

/// Straight three-node seed centred on node (i, j), horizontal or vertical.
CrackSeed straight_seed(const RveMesh& mesh, int i, int j, bool horizontal);

}  // namespace rvelle
