#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace rvelle {

/// Selects the kernel variant. `serial` is the reference implementation the
/// OpenMP kernels are tested against; both must give bitwise-identical
/// results, so every parallel loop writes to index-owned slots only.
enum class Exec { serial, parallel };

/// Runs body(i) for i in [0, n). Iterations must be independent. An exception
/// thrown by any iteration is rethrown after the loop; when several throw, the
/// lowest index wins so the reported failure does not depend on scheduling.
template <typename Body>
void for_each_index(Exec exec, std::ptrdiff_t n, Body&& body) {
  if (exec == Exec::serial || n < 2) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

inline int max_threads() { return omp_get_max_threads(); }

}  // namespace rvelle
