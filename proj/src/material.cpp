#include "rvelle/material.hpp"

#include <string>

#include "rvelle/errors.hpp"

namespace rvelle {

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(lambda_m, "lambda_m");
  positive(mu_m, "mu_m");
  positive(lambda_f, "lambda_f");
  positive(mu_f, "mu_f");
  positive(g_c, "g_c");
  positive(l, "l");
  if (!(k_res >= 0.0 && k_res < 1.0)) throw ConfigError("k_res must satisfy 0 <= k_res < 1");
}

}  // namespace rvelle
