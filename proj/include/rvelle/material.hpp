#pragma once

namespace rvelle {

/// Matrix/fiber constants. Moduli are stored in GPa and the toughness in
/// mJ/mm^2 as tabulated; the solvers work in MPa (= mJ/mm^3) and mm, so use
/// the *_mpa accessors for anything that meets g_c.
struct MaterialParams {
  double lambda_m = 121.15;  // GPa
  double mu_m = 80.77;       // GPa
  double lambda_f = 105.58;  // GPa
  double mu_f = 172.27;      // GPa
  double g_c = 2.7;          // mJ/mm^2
  double l = 40.0;           // mm
  double k_res = 1e-6;

  static constexpr double kMpaPerGpa = 1000.0;

  /// Bulk modulus of the matrix, K = lambda + 2 mu / 3 (GPa).
  [[nodiscard]] double bulk_m() const { return lambda_m + 2.0 * mu_m / 3.0; }
  [[nodiscard]] double nu_m() const { return lambda_m / (2.0 * (lambda_m + mu_m)); }
  [[nodiscard]] double nu_f() const { return lambda_f / (2.0 * (lambda_f + mu_f)); }

  [[nodiscard]] double lambda_m_mpa() const { return lambda_m * kMpaPerGpa; }
  [[nodiscard]] double mu_m_mpa() const { return mu_m * kMpaPerGpa; }
  [[nodiscard]] double bulk_m_mpa() const { return bulk_m() * kMpaPerGpa; }
  [[nodiscard]] double lambda_f_mpa() const { return lambda_f * kMpaPerGpa; }
  [[nodiscard]] double mu_f_mpa() const { return mu_f * kMpaPerGpa; }

  /// Degradation g(d) = (1 - d)^2 + k_res.
  [[nodiscard]] double degradation(double d) const { return (1.0 - d) * (1.0 - d) + k_res; }

  /// Throws ConfigError on non-positive moduli, g_c, l or k_res outside [0, 1).
  void validate() const;

  friend bool operator==(const MaterialParams&, const MaterialParams&) = default;
};

}  // namespace rvelle
