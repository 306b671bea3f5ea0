#pragma once

#include <Eigen/Dense>

namespace wcto {

struct MaterialParams {
  double E0 = 1.0;       // pristine Young's modulus
  double ED = 0.7;       // fully degraded modulus, 0 < ED <= E0
  double penal = 4.0;    // SIMP exponent p
  double rho_min = 0.01; // lower design density bound
  double nu = 0.3;       // Poisson ratio (plane strain)
  void validate() const; // throws std::invalid_argument
};

// Interpolation between E0 (delta = 0) and ED (delta = 1).
// kind::inverse is the harmonic law 1/E = (1-delta)/E0 + delta/ED, which makes
// worst-case compliance concave in delta. kind::ramp with curvature q matches
// the inverse law exactly at q = (E0-ED)/ED and degenerates to the linear law
// at q = 0.
struct MaterialLaw {
  enum class Kind { inverse, ramp } kind = Kind::inverse;
  double q = 0.0;  // RAMP curvature, ignored for inverse
  static MaterialLaw inverse() { return {Kind::inverse, 0.0}; }
  static MaterialLaw ramp(double q) { return {Kind::ramp, q}; }
};

double young_inverse(double delta, const MaterialParams& mp);
double young_ramp(double delta, double q, const MaterialParams& mp);

// Batched E, E', E'' for a given law; any output may be nullptr.
void young_derivs(const MaterialLaw& law, const MaterialParams& mp,
                  const Eigen::VectorXd& delta, Eigen::VectorXd* E,
                  Eigen::VectorXd* dE, Eigen::VectorXd* d2E);

// Element stiffness coefficients rho_f^p * E(delta).
Eigen::VectorXd effective_modulus(const Eigen::VectorXd& rho_f,
                                  const Eigen::VectorXd& delta,
                                  const MaterialLaw& law, const MaterialParams& mp);

// Worst-case compliance is concave in delta iff q >= this bound; at the bound
// the RAMP law coincides with the inverse law.
double ramp_concavity_bound(const MaterialParams& mp);
bool ramp_is_concave(double q, const MaterialParams& mp);

}  // namespace wcto
