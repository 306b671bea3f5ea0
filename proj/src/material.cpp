#include "wcto/material.hpp"

#include <cmath>
#include <stdexcept>

#include "wcto/kernels.hpp"

namespace wcto {

void MaterialParams::validate() const {
  if (!(E0 > 0.0)) throw std::invalid_argument("material: E0 must be positive");
  if (!(ED > 0.0) || !(ED <= E0))
    throw std::invalid_argument("material: ED must satisfy 0 < ED <= E0");
  if (!(penal >= 1.0)) throw std::invalid_argument("material: penal must be >= 1");
  if (!(rho_min > 0.0) || !(rho_min < 1.0))
    throw std::invalid_argument("material: rho_min must lie in (0, 1)");
  if (!(nu >= 0.0) || !(nu < 0.5))
    throw std::invalid_argument("material: nu must lie in [0, 0.5)");
}

double young_inverse(double delta, const MaterialParams& mp) {
  if (!(delta >= 0.0) || !(delta <= 1.0))
    throw std::invalid_argument("young_inverse: delta must lie in [0, 1]");
  return 1.0 / ((1.0 - delta) / mp.E0 + delta / mp.ED);
}

double young_ramp(double delta, double q, const MaterialParams& mp) {
  if (!(delta >= 0.0) || !(delta <= 1.0))
    throw std::invalid_argument("young_ramp: delta must lie in [0, 1]");
  if (!(q >= 0.0)) throw std::invalid_argument("young_ramp: q must be >= 0");
  return mp.ED + (1.0 - delta) * (mp.E0 - mp.ED) / (1.0 + q * delta);
}

void young_derivs(const MaterialLaw& law, const MaterialParams& mp,
                  const Eigen::VectorXd& delta, Eigen::VectorXd* E,
                  Eigen::VectorXd* dE, Eigen::VectorXd* d2E) {
  const std::size_t n = static_cast<std::size_t>(delta.size());
  if (E) E->resize(delta.size());
  if (dE) dE->resize(delta.size());
  if (d2E) d2E->resize(delta.size());
  double* pe = E ? E->data() : nullptr;
  double* pd = dE ? dE->data() : nullptr;
  double* pd2 = d2E ? d2E->data() : nullptr;
  if (law.kind == MaterialLaw::Kind::inverse) {
    kernels::law_inverse_eval(delta.data(), n, 1.0 / mp.E0, 1.0 / mp.ED - 1.0 / mp.E0,
                              pe, pd, pd2);
  } else {
    kernels::law_ramp_eval(delta.data(), n, mp.E0, mp.ED, law.q, pe, pd, pd2);
  }
}

Eigen::VectorXd effective_modulus(const Eigen::VectorXd& rho_f,
                                  const Eigen::VectorXd& delta,
                                  const MaterialLaw& law, const MaterialParams& mp) {
  if (rho_f.size() != delta.size())
    throw std::invalid_argument("effective_modulus: size mismatch");
  Eigen::VectorXd E;
  young_derivs(law, mp, delta, &E, nullptr, nullptr);
  return rho_f.array().pow(mp.penal) * E.array();
}

double ramp_concavity_bound(const MaterialParams& mp) {
  return (mp.E0 - mp.ED) / mp.ED;
}

bool ramp_is_concave(double q, const MaterialParams& mp) {
  // Tolerate round-off at the bound itself (the inverse-law-equivalent q).
  return q >= ramp_concavity_bound(mp) * (1.0 - 1e-12);
}

}  // namespace wcto
