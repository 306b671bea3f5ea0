#pragma once

#include <Eigen/Dense>
#include <random>

#include "wcto/mesh.hpp"

namespace wcto {

// Admissible degradation sets over delta in [0,1]^n. All variants carry one
// equality budget; avg_quad adds a quadratic dispersion inequality around the
// anchor m. Weights w_e are 1 (plain) or rho_f^p (rho-weighted), applied to
// both constraints of avg_quad.
struct UncertaintySet {
  enum class Kind { linear, rho_weighted, avg_quad } kind = Kind::linear;
  enum class Weighting { plain, rho_weighted } weighting = Weighting::plain;
  double budget = 0.03;     // D (linear/rho_weighted) or D1 (avg_quad)
  double dispersion = 0.0;  // D2 (avg_quad)
  double anchor = 0.4;      // m (avg_quad)

  int n_constraints() const { return kind == Kind::avg_quad ? 2 : 1; }
  bool has_inequality() const { return kind == Kind::avg_quad; }
  void validate() const;  // throws std::invalid_argument
};

// Per-element budget weights: ones, or rho_f^p where the variant weights by
// stiffness density.
Eigen::VectorXd budget_weights(const UncertaintySet& set, const Eigen::VectorXd& rho_f,
                               double penal);

// Maximum reachable equality value sum v_e w_e / |Omega| (delta == 1).
double budget_mass(const Mesh& m, const Eigen::VectorXd& w);

// Constraint values, equality first; inequality reported as g <= 0 form.
Eigen::VectorXd budget_value(const UncertaintySet& set, const Mesh& m,
                             const Eigen::VectorXd& w, const Eigen::VectorXd& delta);

// d g_i / d delta_e, n x k.
Eigen::MatrixXd budget_grad_delta(const UncertaintySet& set, const Mesh& m,
                                  const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& delta);

// Diagonal of d^2 g_ineq / d delta^2 (zeros when the set has no inequality).
Eigen::VectorXd budget_ineq_hess_diag(const UncertaintySet& set, const Mesh& m,
                                      const Eigen::VectorXd& w);

// d g_i / d rho_f_e, n x k; zero for plain-weighted variants.
Eigen::MatrixXd budget_grad_rho(const UncertaintySet& set, const Mesh& m,
                                const Eigen::VectorXd& rho_f, double penal,
                                const Eigen::VectorXd& delta);

// Strictly interior start: budget-consistent constant delta (checked against
// the dispersion bound for avg_quad). Throws std::invalid_argument when the
// set has empty strict interior for the given weights.
Eigen::VectorXd canonical_start(const UncertaintySet& set, const Mesh& m,
                                const Eigen::VectorXd& w);

// Random strictly feasible point: uniform draw rescaled onto the equality by
// bisection (|g_eq| <= 1e-10), blended toward the canonical start if the
// dispersion bound is violated. Throws std::invalid_argument when infeasible.
Eigen::VectorXd sample_feasible(const UncertaintySet& set, const Mesh& m,
                                const Eigen::VectorXd& w, std::mt19937_64& rng);

}  // namespace wcto
