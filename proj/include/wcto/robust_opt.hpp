#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "wcto/adversary.hpp"
#include "wcto/config.hpp"
#include "wcto/fe_system.hpp"
#include "wcto/filter.hpp"
#include "wcto/material.hpp"
#include "wcto/uncertainty.hpp"

namespace wcto {

// Outer design iterate: unfiltered densities with box and volume bounds,
// plus the filtered cache that enters the stiffness.
struct DesignField {
  Eigen::VectorXd rho;    // in [rho_min, 1]^n
  Eigen::VectorXd rho_f;  // filtered densities for the same iterate
  double rho_min = 0.01;
  double volume_fraction = 0.5;  // bound on sum(v_e rho_e) / |Omega|
  // Box bounds elementwise, volume within 1e-9 of the bound. Throws
  // std::invalid_argument.
  void validate(const Mesh& m) const;
};

// Volume fraction sum(v_e rho_e) / |Omega| of an unfiltered design.
double volume_fraction_of(const Mesh& m, const Eigen::VectorXd& rho);

// Moving-asymptote state carried across design updates. Asymptotes start at
// 0.5x the variable range and adapt by 0.7 (oscillation) / 1.2 (monotone);
// they strictly bracket the bounds-clipped iterate by construction.
struct MmaState {
  double move = 0.2;  // move limit as a fraction of the variable range
  Eigen::VectorXd low, upp;      // empty until the first step
  Eigen::VectorXd xold1, xold2;  // previous iterates
  int iter = 0;                  // completed steps
};

// One design update for min f(x) s.t. g(x) <= 0, xmin <= x <= xmax: builds
// the separable MMA subproblem at x from the gradients and solves it exactly
// by bisection on the single dual multiplier. Returns the new iterate and
// advances the state. Throws std::invalid_argument on malformed input and
// std::runtime_error if the dual bracket fails (infeasible subproblem, which
// a feasible x with one linear constraint cannot produce).
Eigen::VectorXd mma_step(MmaState& st, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& grad_f, double g,
                         const Eigen::VectorXd& grad_g, double xmin, double xmax);

// Outer loop controls shared by the nominal and robust solves.
struct OuterOptions {
  int max_iter = 500;
  double change_tol = 1e-3;  // stop when max|rho_next - rho| drops below
  double move = 0.2;
};

// Standard compliance minimization (delta == 0) from the uniform feasible
// start at the volume bound, run to convergence. This is the nominal design
// and the reference compliance of every report.
DesignField nominal_solve(FeSystem& fe, const DensityFilter& filter,
                          const MaterialParams& mp, double volume_fraction,
                          const OuterOptions& opt);

// Gradient of the worst-case compliance with respect to the unfiltered
// densities at a converged inner solution: per filtered element
// -p rho_f^(p-1) E(delta) u'Khat u plus the budget multiplier term, chained
// through the filter transpose. Re-checks the inner KKT residuals at the
// solution's own barrier parameter and throws std::invalid_argument when
// they exceed 1e-6 (stale or unconverged inner solve).
Eigen::VectorXd marginal_gradient(const InnerProblem& p,
                                  const DensityFilter& filter,
                                  const InnerSolution& inner);

struct OuterRecord {
  int k = 0;               // outer iteration, 1-based
  double objective = 0.0;  // worst-case compliance at the pre-update design
  double volume = 0.0;     // volume fraction of the pre-update design
  double change = 0.0;     // max|rho_next - rho| of this update
  int inner_newton = 0;    // inner iterations spent by the adversary solve
};

// One report row; percentages are relative increases against the nominal
// topology at the reference degradation (delta == 0, or delta == m for
// dispersion sets). The continuation triple evaluates the robust topology's
// worst case three ways: RAMP continuation (lower bound), direct linear-law
// ascent, and the harmonic law (upper bound).
struct ReportRow {
  double budget = 0.0;
  double compliance_reference = 0.0;  // absolute, nominal topology
  double wc_topo_reference_delta = 0.0;
  double nom_topo_worst_delta = 0.0;
  double wc_topo_worst_delta = 0.0;
  bool has_continuation = false;
  double contin = 0.0;
  double direct = 0.0;
  double inverse = 0.0;
};

struct ReportOptions {
  BarrierOptions barrier;
  int continuation_steps = 0;  // 0 = off, >= 2 adds the triple
  double tikhonov_eps = 0.0;
};

// Evaluates the report table for a fixed pair of topologies: reference
// compliances by direct solves, worst cases by fresh adversary solves per
// set. Rows come back in the order of `sets`.
std::vector<ReportRow> evaluate_report(FeSystem& fe, const DensityFilter& filter,
                                       const MaterialParams& mp,
                                       const Eigen::VectorXd& rho_nominal,
                                       const Eigen::VectorXd& rho_robust,
                                       const std::vector<UncertaintySet>& sets,
                                       const ReportOptions& opt);

struct RunResult {
  DesignField nominal;
  DesignField robust;
  InnerSolution worst;  // fresh adversary solve on the final robust design
  double nominal_compliance = 0.0;  // delta == 0 compliance of the nominal design
  std::vector<OuterRecord> history;
  std::vector<ReportRow> report;
};

// Invoked after every outer iteration with the record and the post-update
// design; lets the driver stream logs and keep the last good iterate.
using OuterCallback = std::function<void(const OuterRecord&, const DesignField&)>;

// Full pipeline on one budget: nominal solve, then the robust loop
// (warm-started adversary, marginal gradient, MMA update) until the design
// change drops below change_tol or max_iter, then the report on the final
// pair. A zero budget degenerates to the nominal solve. Failures rethrow as
// std::runtime_error tagged with the stage; iterates already handed to the
// callback remain valid.
RunResult optimize(const RunConfig& cfg, const OuterCallback& on_iterate = {});

}  // namespace wcto
