#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wcto/fe_system.hpp"
#include "wcto/material.hpp"
#include "wcto/uncertainty.hpp"

namespace wcto {

// Inner worst-case problem: maximize the compliance functional
//   J(delta, u) = 2 f'u - u'K(delta)u
// over the degradation budget, with log barriers on the box (0,1)^n (and on
// the dispersion slack). Stationarity convention: grad J_mu + (dg/ddelta) l
// = 0, so the budget multipliers come out nonpositive at maximizers.
struct InnerProblem {
  FeSystem* fe = nullptr;  // borrowed; solver uses its factorization workspace
  MaterialParams params;
  MaterialLaw law;
  UncertaintySet set;
  Eigen::VectorXd rho_f;     // filtered densities, within [rho_min, 1]
  double tikhonov_eps = 0.0; // adds -(eps/2)||delta||^2 to the objective
  // caches derived from rho_f
  Eigen::VectorXd rho_pow;   // rho_f^p
  Eigen::VectorXd w;         // budget weights
};

// Validates inputs and fills the caches. fe must outlive the problem.
InnerProblem make_inner_problem(FeSystem& fe, const MaterialParams& params,
                                const MaterialLaw& law, const UncertaintySet& set,
                                Eigen::VectorXd rho_f, double tikhonov_eps = 0.0);

struct BarrierOptions {
  double mu_init = 0.1;
  double mu_target = 1e-7;
  double mu_factor = 0.2;         // multiplicative decrease per stage
  double tol = 1e-10;             // KKT inf-norm at mu_target
  double constr_viol_tol = 1e-10; // state + budget feasibility at mu_target
  double compl_inf_tol = 1e-4;    // allowed |complementarity - mu_target|
  double tau = 0.995;             // fraction-to-boundary
  int max_newton_per_stage = 200;
  int max_backtracks = 40;
  void validate() const;  // throws std::invalid_argument
};

struct InnerSolution {
  Eigen::VectorXd delta;   // strictly interior unless degenerate_budget
  Eigen::VectorXd u;       // full-length displacement at the maximizer
  Eigen::VectorXd lambda;  // budget multipliers (equality first)
  double slack = 0.0;      // dispersion slack s > 0 (avg_quad only)
  double compliance = 0.0; // f'u
  double objective_mu = 0.0;
  double mu = 0.0;         // barrier level actually reached
  double kkt_stat = 0.0;   // stationarity inf-norm (projected-gradient norm
                           // for continuation stages solved by ascent)
  double kkt_feas = 0.0;   // max of state and budget residual inf-norms
  double kkt_compl = 0.0;  // max |complementarity product - mu|
  int newton_iterations = 0;
  bool converged = false;
  bool degenerate_budget = false;  // D = 0: exact no-adversary solution
  bool near_boundary = false;      // min(delta, 1-delta) < 1e-9 at the solution
};

// Residual blocks of the barrier stationarity system at (delta, u, lambda):
//   r_delta,e = -rho_f^p E'(d_e) u'Khat_e u + mu (1/d_e - 1/(1-d_e))
//               - eps d_e + (dg/dd_e)' lambda
//   r_u       = f - Ku           (free dofs; zeros on fixed)
//   r_g       = equality value, positive part of the dispersion inequality
struct KktResidual {
  Eigen::VectorXd r_delta;
  Eigen::VectorXd r_u;
  Eigen::VectorXd r_g;
};
// Throws std::domain_error if delta touches a bound (barrier undefined).
KktResidual kkt_residual(const InnerProblem& p, const Eigen::VectorXd& delta,
                         const Eigen::VectorXd& u_full, const Eigen::VectorXd& lambda,
                         double mu);

// One primal-dual Newton step at (delta, u, lambda, slack) for barrier mu.
// Computed by eliminating the diagonal delta-block onto a reduced SPD system
// in u (assembled and factored through the FeSystem workspace) plus a k x k
// Schur system for the multipliers. slack is ignored for equality-only sets.
struct NewtonStep {
  Eigen::VectorXd d_delta;
  Eigen::VectorXd d_u_free;
  Eigen::VectorXd d_lambda;
  double d_slack = 0.0;
};
NewtonStep newton_step(const InnerProblem& p, const Eigen::VectorXd& delta,
                       const Eigen::VectorXd& u_full, const Eigen::VectorXd& lambda,
                       double slack, double mu);

// Path-following barrier solve: mu_init, mu_init*factor, ... down to
// mu_target, each stage solved to max(tol, 0.1 mu) by damped Newton with
// fraction-to-boundary clipping. A warm start begins directly at mu_target
// and falls back to the cold path if that stage fails. Budget D = 0 returns
// the exact no-adversary solution. Throws std::invalid_argument for
// infeasible sets and std::runtime_error on non-convergence.
InnerSolution solve_worst_case(const InnerProblem& p, const BarrierOptions& cfg,
                               const InnerSolution* warm = nullptr);

// Tikhonov variant: maximizes J - (eps/2)||delta||^2 with the barrier driven
// to the floor 1e-12 (the strict concavity from eps > 0 replaces the barrier
// as the interior safeguard). Requires eps > 0.
InnerSolution solve_worst_case_tikhonov(const InnerProblem& p, double eps,
                                        BarrierOptions cfg);

// Exact-second-derivative quadratic form of the inner objective's Hessian
// (no barrier) over random unit directions. max_form must be <= 0 up to
// roundoff for the harmonic law; max_form_delta_only restricts the
// directions to the degradation block, where the Tikhonov term bounds the
// form by -eps exactly. For the harmonic law the form is also evaluated
// through the completed-square factorization; max_identity_rel_err reports
// the mismatch (negative when the law is not harmonic, no identity applies).
struct ConcavityProbe {
  double max_form = 0.0;
  double max_form_delta_only = 0.0;
  double max_identity_rel_err = 0.0;
};
ConcavityProbe concavity_probe(const InnerProblem& p, const Eigen::VectorXd& delta,
                               const Eigen::VectorXd& u_full, int n_dirs,
                               unsigned seed);

// Material-model continuation: solve the adversary for the RAMP law with q
// stepping from (E0-ED)/ED (harmonic-equivalent, concave) down to 0 (linear
// law), warm-starting each stage. Stages below the concavity bound are solved
// by projected-gradient ascent with the same barrier (monotone objective,
// best iterate kept on stagnation). Equality-budget sets only. The q = 0
// compliance is a lower bound for the true worst case, the q_max compliance
// an upper bound.
struct ContinuationResult {
  std::vector<double> q_values;
  std::vector<InnerSolution> stages;
  double lower_bound = 0.0;  // q = 0 (linear law) compliance
  double upper_bound = 0.0;  // q = q_max (harmonic law) compliance
};
ContinuationResult ramp_continuation(const InnerProblem& p, int steps,
                                     const BarrierOptions& cfg);

// Single projected-gradient run of the linear-law adversary (RAMP q = 0)
// starting from the canonical interior point, without continuation. The
// objective is convex, so the result is a feasible local maximum whose
// quality depends on the basin reached; pair it with ramp_continuation for
// the bound ordering. Equality-budget sets only.
InnerSolution solve_worst_case_linear(const InnerProblem& p,
                                      const BarrierOptions& cfg);

}  // namespace wcto
