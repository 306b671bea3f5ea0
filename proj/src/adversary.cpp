#include "wcto/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "wcto/kernels.hpp"

namespace wcto {

namespace {

constexpr double kInteriorClip = 1e-10;  // warm-start clip into the open box

struct Iterate {
  Eigen::VectorXd delta;
  Eigen::VectorXd u_free, u_full;
  Eigen::VectorXd lambda;
  double s = 0.0;  // dispersion slack
};

// Everything the Newton step and the line search need at one point.
struct Eval {
  Eigen::VectorXd E, dE, d2E;
  Eigen::VectorXd coeff;    // rho_f^p E
  Eigen::VectorXd energy;   // u' Khat u per element
  Eigen::VectorXd b1, b2;   // barrier first/second derivative terms
  Eigen::MatrixXd G;        // budget gradients, n x k
  Eigen::VectorXd grad_J;   // dJ_mu/ddelta (no multiplier part)
  Eigen::VectorXd F_delta;  // grad_J + G lambda
  Eigen::VectorXd F_u;      // 2(f - Ku) on free dofs
  Eigen::VectorXd c;        // (g_eq; g_ineq + s)
  double F_s = 0.0;         // mu/s + lambda_2
  double J_mu = 0.0;
  double stat = 0.0, state_res = 0.0, feas = 0.0, theta = 0.0;
};

// K(delta) u through the element kernels; the FeSystem values stay untouched.
// Khat is symmetric, so its column-major storage doubles as row-major.
Eigen::VectorXd apply_K_free(const InnerProblem& p, const Eigen::VectorXd& coeff,
                             const Eigen::VectorXd& u_full) {
  const Mesh& m = p.fe->mesh();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.n_dof);
  kernels::element_scatter_add(u_full.data(), m.conn.data(), m.n_elem,
                               p.fe->Khat().data(), coeff.data(), out.data());
  return p.fe->to_free(out);
}

Eval evaluate(const InnerProblem& p, const Iterate& x, double mu) {
  const Mesh& m = p.fe->mesh();
  const int n = m.n_elem;
  const bool ineq = p.set.has_inequality();
  Eval ev;
  young_derivs(p.law, p.params, x.delta, &ev.E, &ev.dE, &ev.d2E);
  ev.coeff = p.rho_pow.cwiseProduct(ev.E);
  ev.energy.resize(n);
  kernels::element_energies(x.u_full.data(), m.conn.data(), n, p.fe->Khat().data(),
                            ev.energy.data());
  ev.b1.resize(n);
  ev.b2.resize(n);
  kernels::barrier_terms(x.delta.data(), n, ev.b1.data(), ev.b2.data());
  ev.G = budget_grad_delta(p.set, m, p.w, x.delta);
  ev.grad_J = (-(p.rho_pow.array() * ev.dE.array() * ev.energy.array())).matrix() +
              mu * ev.b1 - p.tikhonov_eps * x.delta;
  ev.F_delta = ev.grad_J + ev.G * x.lambda;
  ev.F_u = 2.0 * (p.fe->f_free() - apply_K_free(p, ev.coeff, x.u_full));
  ev.c = budget_value(p.set, m, p.w, x.delta);
  if (ineq) {
    ev.c[1] += x.s;
    ev.F_s = mu / x.s + x.lambda[1];
  }
  const double barrier =
      (x.delta.array().log() + (1.0 - x.delta.array()).log()).sum();
  ev.J_mu = 2.0 * p.fe->f_free().dot(x.u_free) - ev.coeff.dot(ev.energy) +
            mu * barrier - 0.5 * p.tikhonov_eps * x.delta.squaredNorm() +
            (ineq ? mu * std::log(x.s) : 0.0);
  ev.stat = std::max(ev.F_delta.lpNorm<Eigen::Infinity>(), std::abs(ev.F_s));
  ev.state_res = 0.5 * ev.F_u.lpNorm<Eigen::Infinity>();
  ev.feas = std::max(ev.state_res, ev.c.lpNorm<Eigen::Infinity>());
  ev.theta = std::sqrt(ev.F_delta.squaredNorm() + ev.F_u.squaredNorm() +
                       ev.F_s * ev.F_s + ev.c.squaredNorm());
  return ev;
}

struct Direction {
  Eigen::VectorXd d_delta, d_u_free, d_lambda;
  double d_s = 0.0;
};

// Block-eliminated Newton step. The delta block D is diagonal and negative;
// eliminating it (and the slack) leaves Atilde = 2K + B D^{-1} B' (SPD exactly
// when the inner Hessian is negative definite) and a k x k Schur system for
// the multipliers. One factorization, k+1 sparse solves.
Direction compute_step(const InnerProblem& p, const Iterate& x, const Eval& ev,
                       double mu) {
  const Mesh& m = p.fe->mesh();
  const int n = m.n_elem;
  const int k = p.set.n_constraints();
  const bool ineq = p.set.has_inequality();

  Eigen::ArrayXd D = -(p.rho_pow.array() * ev.d2E.array() * ev.energy.array()) -
                     mu * ev.b2.array() - p.tikhonov_eps;
  if (ineq) {
    // Drop the positive part of an errant inequality multiplier (curvature
    // guard); the converged multiplier is nonpositive.
    const Eigen::VectorXd h2 = budget_ineq_hess_diag(p.set, m, p.w);
    D += std::min(x.lambda[1], 0.0) * h2.array();
  }
  if (!(D.maxCoeff() < 0.0))
    throw std::runtime_error("inner solve: delta-block curvature lost its sign");

  const Eigen::VectorXd sv = (-2.0 * p.rho_pow.array() * ev.dE.array()).matrix();

  auto B_times = [&](const Eigen::VectorXd& xs) {  // B xs = sum_e xs_e s_e Khat u
    Eigen::VectorXd c = sv.cwiseProduct(xs);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.n_dof);
    kernels::element_scatter_add(x.u_full.data(), m.conn.data(), n,
                                 p.fe->Khat().data(), c.data(), out.data());
    return p.fe->to_free(out);
  };
  auto Bt_times = [&](const Eigen::VectorXd& y_free) {  // (B'y)_e = s_e (Khat u)'y
    const Eigen::VectorXd y_full = p.fe->to_full(y_free);
    Eigen::VectorXd out(n);
    kernels::element_apply_dot(x.u_full.data(), y_full.data(), m.conn.data(), n,
                               p.fe->Khat().data(), out.data());
    return Eigen::VectorXd(sv.cwiseProduct(out));
  };

  p.fe->assemble(2.0 * ev.coeff, x.u_full,
                 (sv.array().square() / D).matrix().eval());
  p.fe->factorize();
  if (!p.fe->factorization_positive_definite())
    throw std::runtime_error("inner solve: reduced Hessian not positive definite");

  Eigen::MatrixXd GD(n, k);  // D^{-1} G
  for (int j = 0; j < k; ++j) GD.col(j) = (ev.G.col(j).array() / D).matrix();
  Eigen::MatrixXd W(p.fe->n_free(), k);
  for (int j = 0; j < k; ++j) W.col(j) = B_times(GD.col(j));
  const Eigen::VectorXd rhs_u =
      ev.F_u - B_times((ev.F_delta.array() / D).matrix());

  Eigen::MatrixXd AiW(p.fe->n_free(), k);
  for (int j = 0; j < k; ++j) AiW.col(j) = p.fe->solve_free(W.col(j));
  const Eigen::VectorXd Airhs = p.fe->solve_free(rhs_u);

  Eigen::MatrixXd S = W.transpose() * AiW - ev.G.transpose() * GD;
  Eigen::VectorXd rhs_l = -ev.c + GD.transpose() * ev.F_delta +
                          W.transpose() * Airhs;
  if (ineq) {
    S(1, 1) += x.s * x.s / mu;
    rhs_l[1] -= (x.s * x.s / mu) * ev.F_s;
  }

  Direction d;
  d.d_lambda = S.llt().solve(rhs_l);
  d.d_u_free = Airhs - AiW * d.d_lambda;
  d.d_delta =
      ((-ev.F_delta - Bt_times(d.d_u_free) - ev.G * d.d_lambda).array() / D)
          .matrix();
  if (ineq) d.d_s = (x.s * x.s / mu) * (ev.F_s + d.d_lambda[1]);
  return d;
}

// Smallest stationarity change representable at this iterate: one ulp of
// delta_e through the barrier curvature mu*(1/d^2 + 1/(1-d)^2). Elements
// pinned near the upper box bound quantize the residual in steps of this
// size, so no double-precision iterate can do better than half a step.
double stationarity_floor(const Eigen::VectorXd& delta, double mu) {
  double f = 0.0;
  for (int e = 0; e < delta.size(); ++e) {
    const double d = delta[e];
    const double ulp = std::nextafter(d, 2.0) - d;
    const double curv =
        mu * (1.0 / (d * d) + 1.0 / ((1.0 - d) * (1.0 - d)));
    if (std::isfinite(curv)) f = std::max(f, curv * ulp);
  }
  return f;
}

double fraction_to_boundary(const Iterate& x, const Direction& d, bool ineq,
                            double tau) {
  double a = 1.0;
  for (int e = 0; e < x.delta.size(); ++e) {
    if (d.d_delta[e] < 0.0)
      a = std::min(a, -tau * x.delta[e] / d.d_delta[e]);
    else if (d.d_delta[e] > 0.0)
      a = std::min(a, tau * (1.0 - x.delta[e]) / d.d_delta[e]);
  }
  if (ineq && d.d_s < 0.0) a = std::min(a, -tau * x.s / d.d_s);
  return a;
}

struct StageOutcome {
  Eval ev;
  int iters = 0;
};

// Damped Newton at fixed mu. A step is accepted when the barrier objective
// rises (budget violation kept in check) or the KKT residual contracts; the
// equality rows are affine, so feasible iterates stay feasible for any step.
StageOutcome solve_stage(const InnerProblem& p, Iterate& x, double mu,
                         double stage_tol, double feas_tol,
                         const BarrierOptions& cfg) {
  const bool ineq = p.set.has_inequality();
  Eval ev = evaluate(p, x, mu);
  int iters = 0;
  for (int it = 0; it < cfg.max_newton_per_stage; ++it) {
    if (std::getenv("WCTO_TRACE"))
      std::fprintf(stderr, "mu=%.1e it=%d stat=%.3e feas=%.3e theta=%.3e J=%.12e\n",
                   mu, it, ev.stat, ev.feas, ev.theta, ev.J_mu);
    const double tol_eff =
        std::max(stage_tol, stationarity_floor(x.delta, mu));
    if (ev.stat <= tol_eff && ev.feas <= feas_tol) return {std::move(ev), iters};
    const Direction dir = compute_step(p, x, ev, mu);
    const double dJ = ev.grad_J.dot(dir.d_delta) + ev.F_u.dot(dir.d_u_free) +
                      (ineq ? (mu / x.s) * dir.d_s : 0.0);
    const double viol0 = ev.c.lpNorm<Eigen::Infinity>();
    double alpha = fraction_to_boundary(x, dir, ineq, cfg.tau);
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      Iterate t;
      t.delta = x.delta + alpha * dir.d_delta;
      t.u_free = x.u_free + alpha * dir.d_u_free;
      t.u_full = p.fe->to_full(t.u_free);
      t.lambda = x.lambda + alpha * dir.d_lambda;
      t.s = ineq ? x.s + alpha * dir.d_s : 0.0;
      // damped update rounds to the current iterate: no representable progress
      if (t.delta.cwiseEqual(x.delta).all() &&
          t.u_free.cwiseEqual(x.u_free).all() &&
          t.lambda.cwiseEqual(x.lambda).all() && t.s == x.s)
        break;
      Eval evt = evaluate(p, t, mu);
      const bool merit_ok =
          evt.J_mu >= ev.J_mu + 1e-4 * alpha * std::max(dJ, 0.0) &&
          evt.c.lpNorm<Eigen::Infinity>() <= std::max(1.5 * viol0, 1e-8);
      const bool theta_ok = evt.theta <= (1.0 - 1e-4 * alpha) * ev.theta;
      if (merit_ok || theta_ok) {
        x = std::move(t);
        ev = std::move(evt);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++iters;
    if (!accepted) {
      const double tol_eff =
          std::max(stage_tol, stationarity_floor(x.delta, mu));
      if (ev.stat <= 10.0 * tol_eff && ev.feas <= 10.0 * feas_tol)
        return {std::move(ev), iters};  // numerical floor, close enough to pass on
      throw std::runtime_error("inner solve: line search failed at mu = " +
                               std::to_string(mu));
    }
  }
  if (ev.stat <= std::max(stage_tol, stationarity_floor(x.delta, mu)) &&
      ev.feas <= feas_tol)
    return {std::move(ev), iters};
  throw std::runtime_error("inner solve: Newton iteration cap reached at mu = " +
                           std::to_string(mu));
}

// Least-squares multipliers from the delta stationarity; the slack multiplier
// is pinned to its barrier-exact value first.
Eigen::VectorXd init_lambda(const InnerProblem& p, double mu, double s,
                            const Eigen::MatrixXd& G,
                            const Eigen::VectorXd& grad_J) {
  Eigen::VectorXd l = Eigen::VectorXd::Zero(p.set.n_constraints());
  Eigen::VectorXd r = grad_J;
  if (p.set.has_inequality()) {
    l[1] = -mu / s;
    r += G.col(1) * l[1];
  }
  l[0] = -G.col(0).dot(r) / G.col(0).squaredNorm();
  return l;
}

Iterate cold_start(const InnerProblem& p, double mu0) {
  const Mesh& m = p.fe->mesh();
  Iterate x;
  x.delta = canonical_start(p.set, m, p.w);  // throws when the set is infeasible
  Eigen::VectorXd E;
  young_derivs(p.law, p.params, x.delta, &E, nullptr, nullptr);
  const StateSolution st = p.fe->solve_state(p.rho_pow.cwiseProduct(E));
  x.u_full = st.u;
  x.u_free = p.fe->to_free(st.u);
  if (p.set.has_inequality())
    x.s = -budget_value(p.set, m, p.w, x.delta)[1];  // > 0 by canonical margin
  x.lambda = Eigen::VectorXd::Zero(p.set.n_constraints());
  const Eval ev0 = evaluate(p, x, mu0);
  x.lambda = init_lambda(p, mu0, x.s, ev0.G, ev0.grad_J);
  return x;
}

Iterate warm_start(const InnerProblem& p, const InnerSolution& w0, double mu) {
  const Mesh& m = p.fe->mesh();
  if (w0.delta.size() != m.n_elem)
    throw std::invalid_argument("inner solve: warm start size mismatch");
  Iterate x;
  x.delta = w0.delta.cwiseMax(kInteriorClip).cwiseMin(1.0 - kInteriorClip);
  Eigen::VectorXd E;
  young_derivs(p.law, p.params, x.delta, &E, nullptr, nullptr);
  const StateSolution st = p.fe->solve_state(p.rho_pow.cwiseProduct(E));
  x.u_full = st.u;
  x.u_free = p.fe->to_free(st.u);
  if (p.set.has_inequality()) {
    const double g2 = budget_value(p.set, m, p.w, x.delta)[1];
    x.s = std::max(-g2, 1e-8);
  }
  if (w0.lambda.size() == p.set.n_constraints()) {
    x.lambda = w0.lambda;
    if (p.set.has_inequality() && !(x.lambda[1] < 0.0)) x.lambda[1] = -mu / x.s;
  } else {
    x.lambda = Eigen::VectorXd::Zero(p.set.n_constraints());
    const Eval ev0 = evaluate(p, x, mu);
    x.lambda = init_lambda(p, mu, x.s, ev0.G, ev0.grad_J);
  }
  return x;
}

InnerSolution package(const InnerProblem& p, const Iterate& x, const Eval& ev,
                      double mu, int iters) {
  InnerSolution s;
  s.delta = x.delta;
  s.u = x.u_full;
  s.lambda = x.lambda;
  s.slack = x.s;
  s.compliance = p.fe->f_free().dot(x.u_free);
  s.objective_mu = ev.J_mu;
  s.mu = mu;
  s.kkt_stat = ev.stat;
  s.kkt_feas = ev.feas;
  // Box complementarity products equal mu exactly in a primal barrier method;
  // only the dispersion slack pair can deviate.
  s.kkt_compl =
      p.set.has_inequality() ? std::abs(-x.lambda[1] * x.s - mu) : 0.0;
  s.newton_iterations = iters;
  s.converged = true;
  s.near_boundary =
      std::min(x.delta.minCoeff(), 1.0 - x.delta.maxCoeff()) < 1e-9;
  return s;
}

// Exact solution of the D = 0 problem: the budget pins delta to zero, the
// barrier limit drops out, and the adversary reduces to the nominal state.
InnerSolution degenerate_solution(const InnerProblem& p) {
  const Mesh& m = p.fe->mesh();
  InnerSolution sol;
  sol.delta = Eigen::VectorXd::Zero(m.n_elem);
  const Eigen::VectorXd g = budget_value(p.set, m, p.w, sol.delta);
  if (p.set.has_inequality() && g[1] > 0.0)
    throw std::invalid_argument(
        "inner solve: zero-budget set violates the dispersion bound");
  Eigen::VectorXd E;
  young_derivs(p.law, p.params, sol.delta, &E, nullptr, nullptr);
  const Eigen::VectorXd coeff = p.rho_pow.cwiseProduct(E);
  const StateSolution st = p.fe->solve_state(coeff);
  sol.u = st.u;
  sol.compliance = st.compliance;
  sol.objective_mu = st.compliance;
  sol.lambda = Eigen::VectorXd::Zero(p.set.n_constraints());
  sol.slack = p.set.has_inequality() ? std::max(-g[1], 0.0) : 0.0;
  sol.kkt_feas = (p.fe->f_free() - apply_K_free(p, coeff, st.u))
                     .lpNorm<Eigen::Infinity>();
  sol.converged = true;
  sol.degenerate_budget = true;
  return sol;
}

std::vector<double> mu_schedule(const BarrierOptions& cfg) {
  std::vector<double> mus;
  for (double mu = cfg.mu_init; mu > cfg.mu_target * (1.0 + 1e-12);
       mu *= cfg.mu_factor)
    mus.push_back(mu);
  mus.push_back(cfg.mu_target);
  return mus;
}

InnerSolution run_path(const InnerProblem& p, Iterate x, const BarrierOptions& cfg,
                       const std::vector<double>& mus) {
  int total = 0;
  Eval ev;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const bool last = i + 1 == mus.size();
    const double mu = mus[i];
    const double stage_tol = last ? cfg.tol : std::max(cfg.tol, 0.1 * mu);
    const double feas_tol =
        last ? cfg.constr_viol_tol : std::max(cfg.constr_viol_tol, 0.1 * mu);
    StageOutcome out = solve_stage(p, x, mu, stage_tol, feas_tol, cfg);
    total += out.iters;
    ev = std::move(out.ev);
  }
  return package(p, x, ev, mus.back(), total);
}

// ---- projected-gradient ascent for non-concave continuation stages --------

struct PgEval {
  double phi = 0.0;         // compliance + barrier (- Tikhonov term)
  double compliance = 0.0;
  Eigen::VectorXd u_full;
  Eigen::VectorXd grad;
};

// Reduced functional phi(delta) with u eliminated through a state solve; the
// gradient is exact by self-adjointness of compliance.
PgEval pg_evaluate(const InnerProblem& p, const Eigen::VectorXd& delta, double mu) {
  const Mesh& m = p.fe->mesh();
  Eigen::VectorXd E, dE;
  young_derivs(p.law, p.params, delta, &E, &dE, nullptr);
  const StateSolution st = p.fe->solve_state(p.rho_pow.cwiseProduct(E));
  PgEval ev;
  ev.u_full = st.u;
  ev.compliance = st.compliance;
  Eigen::VectorXd energy(m.n_elem), b1(m.n_elem);
  kernels::element_energies(st.u.data(), m.conn.data(), m.n_elem,
                            p.fe->Khat().data(), energy.data());
  kernels::barrier_terms(delta.data(), m.n_elem, b1.data(), nullptr);
  ev.grad = (-(p.rho_pow.array() * dE.array() * energy.array())).matrix() +
            mu * b1 - p.tikhonov_eps * delta;
  ev.phi = st.compliance +
           mu * (delta.array().log() + (1.0 - delta.array()).log()).sum() -
           0.5 * p.tikhonov_eps * delta.squaredNorm();
  return ev;
}

// Euclidean projection onto {a'delta = r} intersected with [lo, hi]^n:
// clip(z + nu a) with the scalar nu bracketed and bisected (a > 0 makes the
// budget value monotone in nu).
Eigen::VectorXd project_budget(const Eigen::VectorXd& z, const Eigen::VectorXd& a,
                               double r, double lo, double hi) {
  auto val = [&](double nu) {
    double acc = 0.0;
    for (int e = 0; e < z.size(); ++e)
      acc += a[e] * std::clamp(z[e] + nu * a[e], lo, hi);
    return acc;
  };
  double step = 1.0 / std::max(a.lpNorm<Eigen::Infinity>(), 1e-300);
  double nlo = 0.0, nhi = 0.0;
  int guard = 0;
  while (val(nlo) > r) {
    nlo -= step;
    step *= 2.0;
    if (++guard > 200)
      throw std::runtime_error("projection: budget bracket failed (low)");
  }
  step = 1.0 / std::max(a.lpNorm<Eigen::Infinity>(), 1e-300);
  guard = 0;
  while (val(nhi) < r) {
    nhi += step;
    step *= 2.0;
    if (++guard > 200)
      throw std::runtime_error("projection: budget bracket failed (high)");
  }
  for (int it = 0; it < 300; ++it) {
    const double nu = 0.5 * (nlo + nhi);
    if (val(nu) < r)
      nlo = nu;
    else
      nhi = nu;
  }
  const double nu = 0.5 * (nlo + nhi);
  Eigen::VectorXd out(z.size());
  for (int e = 0; e < z.size(); ++e) out[e] = std::clamp(z[e] + nu * a[e], lo, hi);
  return out;
}

struct PgOutcome {
  Eigen::VectorXd delta;
  PgEval ev;
  int iters = 0;
  bool converged = false;
};

// Monotone projected-gradient ascent with BB steplengths and Armijo
// backtracking. Stagnation keeps the best (= current) iterate.
PgOutcome pg_stage(const InnerProblem& p, Eigen::VectorXd delta, double mu,
                   double pg_tol, int max_iters) {
  const Mesh& m = p.fe->mesh();
  const double lo = 1e-9, hi = 1.0 - 1e-9;
  const Eigen::VectorXd a = m.volume.cwiseProduct(p.w);
  const double r = p.set.budget * m.domain_measure;
  delta = project_budget(delta, a, r, lo, hi);
  PgEval ev = pg_evaluate(p, delta, mu);
  Eigen::VectorXd d_prev, g_prev;
  double gamma = 1.0 / std::max(1.0, ev.grad.lpNorm<Eigen::Infinity>());
  int stall = 0;
  int it = 0;
  bool conv = false;
  for (; it < max_iters; ++it) {
    const Eigen::VectorXd probe = project_budget(delta + ev.grad, a, r, lo, hi);
    if ((probe - delta).lpNorm<Eigen::Infinity>() <= pg_tol) {
      conv = true;
      break;
    }
    if (d_prev.size() > 0) {
      const Eigen::VectorXd dg = ev.grad - g_prev;
      const double den = -d_prev.dot(dg);  // > 0 where phi is locally concave
      gamma = den > 0.0
                  ? std::clamp(d_prev.squaredNorm() / den, 1e-12, 1e12)
                  : 1.0 / std::max(1.0, ev.grad.lpNorm<Eigen::Infinity>());
    }
    double step = gamma;
    bool accepted = false;
    for (int bt = 0; bt <= 40; ++bt) {
      Eigen::VectorXd cand = project_budget(delta + step * ev.grad, a, r, lo, hi);
      PgEval evc = pg_evaluate(p, cand, mu);
      if (evc.phi >= ev.phi + 1e-4 * ev.grad.dot(cand - delta)) {
        d_prev = cand - delta;
        g_prev = ev.grad;
        stall = (evc.phi - ev.phi <= 1e-13 * (1.0 + std::abs(ev.phi))) ? stall + 1 : 0;
        delta = std::move(cand);
        ev = std::move(evc);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || stall >= 5) break;  // ascent stagnation: keep best iterate
  }
  return {std::move(delta), std::move(ev), it, conv};
}

InnerSolution package_pg(const InnerProblem& p, const PgOutcome& out, double mu,
                         int iters_total) {
  const Mesh& m = p.fe->mesh();
  InnerSolution s;
  s.delta = out.delta;
  s.u = out.ev.u_full;
  const Eigen::VectorXd g_row = budget_grad_delta(p.set, m, p.w, out.delta).col(0);
  s.lambda = Eigen::VectorXd::Constant(
      1, -g_row.dot(out.ev.grad) / g_row.squaredNorm());
  s.compliance = out.ev.compliance;
  s.objective_mu = out.ev.phi;
  s.mu = mu;
  // Ascent stages report the projected-gradient criterion as stationarity.
  const Eigen::VectorXd a = m.volume.cwiseProduct(p.w);
  const Eigen::VectorXd probe = project_budget(
      out.delta + out.ev.grad, a, p.set.budget * m.domain_measure, 1e-9, 1.0 - 1e-9);
  s.kkt_stat = (probe - out.delta).lpNorm<Eigen::Infinity>();
  Eigen::VectorXd E;
  young_derivs(p.law, p.params, out.delta, &E, nullptr, nullptr);
  const double state_res =
      (p.fe->f_free() - apply_K_free(p, p.rho_pow.cwiseProduct(E), out.ev.u_full))
          .lpNorm<Eigen::Infinity>();
  s.kkt_feas = std::max(
      state_res, std::abs(budget_value(p.set, m, p.w, out.delta)[0]));
  s.newton_iterations = iters_total;
  s.converged = out.converged;
  s.near_boundary =
      std::min(out.delta.minCoeff(), 1.0 - out.delta.maxCoeff()) < 1e-9;
  return s;
}

std::vector<double> pg_mu_schedule(double mu_target) {
  std::vector<double> v;
  for (double mu : {1e-3, 1e-5})
    if (mu > mu_target * (1.0 + 1e-12)) v.push_back(mu);
  v.push_back(mu_target);
  return v;
}

// Full ascent run: barrier schedule of pg_stage calls from the given start.
InnerSolution pg_solve(const InnerProblem& stage, const BarrierOptions& cfg,
                       Eigen::VectorXd d0) {
  const double pg_tol = std::max(1e-8, cfg.tol);
  int total = 0;
  PgOutcome out;
  const std::vector<double> mus = pg_mu_schedule(cfg.mu_target);
  for (std::size_t j = 0; j < mus.size(); ++j) {
    const bool last = j + 1 == mus.size();
    out = pg_stage(stage, std::move(d0), mus[j],
                   last ? pg_tol : std::max(pg_tol, 1e-6), last ? 1200 : 400);
    d0 = out.delta;
    total += out.iters;
  }
  return package_pg(stage, out, mus.back(), total);
}

}  // namespace

void BarrierOptions::validate() const {
  if (!(mu_target > 0.0) || !(mu_target <= mu_init))
    throw std::invalid_argument("barrier: need 0 < mu_target <= mu_init");
  if (!(mu_factor > 0.0) || !(mu_factor < 1.0))
    throw std::invalid_argument("barrier: decrease factor must be in (0,1)");
  if (!(tau > 0.0) || !(tau < 1.0))
    throw std::invalid_argument("barrier: fraction-to-boundary must be in (0,1)");
  if (!(tol > 0.0) || !(constr_viol_tol > 0.0) || !(compl_inf_tol > 0.0))
    throw std::invalid_argument("barrier: tolerances must be positive");
  if (max_newton_per_stage < 1 || max_backtracks < 1)
    throw std::invalid_argument("barrier: iteration caps must be >= 1");
}

InnerProblem make_inner_problem(FeSystem& fe, const MaterialParams& params,
                                const MaterialLaw& law, const UncertaintySet& set,
                                Eigen::VectorXd rho_f, double tikhonov_eps) {
  params.validate();
  set.validate();
  if (law.kind == MaterialLaw::Kind::ramp && !(law.q >= 0.0))
    throw std::invalid_argument("inner problem: ramp curvature must be >= 0");
  if (!(tikhonov_eps >= 0.0))
    throw std::invalid_argument("inner problem: tikhonov_eps must be >= 0");
  const Mesh& m = fe.mesh();
  if (rho_f.size() != m.n_elem)
    throw std::invalid_argument("inner problem: rho_f size mismatch");
  if (!(rho_f.minCoeff() >= params.rho_min - 1e-9) ||
      !(rho_f.maxCoeff() <= 1.0 + 1e-9))
    throw std::invalid_argument("inner problem: rho_f outside [rho_min, 1]");
  InnerProblem p;
  p.fe = &fe;
  p.params = params;
  p.law = law;
  p.set = set;
  p.rho_f = std::move(rho_f);
  p.tikhonov_eps = tikhonov_eps;
  p.rho_pow = p.rho_f.array().pow(params.penal);
  p.w = budget_weights(set, p.rho_f, params.penal);
  return p;
}

KktResidual kkt_residual(const InnerProblem& p, const Eigen::VectorXd& delta,
                         const Eigen::VectorXd& u_full,
                         const Eigen::VectorXd& lambda, double mu) {
  const Mesh& m = p.fe->mesh();
  if (delta.size() != m.n_elem || u_full.size() != m.n_dof ||
      lambda.size() != p.set.n_constraints())
    throw std::invalid_argument("kkt_residual: size mismatch");
  if (!(delta.minCoeff() > 0.0) || !(delta.maxCoeff() < 1.0))
    throw std::domain_error("kkt_residual: delta must be strictly inside (0,1)");
  const int n = m.n_elem;
  Eigen::VectorXd E, dE;
  young_derivs(p.law, p.params, delta, &E, &dE, nullptr);
  Eigen::VectorXd energy(n), b1(n);
  kernels::element_energies(u_full.data(), m.conn.data(), n, p.fe->Khat().data(),
                            energy.data());
  kernels::barrier_terms(delta.data(), n, b1.data(), nullptr);
  const Eigen::MatrixXd G = budget_grad_delta(p.set, m, p.w, delta);
  KktResidual r;
  r.r_delta = (-(p.rho_pow.array() * dE.array() * energy.array())).matrix() +
              mu * b1 - p.tikhonov_eps * delta + G * lambda;
  const Eigen::VectorXd coeff = p.rho_pow.cwiseProduct(E);
  r.r_u = p.fe->to_full(p.fe->f_free() - apply_K_free(p, coeff, u_full));
  r.r_g = budget_value(p.set, m, p.w, delta);
  if (p.set.has_inequality()) r.r_g[1] = std::max(r.r_g[1], 0.0);
  return r;
}

NewtonStep newton_step(const InnerProblem& p, const Eigen::VectorXd& delta,
                       const Eigen::VectorXd& u_full, const Eigen::VectorXd& lambda,
                       double slack, double mu) {
  const Mesh& m = p.fe->mesh();
  if (delta.size() != m.n_elem || u_full.size() != m.n_dof ||
      lambda.size() != p.set.n_constraints())
    throw std::invalid_argument("newton_step: size mismatch");
  if (!(delta.minCoeff() > 0.0) || !(delta.maxCoeff() < 1.0))
    throw std::domain_error("newton_step: delta must be strictly inside (0,1)");
  if (p.set.has_inequality() && !(slack > 0.0))
    throw std::domain_error("newton_step: slack must be positive");
  Iterate x;
  x.delta = delta;
  x.u_full = u_full;
  x.u_free = p.fe->to_free(u_full);
  x.lambda = lambda;
  x.s = slack;
  const Eval ev = evaluate(p, x, mu);
  const Direction d = compute_step(p, x, ev, mu);
  return {d.d_delta, d.d_u_free, d.d_lambda, d.d_s};
}

InnerSolution solve_worst_case(const InnerProblem& p, const BarrierOptions& cfg,
                               const InnerSolution* warm) {
  cfg.validate();
  if (p.set.budget == 0.0) return degenerate_solution(p);
  if (warm != nullptr) {
    try {
      Iterate x = warm_start(p, *warm, cfg.mu_target);
      return run_path(p, std::move(x), cfg, {cfg.mu_target});
    } catch (const std::runtime_error&) {
      // warm stage failed; restart on the cold path below
    }
  }
  Iterate x = cold_start(p, cfg.mu_init);
  return run_path(p, std::move(x), cfg, mu_schedule(cfg));
}

InnerSolution solve_worst_case_tikhonov(const InnerProblem& p, double eps,
                                        BarrierOptions cfg) {
  if (!(eps > 0.0))
    throw std::invalid_argument("tikhonov solve: eps must be > 0");
  InnerProblem q = p;
  q.tikhonov_eps = eps;
  cfg.mu_target = std::min(cfg.mu_target, 1e-12);
  return solve_worst_case(q, cfg);
}

ConcavityProbe concavity_probe(const InnerProblem& p, const Eigen::VectorXd& delta,
                               const Eigen::VectorXd& u_full, int n_dirs,
                               unsigned seed) {
  const Mesh& m = p.fe->mesh();
  if (n_dirs < 1) throw std::invalid_argument("concavity probe: n_dirs must be >= 1");
  if (delta.size() != m.n_elem || u_full.size() != m.n_dof)
    throw std::invalid_argument("concavity probe: size mismatch");
  const int n = m.n_elem;
  Eigen::VectorXd E, dE, d2E;
  young_derivs(p.law, p.params, delta, &E, &dE, &d2E);
  const Eigen::VectorXd coeff = p.rho_pow.cwiseProduct(E);
  Eigen::VectorXd energy(n);
  kernels::element_energies(u_full.data(), m.conn.data(), n, p.fe->Khat().data(),
                            energy.data());
  const Eigen::ArrayXd Dbar =
      -(p.rho_pow.array() * d2E.array() * energy.array()) - p.tikhonov_eps;
  const Eigen::VectorXd sv = (-2.0 * p.rho_pow.array() * dE.array()).matrix();
  const bool harmonic = p.law.kind == MaterialLaw::Kind::inverse;
  const double b = 1.0 / p.params.ED - 1.0 / p.params.E0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ConcavityProbe out;
  out.max_form = -std::numeric_limits<double>::infinity();
  out.max_form_delta_only = -std::numeric_limits<double>::infinity();
  out.max_identity_rel_err = harmonic ? 0.0 : -1.0;
  for (int dir = 0; dir < n_dirs; ++dir) {
    Eigen::VectorXd xv(n), y_free(p.fe->n_free());
    for (int e = 0; e < n; ++e) xv[e] = gauss(rng);
    for (int i = 0; i < y_free.size(); ++i) y_free[i] = gauss(rng);
    out.max_form_delta_only = std::max(
        out.max_form_delta_only,
        (Dbar * xv.array().square()).sum() / xv.squaredNorm());
    const double scale =
        std::sqrt(xv.squaredNorm() + y_free.squaredNorm());
    xv /= scale;
    y_free /= scale;
    const Eigen::VectorXd y_full = p.fe->to_full(y_free);

    // direct evaluation from the Hessian blocks
    Eigen::VectorXd cross(n), y_energy(n);
    kernels::element_apply_dot(u_full.data(), y_full.data(), m.conn.data(), n,
                               p.fe->Khat().data(), cross.data());
    kernels::element_energies(y_full.data(), m.conn.data(), n,
                              p.fe->Khat().data(), y_energy.data());
    const double direct = (Dbar * xv.array().square()).sum() +
                          2.0 * (xv.array() * sv.array() * cross.array()).sum() -
                          2.0 * coeff.dot(y_energy);
    out.max_form = std::max(out.max_form, direct);

    if (harmonic) {
      // completed-square form: -2 sum rho^p E [y - v]'Khat[y - v] - eps|x|^2
      // with v_e = x_e b E_e u_loc
      double acc = 0.0;
      for (int e = 0; e < n; ++e) {
        Eigen::Matrix<double, 8, 1> u_loc, y_loc;
        for (int a = 0; a < 8; ++a) {
          u_loc[a] = u_full[m.conn[8 * e + a]];
          y_loc[a] = y_full[m.conn[8 * e + a]];
        }
        const Eigen::Matrix<double, 8, 1> z =
            y_loc - xv[e] * b * E[e] * u_loc;
        acc -= 2.0 * coeff[e] * z.dot(p.fe->Khat() * z);
      }
      acc -= p.tikhonov_eps * xv.squaredNorm();
      const double rel = std::abs(direct - acc) /
                         std::max({std::abs(direct), std::abs(acc), 1e-30});
      out.max_identity_rel_err = std::max(out.max_identity_rel_err, rel);
    }
  }
  return out;
}

ContinuationResult ramp_continuation(const InnerProblem& p, int steps,
                                     const BarrierOptions& cfg) {
  cfg.validate();
  if (steps < 2)
    throw std::invalid_argument("continuation: steps must be >= 2");
  if (p.set.has_inequality())
    throw std::invalid_argument("continuation: equality-budget sets only");
  const double q_max = ramp_concavity_bound(p.params);
  ContinuationResult res;
  for (int i = 0; i < steps; ++i) {
    const double q = q_max * (1.0 - double(i) / (steps - 1));
    InnerProblem stage = p;
    stage.law = MaterialLaw::ramp(q);
    InnerSolution sol;
    if (p.set.budget == 0.0) {
      sol = degenerate_solution(stage);
    } else if (ramp_is_concave(q, p.params)) {
      const InnerSolution* warm =
          res.stages.empty() ? nullptr : &res.stages.back();
      sol = solve_worst_case(stage, cfg, warm);
    } else {
      Eigen::VectorXd d0 =
          res.stages.empty()
              ? canonical_start(p.set, p.fe->mesh(), p.w)
              : res.stages.back().delta.cwiseMax(1e-9).cwiseMin(1.0 - 1e-9).eval();
      sol = pg_solve(stage, cfg, std::move(d0));
    }
    res.q_values.push_back(q);
    res.stages.push_back(std::move(sol));
  }
  res.upper_bound = res.stages.front().compliance;
  res.lower_bound = res.stages.back().compliance;
  return res;
}

InnerSolution solve_worst_case_linear(const InnerProblem& p,
                                      const BarrierOptions& cfg) {
  cfg.validate();
  if (p.set.has_inequality())
    throw std::invalid_argument("linear adversary: equality-budget sets only");
  InnerProblem stage = p;
  stage.law = MaterialLaw::ramp(0.0);
  if (p.set.budget == 0.0) return degenerate_solution(stage);
  return pg_solve(stage, cfg, canonical_start(p.set, p.fe->mesh(), p.w));
}

}  // namespace wcto
