#include "wcto/robust_opt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "wcto/kernels.hpp"

namespace wcto {

double volume_fraction_of(const Mesh& m, const Eigen::VectorXd& rho) {
  if (rho.size() != m.n_elem)
    throw std::invalid_argument("volume fraction: design size mismatch");
  return m.volume.dot(rho) / m.domain_measure;
}

void DesignField::validate(const Mesh& m) const {
  if (rho.size() != m.n_elem || rho_f.size() != m.n_elem)
    throw std::invalid_argument("design field: size mismatch");
  if (!(rho.minCoeff() >= rho_min - 1e-12) || !(rho.maxCoeff() <= 1.0 + 1e-12))
    throw std::invalid_argument("design field: rho outside [rho_min, 1]");
  if (volume_fraction_of(m, rho) > volume_fraction + 1e-9)
    throw std::invalid_argument("design field: volume bound violated");
}

Eigen::VectorXd mma_step(MmaState& st, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& grad_f, double g,
                         const Eigen::VectorXd& grad_g, double xmin, double xmax) {
  const int n = int(x.size());
  if (n < 1 || grad_f.size() != n || grad_g.size() != n)
    throw std::invalid_argument("mma: size mismatch");
  if (!(xmax > xmin)) throw std::invalid_argument("mma: need xmin < xmax");
  if (!x.allFinite() || !grad_f.allFinite() || !grad_g.allFinite() ||
      !std::isfinite(g))
    throw std::invalid_argument("mma: nonfinite input");
  if (!(st.move > 0.0) || !(st.move <= 1.0))
    throw std::invalid_argument("mma: move limit must be in (0, 1]");
  if (st.iter >= 1 && st.xold1.size() != n)
    throw std::invalid_argument("mma: state size mismatch");
  const double range = xmax - xmin;

  // Asymptotes: 0.5x range on the first two steps, then per-variable
  // adaptation on the sign of successive moves, clamped to sane offsets.
  Eigen::VectorXd low(n), upp(n);
  if (st.iter < 2) {
    low = x.array() - 0.5 * range;
    upp = x.array() + 0.5 * range;
  } else {
    for (int e = 0; e < n; ++e) {
      const double osc = (x[e] - st.xold1[e]) * (st.xold1[e] - st.xold2[e]);
      const double fac = osc > 0.0 ? 1.2 : (osc < 0.0 ? 0.7 : 1.0);
      low[e] = std::clamp(x[e] - fac * (st.xold1[e] - st.low[e]),
                          x[e] - 10.0 * range, x[e] - 0.01 * range);
      upp[e] = std::clamp(x[e] + fac * (st.upp[e] - st.xold1[e]),
                          x[e] + 0.01 * range, x[e] + 10.0 * range);
    }
  }

  // Subproblem box: inside the asymptotes and the move limit.
  Eigen::VectorXd alfa(n), beta(n);
  for (int e = 0; e < n; ++e) {
    alfa[e] = std::max({xmin, low[e] + 0.1 * (x[e] - low[e]), x[e] - st.move * range});
    beta[e] = std::min({xmax, upp[e] - 0.1 * (upp[e] - x[e]), x[e] + st.move * range});
  }

  // Separable rational coefficients. The 0.001 and tiny terms keep both
  // sides strictly positive (strict convexity) without changing the
  // gradient at x: they cancel exactly in p/ux^2 - q/xl^2.
  const double tiny = 1e-5 / std::max(range, 1e-5);
  Eigen::VectorXd p0(n), q0(n), P(n), Q(n);
  for (int e = 0; e < n; ++e) {
    const double ux2 = (upp[e] - x[e]) * (upp[e] - x[e]);
    const double xl2 = (x[e] - low[e]) * (x[e] - low[e]);
    const double fp = std::max(grad_f[e], 0.0), fm = std::max(-grad_f[e], 0.0);
    const double gp = std::max(grad_g[e], 0.0), gm = std::max(-grad_g[e], 0.0);
    p0[e] = ux2 * (1.001 * fp + 0.001 * fm + tiny);
    q0[e] = xl2 * (0.001 * fp + 1.001 * fm + tiny);
    P[e] = ux2 * (1.001 * gp + 0.001 * gm + tiny);
    Q[e] = xl2 * (0.001 * gp + 1.001 * gm + tiny);
  }

  // Right-hand side making the approximated constraint equal g at x.
  double b = -g;
  for (int e = 0; e < n; ++e)
    b += P[e] / (upp[e] - x[e]) + Q[e] / (x[e] - low[e]);

  // Elementwise minimizer of the eta-Lagrangian, clipped to the box.
  Eigen::VectorXd xs(n);
  auto primal = [&](double eta) -> const Eigen::VectorXd& {
    for (int e = 0; e < n; ++e) {
      const double sp = std::sqrt(p0[e] + eta * P[e]);
      const double sq = std::sqrt(q0[e] + eta * Q[e]);
      xs[e] = std::clamp((low[e] * sp + upp[e] * sq) / (sp + sq), alfa[e], beta[e]);
    }
    return xs;
  };
  auto constraint_excess = [&](double eta) {
    const Eigen::VectorXd& y = primal(eta);
    double w = -b;
    for (int e = 0; e < n; ++e)
      w += P[e] / (upp[e] - y[e]) + Q[e] / (y[e] - low[e]);
    return w;  // positive: multiplier still too small
  };

  // Dual solve: excess is nonincreasing in eta, so bracket by doubling and
  // bisect. eta = 0 wins whenever the constraint is slack at the minimizer.
  double eta = 0.0;
  if (constraint_excess(0.0) > 0.0) {
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (constraint_excess(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++guard > 80)
        throw std::runtime_error("mma: dual bracket failed (subproblem infeasible)");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (constraint_excess(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    eta = hi;  // feasible side of the bracket
  }
  Eigen::VectorXd next = primal(eta);

  st.xold2 = st.iter >= 1 ? st.xold1 : x;
  st.xold1 = x;
  st.low = std::move(low);
  st.upp = std::move(upp);
  ++st.iter;
  return next;
}

namespace {

// Element strain energies u_loc' Khat u_loc for a full displacement vector.
Eigen::VectorXd element_energy(const FeSystem& fe, const Eigen::VectorXd& u_full) {
  const Mesh& m = fe.mesh();
  Eigen::VectorXd energy(m.n_elem);
  kernels::element_energies(u_full.data(), m.conn.data(), m.n_elem,
                            fe.Khat().data(), energy.data());
  return energy;
}

// Classical compliance sensitivity w.r.t. filtered densities at modulus E.
Eigen::VectorXd simp_grad_filtered(const Eigen::VectorXd& rho_f,
                                   const Eigen::VectorXd& E, double penal,
                                   const Eigen::VectorXd& energy) {
  return (-penal * rho_f.array().pow(penal - 1.0) * E.array() * energy.array())
      .matrix();
}

}  // namespace

DesignField nominal_solve(FeSystem& fe, const DensityFilter& filter,
                          const MaterialParams& mp, double volume_fraction,
                          const OuterOptions& opt) {
  mp.validate();
  if (!(volume_fraction > 0.0) || !(volume_fraction <= 1.0))
    throw std::invalid_argument("nominal solve: V must be in (0, 1]");
  if (!(volume_fraction >= mp.rho_min))
    throw std::invalid_argument("nominal solve: V below rho_min is infeasible");
  if (opt.max_iter < 1 || !(opt.change_tol > 0.0))
    throw std::invalid_argument("nominal solve: bad outer options");
  const Mesh& m = fe.mesh();
  if (filter.size() != m.n_elem)
    throw std::invalid_argument("nominal solve: filter size mismatch");

  Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_elem, volume_fraction);
  const Eigen::VectorXd grad_g = m.volume / m.domain_measure;
  MmaState st;
  st.move = opt.move;
  for (int k = 1; k <= opt.max_iter; ++k) {
    const Eigen::VectorXd rho_f = filter.apply(rho);
    const StateSolution sol =
        fe.solve_state((rho_f.array().pow(mp.penal) * mp.E0).matrix());
    const Eigen::VectorXd energy = element_energy(fe, sol.u);
    const Eigen::VectorXd grad = filter.chain_transpose(simp_grad_filtered(
        rho_f, Eigen::VectorXd::Constant(m.n_elem, mp.E0), mp.penal, energy));
    const double g = volume_fraction_of(m, rho) - volume_fraction;
    Eigen::VectorXd next = mma_step(st, rho, grad, g, grad_g, mp.rho_min, 1.0);
    const double change = (next - rho).lpNorm<Eigen::Infinity>();
    rho = std::move(next);
    if (change < opt.change_tol) break;
  }
  DesignField d;
  d.rho_f = filter.apply(rho);
  d.rho = std::move(rho);
  d.rho_min = mp.rho_min;
  d.volume_fraction = volume_fraction;
  return d;
}

Eigen::VectorXd marginal_gradient(const InnerProblem& p,
                                  const DensityFilter& filter,
                                  const InnerSolution& inner) {
  const Mesh& m = p.fe->mesh();
  if (inner.delta.size() != m.n_elem || inner.u.size() != m.n_dof)
    throw std::invalid_argument("marginal gradient: solution size mismatch");
  if (filter.size() != m.n_elem)
    throw std::invalid_argument("marginal gradient: filter size mismatch");
  const Eigen::VectorXd energy = element_energy(*p.fe, inner.u);
  Eigen::VectorXd E;
  young_derivs(p.law, p.params, inner.delta, &E, nullptr, nullptr);
  Eigen::VectorXd grad_f =
      simp_grad_filtered(p.rho_f, E, p.params.penal, energy);
  if (!inner.degenerate_budget) {
    // The formula is the envelope derivative at the maximizer; it is only
    // valid when the handed-in solution actually solves its inner problem.
    const KktResidual r =
        kkt_residual(p, inner.delta, inner.u, inner.lambda, inner.mu);
    const double stat = r.r_delta.lpNorm<Eigen::Infinity>();
    double feas = std::max(r.r_u.lpNorm<Eigen::Infinity>(), std::abs(r.r_g[0]));
    if (p.set.has_inequality()) feas = std::max(feas, std::max(r.r_g[1], 0.0));
    if (stat > 1e-6 || feas > 1e-6)
      throw std::invalid_argument(
          "marginal gradient: stale inner solution (kkt stat " +
          std::to_string(stat) + ", feas " + std::to_string(feas) + ")");
    grad_f += budget_grad_rho(p.set, m, p.rho_f, p.params.penal, inner.delta) *
              inner.lambda;
  }
  return filter.chain_transpose(grad_f);
}

std::vector<ReportRow> evaluate_report(FeSystem& fe, const DensityFilter& filter,
                                       const MaterialParams& mp,
                                       const Eigen::VectorXd& rho_nominal,
                                       const Eigen::VectorXd& rho_robust,
                                       const std::vector<UncertaintySet>& sets,
                                       const ReportOptions& opt) {
  mp.validate();
  opt.barrier.validate();
  const Mesh& m = fe.mesh();
  if (rho_nominal.size() != m.n_elem || rho_robust.size() != m.n_elem)
    throw std::invalid_argument("report: design size mismatch");
  const MaterialLaw law = MaterialLaw::inverse();
  const Eigen::VectorXd rho_f_nom = filter.apply(rho_nominal);
  const Eigen::VectorXd rho_f_rob = filter.apply(rho_robust);
  std::vector<ReportRow> rows;
  rows.reserve(sets.size());
  for (const UncertaintySet& set : sets) {
    // Reference material: pristine, or the anchor mean for dispersion sets.
    const double dref =
        set.kind == UncertaintySet::Kind::avg_quad ? set.anchor : 0.0;
    const Eigen::VectorXd delta_ref = Eigen::VectorXd::Constant(m.n_elem, dref);
    const double c_ref_nom =
        fe.solve_state(effective_modulus(rho_f_nom, delta_ref, law, mp)).compliance;
    const double c_ref_rob =
        fe.solve_state(effective_modulus(rho_f_rob, delta_ref, law, mp)).compliance;
    InnerProblem p_nom =
        make_inner_problem(fe, mp, law, set, rho_f_nom, opt.tikhonov_eps);
    const double c_wc_nom = solve_worst_case(p_nom, opt.barrier).compliance;
    InnerProblem p_rob =
        make_inner_problem(fe, mp, law, set, rho_f_rob, opt.tikhonov_eps);
    const double c_wc_rob = solve_worst_case(p_rob, opt.barrier).compliance;

    ReportRow row;
    row.budget = set.budget;
    row.compliance_reference = c_ref_nom;
    auto pct = [&](double c) { return 100.0 * (c / c_ref_nom - 1.0); };
    row.wc_topo_reference_delta = pct(c_ref_rob);
    row.nom_topo_worst_delta = pct(c_wc_nom);
    row.wc_topo_worst_delta = pct(c_wc_rob);
    if (opt.continuation_steps != 0) {
      const ContinuationResult cont =
          ramp_continuation(p_rob, opt.continuation_steps, opt.barrier);
      row.has_continuation = true;
      row.contin = pct(cont.lower_bound);
      row.inverse = pct(cont.upper_bound);
      row.direct = pct(solve_worst_case_linear(p_rob, opt.barrier).compliance);
    }
    rows.push_back(row);
  }
  return rows;
}

RunResult optimize(const RunConfig& cfg, const OuterCallback& on_iterate) {
  cfg.validate();
  RunResult res;
  FeSystem fe = [&] {
    try {
      return cfg.make_system();
    } catch (const std::exception& ex) {
      throw std::runtime_error(std::string("setup: ") + ex.what());
    }
  }();
  const Mesh& m = fe.mesh();
  const MaterialParams mp = cfg.material();
  const DensityFilter filter(m, cfg.R);
  const MaterialLaw law = MaterialLaw::inverse();
  const OuterOptions outer{cfg.max_iter, cfg.change_tol, cfg.move_limit};

  try {
    res.nominal = nominal_solve(fe, filter, mp, cfg.V, outer);
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::string("nominal solve: ") + ex.what());
  }
  res.nominal_compliance =
      fe.solve_state((res.nominal.rho_f.array().pow(mp.penal) * mp.E0).matrix())
          .compliance;

  Eigen::VectorXd rho = res.nominal.rho;
  const Eigen::VectorXd grad_g = m.volume / m.domain_measure;
  MmaState st;
  st.move = cfg.move_limit;
  InnerSolution warm;
  bool have_warm = false;
  auto make_field = [&](const Eigen::VectorXd& r) {
    DesignField d;
    d.rho = r;
    d.rho_f = filter.apply(r);
    d.rho_min = mp.rho_min;
    d.volume_fraction = cfg.V;
    return d;
  };

  int k = 1;
  try {
    for (; k <= cfg.max_iter; ++k) {
      const Eigen::VectorXd rho_f = filter.apply(rho);
      InnerProblem p =
          make_inner_problem(fe, mp, law, cfg.set, rho_f, cfg.tikhonov_eps);
      InnerSolution inner =
          solve_worst_case(p, cfg.barrier, have_warm ? &warm : nullptr);
      if (inner.degenerate_budget) {
        // Empty adversary: the nominal design already solves the problem.
        const OuterRecord rec{k, inner.compliance, volume_fraction_of(m, rho),
                              0.0, 0};
        res.history.push_back(rec);
        if (on_iterate) on_iterate(rec, make_field(rho));
        break;
      }
      const Eigen::VectorXd grad = marginal_gradient(p, filter, inner);
      const double g = volume_fraction_of(m, rho) - cfg.V;
      Eigen::VectorXd next =
          mma_step(st, rho, grad, g, grad_g, mp.rho_min, 1.0);
      const double change = (next - rho).lpNorm<Eigen::Infinity>();
      const OuterRecord rec{k, inner.compliance, volume_fraction_of(m, rho),
                            change, inner.newton_iterations};
      res.history.push_back(rec);
      rho = std::move(next);
      warm = std::move(inner);
      have_warm = true;
      if (on_iterate) on_iterate(rec, make_field(rho));
      if (change < cfg.change_tol) break;
    }
  } catch (const std::exception& ex) {
    throw std::runtime_error("robust loop iteration " + std::to_string(k) +
                             ": " + ex.what());
  }
  res.robust = make_field(rho);

  try {
    InnerProblem p_final = make_inner_problem(fe, mp, law, cfg.set,
                                              res.robust.rho_f, cfg.tikhonov_eps);
    res.worst = solve_worst_case(p_final, cfg.barrier);
    res.report = evaluate_report(
        fe, filter, mp, res.nominal.rho, res.robust.rho, {cfg.set},
        ReportOptions{cfg.barrier, cfg.continuation_steps, cfg.tikhonov_eps});
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::string("report: ") + ex.what());
  }
  return res;
}

}  // namespace wcto
