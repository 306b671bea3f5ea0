#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "wcto/adversary.hpp"
#include "wcto/config.hpp"
#include "wcto/element.hpp"
#include "wcto/fe_system.hpp"
#include "wcto/filter.hpp"
#include "wcto/material.hpp"
#include "wcto/mesh.hpp"
#include "wcto/robust_opt.hpp"
#include "wcto/uncertainty.hpp"

using namespace wcto;

namespace {

FeSystem make_cantilever(int nx, int ny, double w, double h,
                         const MaterialParams& mp, double load_frac = 0.8) {
  Mesh m = build_mesh(nx, ny, w, h);
  Matrix8d K = element_stiffness(m.dx, m.dy, mp.nu);
  LoadCase lc = cantilever_load_case(m, load_frac * w, w, 0.3, LoadDir::minus_y);
  return FeSystem(std::move(m), K, std::move(lc));
}

UncertaintySet linear_set(double D) {
  UncertaintySet s;
  s.kind = UncertaintySet::Kind::linear;
  s.budget = D;
  return s;
}

UncertaintySet rho_set(double D) {
  UncertaintySet s;
  s.kind = UncertaintySet::Kind::rho_weighted;
  s.budget = D;
  return s;
}

UncertaintySet avg_set(double D1, double D2, double m) {
  UncertaintySet s;
  s.kind = UncertaintySet::Kind::avg_quad;
  s.budget = D1;
  s.dispersion = D2;
  s.anchor = m;
  return s;
}

// Interior random design, safely away from the box for FD probes.
Eigen::VectorXd interior_rho(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.3, 0.9);
  Eigen::VectorXd rho(n);
  for (int e = 0; e < n; ++e) rho[e] = unif(rng);
  return rho;
}

// Element energies recomputed independently of the kernels helpers.
Eigen::VectorXd dense_energies(const FeSystem& fe, const Eigen::VectorXd& u) {
  const Mesh& m = fe.mesh();
  Eigen::VectorXd en(m.n_elem);
  for (int e = 0; e < m.n_elem; ++e) {
    Eigen::Matrix<double, 8, 1> ul;
    for (int a = 0; a < 8; ++a) ul[a] = u[m.conn[8 * e + a]];
    en[e] = ul.dot(fe.Khat() * ul);
  }
  return en;
}

RunConfig desk_config(int nx, int ny, const UncertaintySet& set) {
  RunConfig cfg;
  cfg.nx = nx;
  cfg.ny = ny;
  cfg.load_x0 = 1.6;
  cfg.load_x1 = 2.0;
  cfg.R = 1.8 * cfg.width / nx;
  cfg.set = set;
  return cfg;
}

}  // namespace

// ---- MMA subproblem --------------------------------------------------------

TEST_CASE("mma step is stationary at zero gradient") {
  const int n = 7;
  Eigen::VectorXd x(n);
  x << 0.3, 0.5, 0.9, 0.011, 0.99, 0.42, 0.7;
  MmaState st;
  const Eigen::VectorXd g0 = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd dg = Eigen::VectorXd::Constant(n, 1.0 / n);
  // volume slack: g < 0
  const Eigen::VectorXd next = mma_step(st, x, g0, -0.1, dg, 0.01, 1.0);
  CHECK((next - x).lpNorm<Eigen::Infinity>() <= 1e-13);
  CHECK(st.iter == 1);
  CHECK(st.xold1.isApprox(x));
}

TEST_CASE("mma step rides the move limit when volume is slack") {
  const int n = 5;
  const double xmin = 0.01, xmax = 1.0, range = xmax - xmin;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 0.5);
  MmaState st;
  const Eigen::VectorXd grad_f = Eigen::VectorXd::Constant(n, -1.0);
  const Eigen::VectorXd grad_g = Eigen::VectorXd::Constant(n, 1.0 / n);
  const Eigen::VectorXd next = mma_step(st, x, grad_f, -10.0, grad_g, xmin, xmax);
  for (int e = 0; e < n; ++e) CHECK(next[e] == doctest::Approx(0.5 + st.move * range).epsilon(1e-14));
}

TEST_CASE("mma dual matches a golden-section maximization of the dual function") {
  // Asymmetric 3-variable subproblem with an active constraint. The oracle
  // reconstructs the same separable coefficients, then maximizes the dual
  // function by golden section instead of root-finding on the primal
  // constraint, and compares the resulting designs.
  const int n = 3;
  const double xmin = 0.01, xmax = 1.0, range = xmax - xmin;
  Eigen::VectorXd x(n), grad_f(n), grad_g(n);
  x << 0.35, 0.6, 0.8;
  grad_f << -2.0, -0.5, -1.2;
  grad_g << 0.2, 0.5, 0.3;
  const double g = 0.0;  // active volume
  MmaState st;
  st.move = 0.2;
  const Eigen::VectorXd got = mma_step(st, x, grad_f, g, grad_g, xmin, xmax);

  // Rebuild the subproblem data exactly as documented.
  Eigen::VectorXd low = x.array() - 0.5 * range, upp = x.array() + 0.5 * range;
  Eigen::VectorXd alfa(n), beta(n), p0(n), q0(n), P(n), Q(n);
  const double tiny = 1e-5 / std::max(range, 1e-5);
  for (int e = 0; e < n; ++e) {
    alfa[e] = std::max({xmin, low[e] + 0.1 * (x[e] - low[e]), x[e] - 0.2 * range});
    beta[e] = std::min({xmax, upp[e] - 0.1 * (upp[e] - x[e]), x[e] + 0.2 * range});
    const double ux2 = (upp[e] - x[e]) * (upp[e] - x[e]);
    const double xl2 = (x[e] - low[e]) * (x[e] - low[e]);
    const double fp = std::max(grad_f[e], 0.0), fm = std::max(-grad_f[e], 0.0);
    const double gp = std::max(grad_g[e], 0.0), gm = std::max(-grad_g[e], 0.0);
    p0[e] = ux2 * (1.001 * fp + 0.001 * fm + tiny);
    q0[e] = xl2 * (0.001 * fp + 1.001 * fm + tiny);
    P[e] = ux2 * (1.001 * gp + 0.001 * gm + tiny);
    Q[e] = xl2 * (0.001 * gp + 1.001 * gm + tiny);
  }
  double b = -g;
  for (int e = 0; e < n; ++e) b += P[e] / (upp[e] - x[e]) + Q[e] / (x[e] - low[e]);
  auto primal = [&](double eta) {
    Eigen::VectorXd y(n);
    for (int e = 0; e < n; ++e) {
      const double sp = std::sqrt(p0[e] + eta * P[e]);
      const double sq = std::sqrt(q0[e] + eta * Q[e]);
      y[e] = std::clamp((low[e] * sp + upp[e] * sq) / (sp + sq), alfa[e], beta[e]);
    }
    return y;
  };
  auto dual_value = [&](double eta) {
    const Eigen::VectorXd y = primal(eta);
    double v = -eta * b;
    for (int e = 0; e < n; ++e)
      v += (p0[e] + eta * P[e]) / (upp[e] - y[e]) + (q0[e] + eta * Q[e]) / (y[e] - low[e]);
    return v;
  };
  // Golden-section maximization of the concave dual on a doubling bracket.
  double hi = 1.0;
  while (dual_value(2.0 * hi) > dual_value(hi)) hi *= 2.0;
  double a = 0.0, c = 2.0 * hi;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double u1 = c - gr * (c - a), u2 = a + gr * (c - a);
  double f1 = dual_value(u1), f2 = dual_value(u2);
  for (int it = 0; it < 300; ++it) {
    if (f1 < f2) {
      a = u1;
      u1 = u2;
      f1 = f2;
      u2 = a + gr * (c - a);
      f2 = dual_value(u2);
    } else {
      c = u2;
      u2 = u1;
      f2 = f1;
      u1 = c - gr * (c - a);
      f1 = dual_value(u1);
    }
  }
  const Eigen::VectorXd want = primal(0.5 * (a + c));
  REQUIRE(dual_value(0.0) < dual_value(0.5 * (a + c)));  // constraint truly active
  // Golden section locates a smooth maximum only to ~sqrt(eps).
  CHECK((got - want).lpNorm<Eigen::Infinity>() <= 1e-7);
  // Complementarity at an active constraint is machine-exact: W(got) = b.
  double W = 0.0;
  for (int e = 0; e < n; ++e)
    W += P[e] / (upp[e] - got[e]) + Q[e] / (got[e] - low[e]);
  CHECK(std::abs(W - b) <= 1e-12 * std::abs(b));
}

TEST_CASE("mma active-volume update matches the symmetric closed form") {
  // Two identical variables pushed upward with a slightly slack constraint:
  // the subproblem solution is symmetric and interior, so the binding
  // constraint W(y) = b reduces to one quadratic in y.
  const int n = 2;
  const double xmin = 0.0, xmax = 1.0;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 0.5);
  Eigen::VectorXd grad_f = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd grad_g = Eigen::VectorXd::Constant(n, 1.0);
  const double g = -0.05;
  MmaState st;
  const Eigen::VectorXd got = mma_step(st, x, grad_f, g, grad_g, xmin, xmax);

  const double low = 0.0, upp = 1.0;  // x +- 0.5 * range
  const double tiny = 1e-5;
  const double ux2 = 0.25, xl2 = 0.25;
  const double P = ux2 * (1.001 * 1.0 + tiny), Q = xl2 * (0.001 * 1.0 + tiny);
  const double b = -g + n * (P / 0.5 + Q / 0.5);
  // W(y) = n [P/(upp-y) + Q/(y-low)] = b, quadratic a2 y^2 + a1 y + a0 = 0.
  const double a2 = b;
  const double a1 = -b * (low + upp) + double(n) * (P - Q);
  const double a0 = b * low * upp + double(n) * (Q * upp - P * low);
  const double disc = a1 * a1 - 4.0 * a2 * a0;
  REQUIRE(disc > 0.0);
  // Root on the ascending branch between x and upp.
  const double y1 = (-a1 + std::sqrt(disc)) / (2.0 * a2);
  const double y2 = (-a1 - std::sqrt(disc)) / (2.0 * a2);
  const double want = (y1 > 0.5 && y1 < upp) ? y1 : y2;
  REQUIRE(want > 0.5);
  REQUIRE(want < 0.7);  // inside the move limit, no clipping
  for (int e = 0; e < n; ++e) CHECK(got[e] == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("mma asymptote adaptation follows the oscillation rule") {
  const int n = 2;
  const double range = 0.99;
  Eigen::VectorXd x(n), xold1(n), xold2(n);
  x << 0.5, 0.42;
  xold1 << 0.55, 0.45;  // e=0 reversed direction, e=1 monotone decrease
  xold2 << 0.5, 0.5;
  MmaState st;
  st.iter = 2;
  st.xold1 = xold1;
  st.xold2 = xold2;
  st.low = xold1.array() - 0.5 * range;
  st.upp = xold1.array() + 0.5 * range;
  const Eigen::VectorXd low_old = st.low, upp_old = st.upp;
  mma_step(st, x, Eigen::VectorXd::Zero(n), -0.1,
           Eigen::VectorXd::Constant(n, 0.5), 0.01, 1.0);
  // (x - xold1)(xold1 - xold2): e=0 negative -> shrink 0.7, e=1 positive -> grow 1.2
  CHECK(st.low[0] == doctest::Approx(x[0] - 0.7 * (xold1[0] - low_old[0])).epsilon(1e-14));
  CHECK(st.upp[0] == doctest::Approx(x[0] + 0.7 * (upp_old[0] - xold1[0])).epsilon(1e-14));
  CHECK(st.low[1] == doctest::Approx(x[1] - 1.2 * (xold1[1] - low_old[1])).epsilon(1e-14));
  CHECK(st.upp[1] == doctest::Approx(x[1] + 1.2 * (upp_old[1] - xold1[1])).epsilon(1e-14));
  // Asymptotes strictly bracket the iterate they were built at.
  CHECK((st.low.array() < x.array()).all());
  CHECK((st.upp.array() > x.array()).all());
}

TEST_CASE("mma loop converges to the exact optimum of a separable convex program") {
  // min sum c_e / x_e  s.t. mean(x) <= V on [0.01, 1]^n. KKT gives
  // x_e ~ sqrt(c_e) scaled onto the active volume.
  const int n = 4;
  Eigen::VectorXd c(n);
  c << 1.0, 4.0, 2.25, 0.25;
  const double V = 0.55;
  const Eigen::VectorXd sqrtc = c.cwiseSqrt();
  Eigen::VectorXd want = V * double(n) * sqrtc / sqrtc.sum();
  REQUIRE(want.minCoeff() > 0.01);
  REQUIRE(want.maxCoeff() < 1.0);

  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, V);
  const Eigen::VectorXd grad_g = Eigen::VectorXd::Constant(n, 1.0 / n);
  MmaState st;
  for (int k = 0; k < 400; ++k) {
    const Eigen::VectorXd grad_f = (-c.array() / x.array().square()).matrix();
    const double g = x.mean() - V;
    const Eigen::VectorXd next = mma_step(st, x, grad_f, g, grad_g, 0.01, 1.0);
    const double change = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    if (change < 1e-12) break;
  }
  CHECK((x - want).lpNorm<Eigen::Infinity>() <= 1e-7);
  CHECK(x.mean() == doctest::Approx(V).epsilon(1e-9));
}

TEST_CASE("mma rejects malformed input") {
  MmaState st;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::VectorXd g3 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(mma_step(st, x, Eigen::VectorXd::Zero(2), 0.0, g3, 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(mma_step(st, x, g3, 0.0, g3, 1.0, 0.0), std::invalid_argument);
  Eigen::VectorXd bad = g3;
  bad[1] = std::nan("");
  CHECK_THROWS_AS(mma_step(st, x, bad, 0.0, g3, 0.0, 1.0), std::invalid_argument);
  MmaState badmove;
  badmove.move = 0.0;
  CHECK_THROWS_AS(mma_step(badmove, x, g3, 0.0, g3, 0.0, 1.0), std::invalid_argument);
}

// ---- nominal solve ---------------------------------------------------------

TEST_CASE("nominal solve returns the solid design at full volume") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(8, 4, 2.0, 1.0, mp);
  const DensityFilter filter(fe.mesh(), 0.5);
  const DesignField d = nominal_solve(fe, filter, mp, 1.0, {});
  CHECK((d.rho.array() == 1.0).all());
  d.validate(fe.mesh());
}

TEST_CASE("nominal solve beats the uniform design and rides the volume bound") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(60, 30, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const double V = 0.5;
  const DesignField d = nominal_solve(fe, filter, mp, V, {});
  d.validate(m);

  auto compliance_of = [&](const Eigen::VectorXd& rho) {
    const Eigen::VectorXd rf = filter.apply(rho);
    return fe.solve_state((rf.array().pow(mp.penal) * mp.E0).matrix()).compliance;
  };
  const double c_opt = compliance_of(d.rho);
  const double c_uniform = compliance_of(Eigen::VectorXd::Constant(m.n_elem, V));
  CHECK(c_opt < c_uniform);
  // Scarce material: the volume bound is active at convergence.
  CHECK(volume_fraction_of(m, d.rho) == doctest::Approx(V).epsilon(2e-6));
}

// ---- marginal gradient -----------------------------------------------------

TEST_CASE("marginal gradient reduces to the compliance sensitivity at zero budget") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(6, 3, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd rho = interior_rho(m.n_elem, 11);
  const Eigen::VectorXd rho_f = filter.apply(rho);
  InnerProblem p = make_inner_problem(fe, mp, MaterialLaw::inverse(),
                                      linear_set(0.0), rho_f);
  const InnerSolution sol = solve_worst_case(p, {});
  REQUIRE(sol.degenerate_budget);
  const Eigen::VectorXd got = marginal_gradient(p, filter, sol);

  const Eigen::VectorXd en = dense_energies(fe, sol.u);
  const Eigen::VectorXd classical = filter.chain_transpose(
      (-mp.penal * mp.E0 * rho_f.array().pow(mp.penal - 1.0) * en.array()).matrix());
  // Slack for the different energy summation orders (simd vs dense loop).
  CHECK((got - classical).lpNorm<Eigen::Infinity>() <=
        1e-12 * classical.lpNorm<Eigen::Infinity>());
}

TEST_CASE("marginal gradient is nonpositive for the plain linear set") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(6, 3, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd rho_f = filter.apply(interior_rho(m.n_elem, 3));
  InnerProblem p = make_inner_problem(fe, mp, MaterialLaw::inverse(),
                                      linear_set(0.1), rho_f);
  const InnerSolution sol = solve_worst_case(p, {});
  REQUIRE(sol.converged);
  const Eigen::VectorXd grad = marginal_gradient(p, filter, sol);
  CHECK(grad.maxCoeff() <= 0.0);
}

TEST_CASE("marginal gradient matches central differences of the re-solved inner problem") {
  // The single most important correctness property: the envelope formula
  // against full re-solves of the worst case at rho +- h e_k.
  MaterialParams mp;
  FeSystem fe = make_cantilever(12, 6, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd rho = interior_rho(m.n_elem, 29);
  BarrierOptions cfg;
  cfg.mu_target = 1e-9;
  const UncertaintySet set = rho_set(0.02);

  InnerProblem p = make_inner_problem(fe, mp, MaterialLaw::inverse(), set,
                                      filter.apply(rho));
  const InnerSolution sol = solve_worst_case(p, cfg);
  REQUIRE(sol.converged);
  const Eigen::VectorXd grad = marginal_gradient(p, filter, sol);

  auto marginal_value = [&](const Eigen::VectorXd& r) {
    InnerProblem q = make_inner_problem(fe, mp, MaterialLaw::inverse(), set,
                                        filter.apply(r));
    const InnerSolution s = solve_worst_case(q, cfg);
    REQUIRE(s.converged);
    return s.objective_mu;
  };
  const double h = 1e-5;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> pick(0, m.n_elem - 1);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = pick(rng);
    Eigen::VectorXd rp = rho, rm = rho;
    rp[k] += h;
    rm[k] -= h;
    const double fd = (marginal_value(rp) - marginal_value(rm)) / (2.0 * h);
    CHECK(std::abs(fd - grad[k]) <= 1e-3 * std::max(std::abs(fd), 1e-12));
  }
}

TEST_CASE("marginal gradient rejects stale inner solutions") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(6, 3, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd rho = interior_rho(m.n_elem, 5);
  InnerProblem p = make_inner_problem(fe, mp, MaterialLaw::inverse(),
                                      rho_set(0.05), filter.apply(rho));
  const InnerSolution sol = solve_worst_case(p, {});
  REQUIRE(sol.converged);
  // Same solution handed to a visibly different design's problem: the inner
  // KKT residuals no longer vanish, so the envelope formula must refuse.
  Eigen::VectorXd moved = rho.array() + 0.05;
  InnerProblem stale = make_inner_problem(fe, mp, MaterialLaw::inverse(),
                                          rho_set(0.05), filter.apply(moved));
  CHECK_THROWS_AS(marginal_gradient(stale, filter, sol), std::invalid_argument);
}

// ---- optimize + report -----------------------------------------------------

TEST_CASE("optimize collapses to the nominal design at zero budget") {
  RunConfig cfg = desk_config(12, 6, linear_set(0.0));
  cfg.max_iter = 60;
  const RunResult res = optimize(cfg);
  CHECK(res.robust.rho == res.nominal.rho);
  REQUIRE(res.history.size() == 1);
  CHECK(res.history[0].change == 0.0);
  CHECK(res.history[0].inner_newton == 0);
  REQUIRE(res.report.size() == 1);
  CHECK(res.report[0].wc_topo_reference_delta == 0.0);
  CHECK(res.report[0].nom_topo_worst_delta == 0.0);
  CHECK(res.report[0].wc_topo_worst_delta == 0.0);
  CHECK(res.worst.degenerate_budget);
}

TEST_CASE("optimize lowers the worst case and keeps every iterate volume-feasible") {
  RunConfig cfg = desk_config(12, 6, rho_set(0.02));
  cfg.ED = 0.1;  // harsh degradation so robustness pays within few iterations
  cfg.max_iter = 40;
  int callbacks = 0;
  const RunResult res = optimize(cfg, [&](const OuterRecord& rec, const DesignField& d) {
    ++callbacks;
    CHECK(rec.k == callbacks);
    CHECK(int(d.rho.size()) == cfg.nx * cfg.ny);
  });
  CHECK(callbacks == int(res.history.size()));
  REQUIRE(res.history.size() >= 2);
  for (const OuterRecord& rec : res.history) CHECK(rec.volume <= cfg.V + 1e-9);
  // Worst-case objective: final at most the nominal topology's value.
  CHECK(res.history.back().objective <= res.history.front().objective);
  REQUIRE(res.report.size() == 1);
  const ReportRow& row = res.report[0];
  // Robustness strictly helps the worst case and costs nominal performance.
  CHECK(row.wc_topo_worst_delta < row.nom_topo_worst_delta);
  CHECK(row.wc_topo_reference_delta >= 0.0);
  // Worst case dominates the reference on the same topology.
  CHECK(row.wc_topo_worst_delta >= row.wc_topo_reference_delta);
  CHECK(row.nom_topo_worst_delta >= 0.0);
  CHECK(res.worst.converged);
}

TEST_CASE("report on identical designs has a zero robust-reference column") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(8, 4, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd rho = interior_rho(m.n_elem, 17);
  const std::vector<ReportRow> rows = evaluate_report(
      fe, filter, mp, rho, rho, {linear_set(0.03), linear_set(0.06)}, {});
  REQUIRE(rows.size() == 2);
  for (const ReportRow& row : rows) {
    CHECK(row.wc_topo_reference_delta == 0.0);
    CHECK(row.nom_topo_worst_delta == row.wc_topo_worst_delta);
    CHECK(row.nom_topo_worst_delta > 0.0);
    CHECK(!row.has_continuation);
  }
  CHECK(rows[0].budget == 0.03);
  CHECK(rows[1].budget == 0.06);
  // Larger budget, larger worst case.
  CHECK(rows[1].wc_topo_worst_delta > rows[0].wc_topo_worst_delta);
}

TEST_CASE("report reference for dispersion sets uses the anchor modulus") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(6, 3, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_elem, 0.8);
  const UncertaintySet set = avg_set(0.4, 0.05, 0.4);

  const std::vector<ReportRow> rows =
      evaluate_report(fe, filter, mp, rho, rho, {set}, {});
  REQUIRE(rows.size() == 1);
  // Uniform designs scale compliance by E0/E(m); E(m) is the harmonic mean
  // 1/((1-m)/E0 + m/ED) = 0.85366 at the defaults.
  const Eigen::VectorXd rho_f = filter.apply(rho);
  const double c0 =
      fe.solve_state((rho_f.array().pow(mp.penal) * mp.E0).matrix()).compliance;
  const double Em = 1.0 / ((1.0 - set.anchor) / mp.E0 + set.anchor / mp.ED);
  CHECK(Em == doctest::Approx(0.8536585365853658).epsilon(1e-12));
  CHECK(rows[0].compliance_reference ==
        doctest::Approx(c0 * mp.E0 / Em).epsilon(1e-10));
}

TEST_CASE("report continuation triple obeys the bound ordering") {
  MaterialParams mp;
  mp.ED = 0.4;
  FeSystem fe = make_cantilever(6, 3, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  const Eigen::VectorXd nominal = interior_rho(m.n_elem, 23);
  const Eigen::VectorXd robust =
      (nominal.array() * 0.95 + 0.03).cwiseMin(1.0).cwiseMax(0.01).matrix();
  ReportOptions opt;
  opt.continuation_steps = 3;
  const std::vector<ReportRow> rows =
      evaluate_report(fe, filter, mp, nominal, robust, {linear_set(0.08)}, opt);
  REQUIRE(rows.size() == 1);
  const ReportRow& row = rows[0];
  CHECK(row.has_continuation);
  CHECK(row.contin >= 0.0);
  CHECK(row.contin <= row.inverse + 1e-9);
  CHECK(row.direct <= row.inverse + 1e-9);
  CHECK(row.direct >= 0.0);
  // The triple's inverse evaluation and the plain worst-case column solve the
  // same problem through different laws; they agree to solver tolerance.
  CHECK(row.inverse == doctest::Approx(row.wc_topo_worst_delta).epsilon(1e-6));
}

TEST_CASE("design field validation rejects bound and volume violations") {
  MaterialParams mp;
  FeSystem fe = make_cantilever(4, 2, 2.0, 1.0, mp);
  const Mesh& m = fe.mesh();
  const DensityFilter filter(m, 1.8 * m.dx);
  DesignField d;
  d.rho = Eigen::VectorXd::Constant(m.n_elem, 0.5);
  d.rho_f = filter.apply(d.rho);
  d.rho_min = 0.01;
  d.volume_fraction = 0.5;
  d.validate(m);
  DesignField low = d;
  low.rho[0] = 0.001;
  CHECK_THROWS_AS(low.validate(m), std::invalid_argument);
  DesignField fat = d;
  fat.volume_fraction = 0.4;
  CHECK_THROWS_AS(fat.validate(m), std::invalid_argument);
  DesignField wrong = d;
  wrong.rho.conservativeResize(m.n_elem - 1);
  CHECK_THROWS_AS(wrong.validate(m), std::invalid_argument);
}

TEST_CASE("optimize tags the failing stage") {
  RunConfig cfg = desk_config(12, 6, rho_set(10.0));  // unreachable budget
  cfg.max_iter = 5;
  try {
    optimize(cfg);
    FAIL("expected a stage-tagged failure");
  } catch (const std::runtime_error& ex) {
    CHECK(std::string(ex.what()).rfind("robust loop iteration 1:", 0) == 0);
  }
}
