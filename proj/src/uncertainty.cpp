#include "wcto/uncertainty.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wcto {

namespace {

constexpr double kBoxMargin = 1e-9;  // strict-interior clip for samples

double dispersion_value(const Mesh& m, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& delta, double anchor) {
  const Eigen::ArrayXd y = w.array() * delta.array() - anchor;
  return (m.volume.array() * y.square()).sum() / m.domain_measure;
}

// Equality value of the clipped ray t*x: monotone nondecreasing in t.
double ray_budget(const Mesh& m, const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                  double t) {
  double acc = 0.0;
  for (int e = 0; e < m.n_elem; ++e)
    acc += m.volume[e] * w[e] * std::min(t * x[e], 1.0 - kBoxMargin);
  return acc / m.domain_measure;
}

}  // namespace

void UncertaintySet::validate() const {
  if (!(budget >= 0.0) || !std::isfinite(budget))
    throw std::invalid_argument("uncertainty: budget must be >= 0");
  if (kind == Kind::avg_quad) {
    if (!(dispersion > 0.0))
      throw std::invalid_argument("uncertainty: avg_quad dispersion bound must be > 0");
    if (!(anchor >= 0.0) || !(anchor <= 1.0))
      throw std::invalid_argument("uncertainty: anchor must lie in [0, 1]");
  }
}

Eigen::VectorXd budget_weights(const UncertaintySet& set, const Eigen::VectorXd& rho_f,
                               double penal) {
  const bool weighted = set.kind == UncertaintySet::Kind::rho_weighted ||
                        (set.kind == UncertaintySet::Kind::avg_quad &&
                         set.weighting == UncertaintySet::Weighting::rho_weighted);
  if (!weighted) return Eigen::VectorXd::Ones(rho_f.size());
  return rho_f.array().pow(penal);
}

double budget_mass(const Mesh& m, const Eigen::VectorXd& w) {
  return (m.volume.array() * w.array()).sum() / m.domain_measure;
}

Eigen::VectorXd budget_value(const UncertaintySet& set, const Mesh& m,
                             const Eigen::VectorXd& w, const Eigen::VectorXd& delta) {
  Eigen::VectorXd g(set.n_constraints());
  g[0] = (m.volume.array() * w.array() * delta.array()).sum() / m.domain_measure -
         set.budget;
  if (set.has_inequality())
    g[1] = dispersion_value(m, w, delta, set.anchor) - set.dispersion;
  return g;
}

Eigen::MatrixXd budget_grad_delta(const UncertaintySet& set, const Mesh& m,
                                  const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& delta) {
  Eigen::MatrixXd G(delta.size(), set.n_constraints());
  G.col(0) = m.volume.array() * w.array() / m.domain_measure;
  if (set.has_inequality())
    G.col(1) = 2.0 * m.volume.array() * w.array() *
               (w.array() * delta.array() - set.anchor) / m.domain_measure;
  return G;
}

Eigen::VectorXd budget_ineq_hess_diag(const UncertaintySet& set, const Mesh& m,
                                      const Eigen::VectorXd& w) {
  if (!set.has_inequality()) return Eigen::VectorXd::Zero(w.size());
  return 2.0 * m.volume.array() * w.array().square() / m.domain_measure;
}

Eigen::MatrixXd budget_grad_rho(const UncertaintySet& set, const Mesh& m,
                                const Eigen::VectorXd& rho_f, double penal,
                                const Eigen::VectorXd& delta) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(delta.size(), set.n_constraints());
  const bool weighted = set.kind == UncertaintySet::Kind::rho_weighted ||
                        (set.kind == UncertaintySet::Kind::avg_quad &&
                         set.weighting == UncertaintySet::Weighting::rho_weighted);
  if (!weighted) return G;
  const Eigen::ArrayXd dw = penal * rho_f.array().pow(penal - 1.0);
  G.col(0) = m.volume.array() * dw * delta.array() / m.domain_measure;
  if (set.has_inequality()) {
    const Eigen::ArrayXd w = rho_f.array().pow(penal);
    G.col(1) = 2.0 * m.volume.array() * (w * delta.array() - set.anchor) *
               delta.array() * dw / m.domain_measure;
  }
  return G;
}

Eigen::VectorXd canonical_start(const UncertaintySet& set, const Mesh& m,
                                const Eigen::VectorXd& w) {
  set.validate();
  const double mass = budget_mass(m, w);
  if (!(set.budget < mass * (1.0 - 1e-12)) || !(set.budget > 0.0))
    throw std::invalid_argument(
        "uncertainty: budget " + std::to_string(set.budget) +
        " has empty strict interior (reachable range (0, " + std::to_string(mass) + "))");
  const double c = set.budget / mass;
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(m.n_elem, c);
  if (set.has_inequality()) {
    const double q = dispersion_value(m, w, delta, set.anchor);
    if (!(q < set.dispersion * (1.0 - 1e-12)))
      throw std::invalid_argument(
          "uncertainty: avg_quad canonical point violates the dispersion bound (" +
          std::to_string(q) + " >= " + std::to_string(set.dispersion) +
          "); set has no usable strict interior start");
  }
  return delta;
}

Eigen::VectorXd sample_feasible(const UncertaintySet& set, const Mesh& m,
                                const Eigen::VectorXd& w, std::mt19937_64& rng) {
  const Eigen::VectorXd canon = canonical_start(set, m, w);  // validates
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  Eigen::VectorXd x(m.n_elem);
  for (int e = 0; e < m.n_elem; ++e) x[e] = unif(rng);

  // Bracket then bisect the scalar rescale factor onto the equality.
  const double target = set.budget;
  double t_hi = 1.0;
  int guard = 0;
  while (ray_budget(m, w, x, t_hi) < target) {
    t_hi *= 2.0;
    if (++guard > 200)
      throw std::invalid_argument("uncertainty: sampling cannot reach the budget");
  }
  double t_lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double t = (t_lo + t_hi) / 2.0;
    if (ray_budget(m, w, x, t) < target)
      t_lo = t;
    else
      t_hi = t;
    if (std::abs(ray_budget(m, w, x, (t_lo + t_hi) / 2.0) - target) <=
        1e-12 * std::max(1.0, target))
      break;
  }
  const double t = (t_lo + t_hi) / 2.0;
  Eigen::VectorXd delta(m.n_elem);
  for (int e = 0; e < m.n_elem; ++e)
    delta[e] = std::min(t * x[e], 1.0 - kBoxMargin);

  if (set.has_inequality()) {
    // Blend toward the canonical point until strictly inside the dispersion
    // bound; the equality and the box are preserved along the segment.
    auto disp = [&](const Eigen::VectorXd& d) {
      return dispersion_value(m, w, d, set.anchor) - set.dispersion;
    };
    if (disp(delta) >= 0.0) {
      double th_lo = 0.0, th_hi = 1.0;  // theta = 1 is the canonical point
      for (int it = 0; it < 100; ++it) {
        const double th = (th_lo + th_hi) / 2.0;
        const Eigen::VectorXd cand = (1.0 - th) * delta + th * canon;
        if (disp(cand) < -1e-12 * std::max(1.0, set.dispersion))
          th_hi = th;
        else
          th_lo = th;
      }
      delta = ((1.0 - th_hi) * delta + th_hi * canon).eval();
    }
  }
  return delta;
}

}  // namespace wcto
