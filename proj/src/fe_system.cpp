#include "wcto/fe_system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wcto {

LoadDir load_dir_from_name(const std::string& name) {
  if (name == "-y") return LoadDir::minus_y;
  if (name == "+y") return LoadDir::plus_y;
  if (name == "-x") return LoadDir::minus_x;
  if (name == "+x") return LoadDir::plus_x;
  throw std::invalid_argument("load_dir: expected one of -y,+y,-x,+x, got '" + name + "'");
}

const char* load_dir_name(LoadDir d) {
  switch (d) {
    case LoadDir::minus_y: return "-y";
    case LoadDir::plus_y: return "+y";
    case LoadDir::minus_x: return "-x";
    case LoadDir::plus_x: return "+x";
  }
  return "?";
}

LoadCase cantilever_load_case(const Mesh& m, double x0, double x1, double total,
                              LoadDir dir) {
  if (!(x1 > x0))
    throw std::invalid_argument("load: interval must satisfy x1 > x0");
  if (!std::isfinite(total))
    throw std::invalid_argument("load: total magnitude must be finite");

  LoadCase lc;
  lc.fixed.assign(m.n_dof, 0);
  lc.f = Eigen::VectorXd::Zero(m.n_dof);

  for (int iy = 0; iy <= m.ny; ++iy) {
    const int n = m.node_id(0, iy);
    lc.fixed[2 * n] = 1;
    lc.fixed[2 * n + 1] = 1;
  }

  const double q = total / (x1 - x0);  // line load density
  const int comp = (dir == LoadDir::minus_y || dir == LoadDir::plus_y) ? 1 : 0;
  const double sgn = (dir == LoadDir::minus_y || dir == LoadDir::minus_x) ? -1.0 : 1.0;

  double covered = 0.0;
  for (int ix = 0; ix < m.nx; ++ix) {
    const double xa = ix * m.dx, xb = xa + m.dx;
    const double s1 = std::max(xa, x0), s2 = std::min(xb, x1);
    if (s2 <= s1) continue;
    covered += s2 - s1;
    // Consistent loads for the linear edge shape functions over [s1, s2].
    const double int_right = (s2 * s2 - s1 * s1) / 2.0 - xa * (s2 - s1);
    const double int_left = xb * (s2 - s1) - (s2 * s2 - s1 * s1) / 2.0;
    lc.f[2 * m.node_id(ix, 0) + comp] += sgn * q * int_left / m.dx;
    lc.f[2 * m.node_id(ix + 1, 0) + comp] += sgn * q * int_right / m.dx;
  }
  if (covered <= 0.0)
    throw std::invalid_argument("load: interval [" + std::to_string(x0) + ", " +
                                std::to_string(x1) + "] misses the bottom edge");
  return lc;
}

FeSystem::FeSystem(Mesh mesh, Matrix8d Khat, LoadCase lc)
    : mesh_(std::move(mesh)), Khat_(std::move(Khat)), lc_(std::move(lc)) {
  if (static_cast<int>(lc_.fixed.size()) != mesh_.n_dof || lc_.f.size() != mesh_.n_dof)
    throw std::invalid_argument("fe_system: load case size does not match mesh");

  free_of_dof_.assign(mesh_.n_dof, -1);
  for (int d = 0; d < mesh_.n_dof; ++d)
    if (!lc_.fixed[d]) free_of_dof_[d] = n_free_++;
  if (n_free_ == 0) throw std::invalid_argument("fe_system: all dofs fixed");

  f_free_.resize(n_free_);
  for (int d = 0; d < mesh_.n_dof; ++d)
    if (free_of_dof_[d] >= 0) f_free_[free_of_dof_[d]] = lc_.f[d];

  build_pattern();
}

void FeSystem::build_pattern() {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh_.n_elem) * 36);
  for (int e = 0; e < mesh_.n_elem; ++e) {
    const std::int32_t* c = mesh_.conn.data() + 8 * e;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const int fi = free_of_dof_[c[i]], fj = free_of_dof_[c[j]];
        if (fi >= fj && fj >= 0) trips.emplace_back(fi, fj, 0.0);
      }
  }
  A_.resize(n_free_, n_free_);
  A_.setFromTriplets(trips.begin(), trips.end());
  A_.makeCompressed();

  slots_.assign(static_cast<std::size_t>(mesh_.n_elem) * 64, -1);
  const int* outer = A_.outerIndexPtr();
  const int* inner = A_.innerIndexPtr();
  for (int e = 0; e < mesh_.n_elem; ++e) {
    const std::int32_t* c = mesh_.conn.data() + 8 * e;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const int fi = free_of_dof_[c[i]], fj = free_of_dof_[c[j]];
        if (fi < fj || fj < 0) continue;
        const int* lo = inner + outer[fj];
        const int* hi = inner + outer[fj + 1];
        const int* it = std::lower_bound(lo, hi, fi);
        slots_[64 * e + 8 * i + j] = static_cast<int>(it - inner);
      }
  }
  ldlt_.analyzePattern(A_);
}

void FeSystem::assemble(const Eigen::VectorXd& a) {
  if (a.size() != mesh_.n_elem)
    throw std::invalid_argument("assemble: coefficient vector size mismatch");
  if (!(a.minCoeff() > 0.0))
    throw std::invalid_argument("assemble: element moduli must be strictly positive");
  double* vals = A_.valuePtr();
  std::fill(vals, vals + A_.nonZeros(), 0.0);
  for (int e = 0; e < mesh_.n_elem; ++e) {
    const double ae = a[e];
    const int* slot = slots_.data() + 64 * e;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const int s = slot[8 * i + j];
        if (s >= 0) vals[s] += ae * Khat_(i, j);
      }
  }
  factorized_ = false;
}

void FeSystem::assemble(const Eigen::VectorXd& a, const Eigen::VectorXd& u_full,
                        const Eigen::VectorXd& c) {
  if (a.size() != mesh_.n_elem || c.size() != mesh_.n_elem)
    throw std::invalid_argument("assemble: coefficient vector size mismatch");
  if (u_full.size() != mesh_.n_dof)
    throw std::invalid_argument("assemble: u must be full-length");
  if (!(a.minCoeff() > 0.0))
    throw std::invalid_argument("assemble: element moduli must be strictly positive");
  double* vals = A_.valuePtr();
  std::fill(vals, vals + A_.nonZeros(), 0.0);
  Eigen::Matrix<double, 8, 1> uloc, w;
  for (int e = 0; e < mesh_.n_elem; ++e) {
    const std::int32_t* cn = mesh_.conn.data() + 8 * e;
    for (int i = 0; i < 8; ++i) uloc[i] = u_full[cn[i]];
    w.noalias() = Khat_ * uloc;
    const double ae = a[e], ce = c[e];
    const int* slot = slots_.data() + 64 * e;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const int s = slot[8 * i + j];
        if (s >= 0) vals[s] += ae * Khat_(i, j) + ce * w[i] * w[j];
      }
  }
  factorized_ = false;
}

void FeSystem::factorize() {
  ldlt_.factorize(A_);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error("fe_system: LDLT factorization failed");
  factorized_ = true;
}

bool FeSystem::factorization_positive_definite() const {
  if (!factorized_) throw std::runtime_error("fe_system: not factorized");
  return ldlt_.vectorD().minCoeff() > 0.0;
}

Eigen::VectorXd FeSystem::solve_free(const Eigen::VectorXd& rhs_free) const {
  if (!factorized_) throw std::runtime_error("fe_system: not factorized");
  return ldlt_.solve(rhs_free);
}

Eigen::VectorXd FeSystem::matvec_free(const Eigen::VectorXd& x_free) const {
  return A_.selfadjointView<Eigen::Lower>() * x_free;
}

Eigen::VectorXd FeSystem::to_full(const Eigen::VectorXd& x_free) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh_.n_dof);
  for (int d = 0; d < mesh_.n_dof; ++d)
    if (free_of_dof_[d] >= 0) out[d] = x_free[free_of_dof_[d]];
  return out;
}

Eigen::VectorXd FeSystem::to_free(const Eigen::VectorXd& x_full) const {
  Eigen::VectorXd out(n_free_);
  for (int d = 0; d < mesh_.n_dof; ++d)
    if (free_of_dof_[d] >= 0) out[free_of_dof_[d]] = x_full[d];
  return out;
}

StateSolution FeSystem::solve_state(const Eigen::VectorXd& coeff) {
  assemble(coeff);
  factorize();
  Eigen::VectorXd u = solve_free(f_free_);
  const double fscale = std::max(1.0, f_free_.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd r = f_free_ - matvec_free(u);
  if (r.lpNorm<Eigen::Infinity>() > 1e-12 * fscale) {
    u += solve_free(r);
    r = f_free_ - matvec_free(u);
  }
  if (r.lpNorm<Eigen::Infinity>() > 1e-10 * fscale)
    throw std::runtime_error("state solve: residual above 1e-10 after refinement");
  StateSolution sol;
  sol.compliance = f_free_.dot(u);
  sol.u = to_full(u);
  return sol;
}

}  // namespace wcto
