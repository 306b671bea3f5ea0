#include "wcto/filter.hpp"

#include <cmath>
#include <stdexcept>

namespace wcto {

DensityFilter::DensityFilter(const Mesh& m, double radius) {
  if (!(radius > 0.0))
    throw std::invalid_argument("filter: radius must be positive");
  n_ = m.n_elem;
  radius_ = radius;
  const int wx = static_cast<int>(std::ceil(radius / m.dx));
  const int wy = static_cast<int>(std::ceil(radius / m.dy));

  offsets_.assign(n_ + 1, 0);
  cols_.reserve(static_cast<std::size_t>(n_) * (2 * wx + 1));
  w_.reserve(cols_.capacity());

  for (int ix = 0; ix < m.nx; ++ix)
    for (int iy = 0; iy < m.ny; ++iy) {
      const int e = m.elem_id(ix, iy);
      double row_sum = 0.0;
      const std::size_t begin = cols_.size();
      for (int jx = std::max(0, ix - wx); jx <= std::min(m.nx - 1, ix + wx); ++jx)
        for (int jy = std::max(0, iy - wy); jy <= std::min(m.ny - 1, iy + wy); ++jy) {
          const double ddx = (jx - ix) * m.dx, ddy = (jy - iy) * m.dy;
          const double dist = std::sqrt(ddx * ddx + ddy * ddy);
          if (dist >= radius) continue;
          const int j = m.elem_id(jx, jy);
          const double weight = (radius - dist) * m.volume[j];
          cols_.push_back(j);
          w_.push_back(weight);
          row_sum += weight;
        }
      // Self-weight R*v_e > 0 guarantees a nonempty row.
      for (std::size_t k = begin; k < cols_.size(); ++k) w_[k] /= row_sum;
      // Loop order (ix outer, iy inner) appends rows in element-id order.
      offsets_[e + 1] = static_cast<int>(cols_.size());
    }
}

Eigen::VectorXd DensityFilter::apply(const Eigen::VectorXd& rho) const {
  if (rho.size() != n_) throw std::invalid_argument("filter: size mismatch");
  Eigen::VectorXd out(n_);
  for (int e = 0; e < n_; ++e) {
    double acc = 0.0;
    for (int k = offsets_[e]; k < offsets_[e + 1]; ++k) acc += w_[k] * rho[cols_[k]];
    out[e] = acc;
  }
  return out;
}

Eigen::VectorXd DensityFilter::chain_transpose(const Eigen::VectorXd& grad_filtered) const {
  if (grad_filtered.size() != n_) throw std::invalid_argument("filter: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (int e = 0; e < n_; ++e) {
    const double ge = grad_filtered[e];
    for (int k = offsets_[e]; k < offsets_[e + 1]; ++k) out[cols_[k]] += w_[k] * ge;
  }
  return out;
}

std::vector<std::pair<int, double>> DensityFilter::row(int e) const {
  if (e < 0 || e >= n_) throw std::invalid_argument("filter: row index out of range");
  std::vector<std::pair<int, double>> r;
  for (int k = offsets_[e]; k < offsets_[e + 1]; ++k) r.emplace_back(cols_[k], w_[k]);
  return r;
}

}  // namespace wcto
