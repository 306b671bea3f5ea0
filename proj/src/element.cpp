#include "wcto/element.hpp"

#include <cmath>
#include <stdexcept>

namespace wcto {

Eigen::Matrix3d unit_plane_strain_tensor(double nu) {
  if (!(nu >= 0.0) || !(nu < 0.5))
    throw std::invalid_argument("plane strain: nu must lie in [0, 0.5)");
  const double c = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
  Eigen::Matrix3d C;
  C << (1.0 - nu) * c, nu * c, 0.0,
       nu * c, (1.0 - nu) * c, 0.0,
       0.0, 0.0, (1.0 - 2.0 * nu) / 2.0 * c;
  return C;
}

Eigen::Matrix<double, 3, 8> strain_displacement(double xi, double eta, double dx,
                                                double dy) {
  // dN/dxi, dN/deta for N_k = (1 + xi_k xi)(1 + eta_k eta)/4, corners CCW.
  const double xs[4] = {-1.0, 1.0, 1.0, -1.0};
  const double es[4] = {-1.0, -1.0, 1.0, 1.0};
  Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
  for (int k = 0; k < 4; ++k) {
    const double dN_dx = xs[k] * (1.0 + es[k] * eta) / 4.0 * (2.0 / dx);
    const double dN_dy = es[k] * (1.0 + xs[k] * xi) / 4.0 * (2.0 / dy);
    B(0, 2 * k) = dN_dx;
    B(1, 2 * k + 1) = dN_dy;
    B(2, 2 * k) = dN_dy;
    B(2, 2 * k + 1) = dN_dx;
  }
  return B;
}

Matrix8d element_stiffness(double dx, double dy, double nu) {
  if (!(dx > 0.0) || !(dy > 0.0))
    throw std::invalid_argument("element stiffness: dx, dy must be positive");
  const Eigen::Matrix3d C = unit_plane_strain_tensor(nu);
  const double g = 1.0 / std::sqrt(3.0);
  const double detJ = dx * dy / 4.0;
  Matrix8d K = Matrix8d::Zero();
  for (double xi : {-g, g})
    for (double eta : {-g, g}) {
      const auto B = strain_displacement(xi, eta, dx, dy);
      K += B.transpose() * C * B * detJ;
    }
  // Symmetrize away quadrature round-off so downstream lower-triangle
  // assembly sees an exactly symmetric block.
  K = ((K + K.transpose()) / 2.0).eval();
  return K;
}

}  // namespace wcto
