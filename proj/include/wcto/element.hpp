#pragma once

#include <Eigen/Dense>

namespace wcto {

using Matrix8d = Eigen::Matrix<double, 8, 8>;

// Plane-strain constitutive tensor for unit Young's modulus (Voigt 3x3):
// 1/((1+nu)(1-2nu)) * [[1-nu, nu, 0], [nu, 1-nu, 0], [0, 0, (1-2nu)/2]].
// Throws std::invalid_argument for nu outside [0, 0.5).
Eigen::Matrix3d unit_plane_strain_tensor(double nu);

// Unit-modulus stiffness of a dx-by-dy bilinear quad, 2x2 Gauss quadrature,
// unit thickness. Local dof order (ux,uy) per node, nodes counter-clockwise
// from the lower-left corner. Scaling by E_eff happens at assembly time.
Matrix8d element_stiffness(double dx, double dy, double nu);

// Strain-displacement matrix at reference coordinates (xi, eta) in [-1,1]^2.
Eigen::Matrix<double, 3, 8> strain_displacement(double xi, double eta, double dx,
                                                double dy);

}  // namespace wcto
