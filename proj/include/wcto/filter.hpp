#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wcto/mesh.hpp"

namespace wcto {

// Row-normalized conic density filter on element centroids:
// F_ej = max(0, R - |c_j - c_e|) * v_j, rows scaled to sum 1 (midpoint
// quadrature of the convolution). apply() maps design densities to filtered
// ones; chain_transpose() is the exact adjoint for sensitivity chains.
class DensityFilter {
 public:
  DensityFilter(const Mesh& m, double radius);

  Eigen::VectorXd apply(const Eigen::VectorXd& rho) const;
  Eigen::VectorXd chain_transpose(const Eigen::VectorXd& grad_filtered) const;

  double radius() const { return radius_; }
  int size() const { return n_; }
  // Row weights for tests: pairs (j, w_ej), normalized.
  std::vector<std::pair<int, double>> row(int e) const;

 private:
  int n_ = 0;
  double radius_ = 0.0;
  std::vector<int> offsets_;  // CSR, size n+1
  std::vector<int> cols_;
  std::vector<double> w_;     // normalized weights
};

}  // namespace wcto
