#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace wcto {

// Structured quad grid on [0,width] x [0,height], y pointing up.
// Node (ix,iy) -> id ix*(ny+1)+iy; element (ix,iy) -> id ix*ny+iy.
// Element-local node order is counter-clockwise from the lower-left corner;
// dofs interleave as (ux, uy) per node, so conn holds 8 dof ids per element.
struct Mesh {
  int nx = 0, ny = 0;
  double width = 0.0, height = 0.0;
  double dx = 0.0, dy = 0.0;
  int n_elem = 0, n_node = 0, n_dof = 0;
  std::vector<std::int32_t> conn;  // 8 * n_elem global dof ids
  Eigen::VectorXd volume;          // per-element area (unit thickness)
  double domain_measure = 0.0;     // width * height
  Eigen::MatrixX2d centers;        // element centroids

  int elem_id(int ix, int iy) const { return ix * ny + iy; }
  int node_id(int ix, int iy) const { return ix * (ny + 1) + iy; }
};

// Throws std::invalid_argument on non-positive dimensions or counts.
Mesh build_mesh(int nx, int ny, double width, double height);

}  // namespace wcto
