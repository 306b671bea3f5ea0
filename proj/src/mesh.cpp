#include "wcto/mesh.hpp"

#include <stdexcept>
#include <string>

namespace wcto {

Mesh build_mesh(int nx, int ny, double width, double height) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("mesh: nx and ny must be >= 1, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  if (!(width > 0.0) || !(height > 0.0))
    throw std::invalid_argument("mesh: width and height must be positive");

  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.width = width;
  m.height = height;
  m.dx = width / nx;
  m.dy = height / ny;
  m.n_elem = nx * ny;
  m.n_node = (nx + 1) * (ny + 1);
  m.n_dof = 2 * m.n_node;
  m.domain_measure = width * height;
  m.conn.resize(8 * static_cast<std::size_t>(m.n_elem));
  m.volume = Eigen::VectorXd::Constant(m.n_elem, m.dx * m.dy);
  m.centers.resize(m.n_elem, 2);

  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const int e = m.elem_id(ix, iy);
      const int n[4] = {m.node_id(ix, iy), m.node_id(ix + 1, iy),
                        m.node_id(ix + 1, iy + 1), m.node_id(ix, iy + 1)};
      for (int k = 0; k < 4; ++k) {
        m.conn[8 * e + 2 * k] = 2 * n[k];
        m.conn[8 * e + 2 * k + 1] = 2 * n[k] + 1;
      }
      m.centers(e, 0) = (ix + 0.5) * m.dx;
      m.centers(e, 1) = (iy + 0.5) * m.dy;
    }
  }
  return m;
}

}  // namespace wcto
