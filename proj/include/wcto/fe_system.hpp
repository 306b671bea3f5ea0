#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <string>
#include <vector>

#include "wcto/element.hpp"
#include "wcto/mesh.hpp"

namespace wcto {

enum class LoadDir { minus_y, plus_y, minus_x, plus_x };
LoadDir load_dir_from_name(const std::string& name);
const char* load_dir_name(LoadDir d);

struct LoadCase {
  std::vector<char> fixed;  // per dof, 1 = Dirichlet (eliminated from the system)
  Eigen::VectorXd f;        // full-length consistent nodal load vector
};

// Left edge clamped; constant line load on the bottom edge over [x0, x1],
// distributed as consistent nodal forces (exact for partial edge overlap).
// Throws std::invalid_argument if the interval misses the bottom edge.
LoadCase cantilever_load_case(const Mesh& m, double x0, double x1, double total,
                              LoadDir dir);

struct StateSolution {
  Eigen::VectorXd u;        // full-length displacement, zeros on fixed dofs
  double compliance = 0.0;  // f' u
};

// Reduced symmetric system over the free dofs with a fixed sparsity pattern:
// stores the lower triangle, reuses one symbolic analysis across numeric
// factorizations. All assembled matrices share the element-block pattern
// sum_e [a_e Khat + c_e (Khat u_loc)(Khat u_loc)'].
class FeSystem {
 public:
  FeSystem(Mesh mesh, Matrix8d Khat, LoadCase lc);

  const Mesh& mesh() const { return mesh_; }
  const Matrix8d& Khat() const { return Khat_; }
  const LoadCase& load_case() const { return lc_; }
  int n_free() const { return n_free_; }
  const Eigen::VectorXd& f_free() const { return f_free_; }

  void assemble(const Eigen::VectorXd& a);
  // Adds per-element rank-one terms c[e] * (Khat u_loc)(Khat u_loc)'.
  void assemble(const Eigen::VectorXd& a, const Eigen::VectorXd& u_full,
                const Eigen::VectorXd& c);
  // Numeric factorization of the assembled matrix (symbolic reused).
  // Throws std::runtime_error on breakdown.
  void factorize();
  // All LDLT pivots strictly positive (definiteness probe for fallbacks).
  bool factorization_positive_definite() const;
  Eigen::VectorXd solve_free(const Eigen::VectorXd& rhs_free) const;
  Eigen::VectorXd matvec_free(const Eigen::VectorXd& x_free) const;

  Eigen::VectorXd to_full(const Eigen::VectorXd& x_free) const;
  Eigen::VectorXd to_free(const Eigen::VectorXd& x_full) const;

  // assemble + factorize + solve against the load case; enforces
  // ||Ku - f||_inf / max(1, ||f||_inf) <= 1e-10 with one refinement pass.
  StateSolution solve_state(const Eigen::VectorXd& coeff);

 private:
  void build_pattern();

  Mesh mesh_;
  Matrix8d Khat_;
  LoadCase lc_;
  int n_free_ = 0;
  std::vector<int> free_of_dof_;  // -1 for fixed dofs
  Eigen::VectorXd f_free_;
  Eigen::SparseMatrix<double> A_;  // lower triangle on free dofs
  std::vector<int> slots_;         // 64 per element, -1 for eliminated/upper
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  bool factorized_ = false;
};

}  // namespace wcto
