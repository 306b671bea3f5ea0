#pragma once

#include <string>
#include <vector>

#include "wcto/adversary.hpp"
#include "wcto/fe_system.hpp"
#include "wcto/material.hpp"
#include "wcto/uncertainty.hpp"

namespace wcto {

// Fully resolved run parameters. Defaults are the cantilever benchmark:
// 2 x 1 domain at 300 x 150 elements, V = 0.5, p = 4, rho_min = 0.01,
// R = 0.045, total load 0.3 on the bottom edge over x in [1.9, 2.0].
struct RunConfig {
  // mesh
  int nx = 300;
  int ny = 150;
  double width = 2.0;
  double height = 1.0;
  std::string preset = "cantilever";

  // load
  double load_x0 = 1.9;
  double load_x1 = 2.0;
  double load_total = 0.3;
  LoadDir load_dir = LoadDir::minus_y;

  // design + material
  double V = 0.5;  // volume fraction bound
  double rho_min = 0.01;
  double penal = 4.0;
  double nu = 0.3;
  double E0 = 1.0;
  double ED = 0.7;
  double R = 0.045;  // filter radius

  // uncertainty set (budget/dispersion/anchor keyed as D | D1, D2, m)
  UncertaintySet set;

  // inner barrier solver
  BarrierOptions barrier;

  // outer loop
  int max_iter = 500;
  double change_tol = 1e-3;  // outer stop: max|delta rho| below this
  double move_limit = 0.2;

  // extensions, 0 = off
  int continuation_steps = 0;
  double tikhonov_eps = 0.0;

  // run plumbing
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::vector<double> sweep;  // budget sweep; empty = single run at set.budget

  // Throws std::invalid_argument naming the offending key and its bound.
  void validate() const;

  MaterialParams material() const;
  Mesh make_mesh() const;
  // Mesh + element stiffness + cantilever load case per this config.
  FeSystem make_system() const;
};

// Parse flat key=value text ('#' comments and blank lines skipped), then the
// override strings in order (each "key=value"; these may re-set file keys).
// Unknown keys and keys duplicated within the text are errors. The result is
// validated before return.
RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& overrides = {});
RunConfig parse_config_file(const std::string& path,
                            const std::vector<std::string>& overrides = {});

// Canonical key order and echo of every consumed tunable, one "key = value"
// line each, suitable for the run metadata file.
std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg);

}  // namespace wcto
