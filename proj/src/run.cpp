#include "wcto/run.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "wcto/io.hpp"
#include "wcto/material.hpp"
#include "wcto/robust_opt.hpp"

namespace fs = std::filesystem;

namespace wcto {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_meta(const RunConfig& cfg, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("meta: cannot open '" + path.string() + "'");
  out << "# resolved configuration\n";
  for (const auto& [key, value] : config_echo(cfg))
    out << key << " = " << value << "\n";
  out << "# pgm convention: value 0 -> white, 1 -> black; "
         "effective modulus normalized by E0\n";
  if (!out) throw std::runtime_error("meta: write failed");
}

// One optimization with streamed iteration log and field exports in dir.
RunResult run_one(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream log(dir / "iterations.log");
  if (!log)
    throw std::runtime_error("log: cannot open '" + (dir / "iterations.log").string() + "'");
  log << "k,objective,volume,change,inner_newton\n";
  RunResult res = optimize(cfg, [&](const OuterRecord& rec, const DesignField&) {
    log << rec.k << "," << fmt(rec.objective) << "," << fmt(rec.volume) << ","
        << fmt(rec.change) << "," << rec.inner_newton << "\n";
    log.flush();  // retain progress if a later stage fails
  });

  const Mesh m = cfg.make_mesh();
  export_field_pgm(m, res.nominal.rho, FieldKind::density,
                   (dir / "rho_nominal.pgm").string());
  export_field_pgm(m, res.robust.rho, FieldKind::density,
                   (dir / "rho_robust.pgm").string());
  export_field_pgm(m, res.worst.delta, FieldKind::delta,
                   (dir / "delta_worst.pgm").string());
  Eigen::VectorXd E;
  young_derivs(MaterialLaw::inverse(), cfg.material(), res.worst.delta, &E,
               nullptr, nullptr);
  export_field_pgm(m, E, FieldKind::effective_modulus,
                   (dir / "modulus_worst.pgm").string(), cfg.E0);
  return res;
}

}  // namespace

int run(const RunConfig& cfg) {
  try {
    const fs::path root(cfg.out_dir);
    fs::create_directories(root);
    write_meta(cfg, root / "meta.txt");

    if (cfg.sweep.empty()) {
      const RunResult res = run_one(cfg, root);
      export_report_csv(res.report, (root / "report.csv").string());
      return 0;
    }

    std::vector<double> budgets = cfg.sweep;
    std::sort(budgets.begin(), budgets.end());
    std::vector<ReportRow> aggregate;
    for (double budget : budgets) {
      RunConfig one = cfg;
      one.set.budget = budget;
      one.sweep.clear();
      const fs::path dir = root / ("D_" + fmt(budget));
      fs::create_directories(dir);
      const RunResult res = run_one(one, dir);
      export_report_csv(res.report, (dir / "report.csv").string());
      aggregate.insert(aggregate.end(), res.report.begin(), res.report.end());
    }
    export_report_csv(aggregate, (root / "report.csv").string());
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}

}  // namespace wcto
