#pragma once

#include "wcto/config.hpp"

namespace wcto {

// Executes one configured run and writes all artifacts under cfg.out_dir:
// meta.txt, iterations.log, report.csv, and PGM exports of the nominal and
// robust densities plus the worst-case degradation and effective modulus.
// A nonempty sweep list runs one optimization per budget in ascending order,
// each in its own subdirectory, with an aggregate report at the root.
// Returns 0 on success; on failure prints a stage-tagged message to stderr,
// retains partial artifacts, and returns 1.
int run(const RunConfig& cfg);

}  // namespace wcto
