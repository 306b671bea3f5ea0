#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "wcto/mesh.hpp"
#include "wcto/robust_opt.hpp"

namespace wcto {

// What a per-element scalar field represents; controls normalization only.
enum class FieldKind { density, delta, effective_modulus };

// Writes a binary PGM (P5), one pixel per element, rows top to bottom in
// physical orientation. Values map 0 -> white, 1 -> black after clamping;
// effective moduli are divided by E0 first.
void export_field_pgm(const Mesh& m, const Eigen::VectorXd& field,
                      FieldKind kind, const std::string& path, double E0 = 1.0);

// Reads a field written by export_field_pgm back to [0, 1] element order.
// The mesh fixes the expected dimensions; mismatches are errors.
Eigen::VectorXd read_field_pgm(const Mesh& m, const std::string& path);

// Writes rows as CSV with a fixed header; continuation columns appear only
// when the rows carry them, and mixed rows are rejected.
void export_report_csv(const std::vector<ReportRow>& rows,
                       const std::string& path);

// Round-trip reader for report CSV files.
std::vector<ReportRow> read_report_csv(const std::string& path);

}  // namespace wcto
