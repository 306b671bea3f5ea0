#include "wcto/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wcto {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Skips whitespace and '#' comment lines, then reads one nonnegative integer.
int read_pnm_int(std::istream& in) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c))
    throw std::runtime_error("pgm read: malformed header");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = 10 * v + (c - '0');
    c = in.get();
  }
  return v;
}

double parse_field(const std::string& tok, const char* col) {
  std::size_t pos = 0;
  const double v = std::stod(tok, &pos);
  while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos])))
    ++pos;
  if (pos != tok.size())
    throw std::runtime_error(std::string("report read: bad value in column ") +
                             col);
  return v;
}

}  // namespace

void export_field_pgm(const Mesh& m, const Eigen::VectorXd& field,
                      FieldKind kind, const std::string& path, double E0) {
  if (field.size() != m.n_elem)
    throw std::invalid_argument("pgm export: field size mismatch");
  if (!(E0 > 0.0)) throw std::invalid_argument("pgm export: E0 must be positive");
  const double scale = kind == FieldKind::effective_modulus ? 1.0 / E0 : 1.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm export: cannot open '" + path + "'");
  out << "P5\n" << m.nx << " " << m.ny << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(m.nx));
  for (int py = 0; py < m.ny; ++py) {
    const int iy = m.ny - 1 - py;  // top row of pixels is the top of the domain
    for (int ix = 0; ix < m.nx; ++ix) {
      const double v = std::clamp(field[m.elem_id(ix, iy)] * scale, 0.0, 1.0);
      row[static_cast<std::size_t>(ix)] =
          static_cast<std::uint8_t>(255 - std::lround(255.0 * v));
    }
    out.write(reinterpret_cast<const char*>(row.data()), m.nx);
  }
  if (!out) throw std::runtime_error("pgm export: write failed for '" + path + "'");
}

Eigen::VectorXd read_field_pgm(const Mesh& m, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm read: cannot open '" + path + "'");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw std::runtime_error("pgm read: not a P5 file");
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (w != m.nx || h != m.ny)
    throw std::runtime_error("pgm read: dimensions do not match the mesh");
  if (maxval != 255) throw std::runtime_error("pgm read: expected maxval 255");
  // read_pnm_int consumed the single whitespace byte after maxval.
  Eigen::VectorXd field(m.n_elem);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
  for (int py = 0; py < h; ++py) {
    in.read(reinterpret_cast<char*>(row.data()), w);
    if (!in) throw std::runtime_error("pgm read: truncated raster");
    const int iy = m.ny - 1 - py;
    for (int ix = 0; ix < w; ++ix)
      field[m.elem_id(ix, iy)] = (255.0 - row[static_cast<std::size_t>(ix)]) / 255.0;
  }
  return field;
}

void export_report_csv(const std::vector<ReportRow>& rows,
                       const std::string& path) {
  bool cont = !rows.empty() && rows.front().has_continuation;
  for (const ReportRow& row : rows)
    if (row.has_continuation != cont)
      throw std::invalid_argument("report export: rows disagree on continuation columns");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("report export: cannot open '" + path + "'");
  out << "budget,compliance_reference,wc_topo_reference_delta,"
         "nom_topo_worst_delta,wc_topo_worst_delta";
  if (cont) out << ",contin,direct,inverse";
  out << "\n";
  for (const ReportRow& row : rows) {
    out << fmt(row.budget) << "," << fmt(row.compliance_reference) << ","
        << fmt(row.wc_topo_reference_delta) << "," << fmt(row.nom_topo_worst_delta)
        << "," << fmt(row.wc_topo_worst_delta);
    if (cont)
      out << "," << fmt(row.contin) << "," << fmt(row.direct) << ","
          << fmt(row.inverse);
    out << "\n";
  }
  if (!out) throw std::runtime_error("report export: write failed for '" + path + "'");
}

std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report read: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("report read: empty file");
  const std::string base =
      "budget,compliance_reference,wc_topo_reference_delta,"
      "nom_topo_worst_delta,wc_topo_worst_delta";
  bool cont = false;
  if (line == base + ",contin,direct,inverse")
    cont = true;
  else if (line != base)
    throw std::runtime_error("report read: unexpected header");

  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<std::string> toks;
    while (std::getline(ss, tok, ',')) toks.push_back(tok);
    if (toks.size() != (cont ? 8u : 5u))
      throw std::runtime_error("report read: wrong column count");
    ReportRow row;
    row.budget = parse_field(toks[0], "budget");
    row.compliance_reference = parse_field(toks[1], "compliance_reference");
    row.wc_topo_reference_delta = parse_field(toks[2], "wc_topo_reference_delta");
    row.nom_topo_worst_delta = parse_field(toks[3], "nom_topo_worst_delta");
    row.wc_topo_worst_delta = parse_field(toks[4], "wc_topo_worst_delta");
    row.has_continuation = cont;
    if (cont) {
      row.contin = parse_field(toks[5], "contin");
      row.direct = parse_field(toks[6], "direct");
      row.inverse = parse_field(toks[7], "inverse");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace wcto
