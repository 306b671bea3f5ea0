#include "wcto/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "wcto/element.hpp"

namespace wcto {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size())
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size())
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.find('-') != std::string::npos)
    throw std::invalid_argument("config: " + key +
                                " expects a nonnegative integer, got '" + v + "'");
  return x;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty())
    throw std::invalid_argument("config: " + key + " expects a comma-separated list");
  return out;
}

UncertaintySet::Kind kind_from_name(const std::string& v) {
  if (v == "linear") return UncertaintySet::Kind::linear;
  if (v == "rho_weighted") return UncertaintySet::Kind::rho_weighted;
  if (v == "avg_quad") return UncertaintySet::Kind::avg_quad;
  throw std::invalid_argument(
      "config: set must be linear, rho_weighted or avg_quad, got '" + v + "'");
}

const char* kind_name(UncertaintySet::Kind k) {
  switch (k) {
    case UncertaintySet::Kind::linear: return "linear";
    case UncertaintySet::Kind::rho_weighted: return "rho_weighted";
    case UncertaintySet::Kind::avg_quad: return "avg_quad";
  }
  return "?";
}

UncertaintySet::Weighting weighting_from_name(const std::string& v) {
  if (v == "plain") return UncertaintySet::Weighting::plain;
  if (v == "rho_weighted") return UncertaintySet::Weighting::rho_weighted;
  throw std::invalid_argument(
      "config: weighting must be plain or rho_weighted, got '" + v + "'");
}

const char* weighting_name(UncertaintySet::Weighting w) {
  return w == UncertaintySet::Weighting::plain ? "plain" : "rho_weighted";
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

// Keyed setters; D and D1 are aliases for the budget so both the single-budget
// and the avg_quad spellings work.
using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::unordered_map<std::string, Setter>& setters() {
  static const std::unordered_map<std::string, Setter> table = {
      {"nx", [](RunConfig& c, const std::string& k, const std::string& v) { c.nx = int(to_int(k, v)); }},
      {"ny", [](RunConfig& c, const std::string& k, const std::string& v) { c.ny = int(to_int(k, v)); }},
      {"width", [](RunConfig& c, const std::string& k, const std::string& v) { c.width = to_double(k, v); }},
      {"height", [](RunConfig& c, const std::string& k, const std::string& v) { c.height = to_double(k, v); }},
      {"preset", [](RunConfig& c, const std::string&, const std::string& v) { c.preset = v; }},
      {"load_x0", [](RunConfig& c, const std::string& k, const std::string& v) { c.load_x0 = to_double(k, v); }},
      {"load_x1", [](RunConfig& c, const std::string& k, const std::string& v) { c.load_x1 = to_double(k, v); }},
      {"load_total", [](RunConfig& c, const std::string& k, const std::string& v) { c.load_total = to_double(k, v); }},
      {"load_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.load_dir = load_dir_from_name(v); }},
      {"V", [](RunConfig& c, const std::string& k, const std::string& v) { c.V = to_double(k, v); }},
      {"rho_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.rho_min = to_double(k, v); }},
      {"penal", [](RunConfig& c, const std::string& k, const std::string& v) { c.penal = to_double(k, v); }},
      {"nu", [](RunConfig& c, const std::string& k, const std::string& v) { c.nu = to_double(k, v); }},
      {"E0", [](RunConfig& c, const std::string& k, const std::string& v) { c.E0 = to_double(k, v); }},
      {"ED", [](RunConfig& c, const std::string& k, const std::string& v) { c.ED = to_double(k, v); }},
      {"R", [](RunConfig& c, const std::string& k, const std::string& v) { c.R = to_double(k, v); }},
      {"set", [](RunConfig& c, const std::string&, const std::string& v) { c.set.kind = kind_from_name(v); }},
      {"weighting", [](RunConfig& c, const std::string&, const std::string& v) { c.set.weighting = weighting_from_name(v); }},
      {"D", [](RunConfig& c, const std::string& k, const std::string& v) { c.set.budget = to_double(k, v); }},
      {"D1", [](RunConfig& c, const std::string& k, const std::string& v) { c.set.budget = to_double(k, v); }},
      {"D2", [](RunConfig& c, const std::string& k, const std::string& v) { c.set.dispersion = to_double(k, v); }},
      {"m", [](RunConfig& c, const std::string& k, const std::string& v) { c.set.anchor = to_double(k, v); }},
      {"mu_init", [](RunConfig& c, const std::string& k, const std::string& v) { c.barrier.mu_init = to_double(k, v); }},
      {"mu_target", [](RunConfig& c, const std::string& k, const std::string& v) { c.barrier.mu_target = to_double(k, v); }},
      {"tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.barrier.tol = to_double(k, v); }},
      {"constr_viol_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.barrier.constr_viol_tol = to_double(k, v); }},
      {"compl_inf_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.barrier.compl_inf_tol = to_double(k, v); }},
      {"max_iter", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_iter = int(to_int(k, v)); }},
      {"change_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.change_tol = to_double(k, v); }},
      {"move_limit", [](RunConfig& c, const std::string& k, const std::string& v) { c.move_limit = to_double(k, v); }},
      {"continuation_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.continuation_steps = int(to_int(k, v)); }},
      {"tikhonov_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.tikhonov_eps = to_double(k, v); }},
      {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"sweep", [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep = to_double_list(k, v); }},
  };
  return table;
}

void apply_pair(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end())
    throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second(cfg, key, value);
}

// Splits "key=value"; throws on missing '=' or empty key.
std::pair<std::string, std::string> split_pair(const std::string& line) {
  const std::size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: expected key=value, got '" + line + "'");
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  if (key.empty())
    throw std::invalid_argument("config: empty key in '" + line + "'");
  return {std::move(key), std::move(value)};
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (nx < 1 || ny < 1) fail("nx and ny must be >= 1, got " + std::to_string(nx) + " x " + std::to_string(ny));
  if (!(width > 0.0) || !(height > 0.0)) fail("width and height must be > 0");
  if (preset != "cantilever") fail("preset must be cantilever, got '" + preset + "'");
  if (!(load_x1 > load_x0)) fail("load interval [load_x0, load_x1] must be nonempty");
  if (!(V > 0.0) || !(V <= 1.0)) fail("V must be in (0, 1], got " + fmt(V));
  if (!(rho_min > 0.0) || !(rho_min < 1.0)) fail("rho_min must be in (0, 1), got " + fmt(rho_min));
  if (!(penal >= 1.0)) fail("penal must be >= 1, got " + fmt(penal));
  if (!(nu >= 0.0) || !(nu < 0.5)) fail("nu must be in [0, 0.5), got " + fmt(nu));
  if (!(E0 > 0.0)) fail("E0 must be > 0, got " + fmt(E0));
  if (!(ED > 0.0) || !(ED <= E0)) fail("ED must be in (0, E0], got " + fmt(ED));
  if (!(R > 0.0)) fail("R must be > 0, got " + fmt(R));
  set.validate();
  barrier.validate();
  if (max_iter < 1) fail("max_iter must be >= 1, got " + std::to_string(max_iter));
  if (!(change_tol > 0.0)) fail("change_tol must be > 0, got " + fmt(change_tol));
  if (!(move_limit > 0.0) || !(move_limit <= 1.0)) fail("move_limit must be in (0, 1], got " + fmt(move_limit));
  if (continuation_steps != 0 && continuation_steps < 2)
    fail("continuation_steps must be 0 (off) or >= 2, got " + std::to_string(continuation_steps));
  if (continuation_steps != 0 && set.has_inequality())
    fail("continuation_steps requires an equality-budget set");
  if (!(tikhonov_eps >= 0.0)) fail("tikhonov_eps must be >= 0, got " + fmt(tikhonov_eps));
  for (double d : sweep)
    if (!(d >= 0.0)) fail("sweep budgets must be >= 0, got " + fmt(d));
  if (out_dir.empty()) fail("out_dir must be nonempty");
}

MaterialParams RunConfig::material() const {
  MaterialParams mp;
  mp.E0 = E0;
  mp.ED = ED;
  mp.penal = penal;
  mp.rho_min = rho_min;
  mp.nu = nu;
  return mp;
}

Mesh RunConfig::make_mesh() const { return build_mesh(nx, ny, width, height); }

FeSystem RunConfig::make_system() const {
  Mesh m = make_mesh();
  Matrix8d Khat = element_stiffness(m.dx, m.dy, nu);
  LoadCase lc = cantilever_load_case(m, load_x0, load_x1, load_total, load_dir);
  return FeSystem(std::move(m), Khat, std::move(lc));
}

RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& overrides) {
  RunConfig cfg;
  std::unordered_set<std::string> seen;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    auto [key, value] = split_pair(stripped);
    if (!seen.insert(key).second)
      throw std::invalid_argument("config: duplicate key '" + key + "' at line " +
                                  std::to_string(lineno));
    apply_pair(cfg, key, value);
  }
  seen.clear();  // overrides may re-set file keys but not repeat themselves
  for (const std::string& kv : overrides) {
    auto [key, value] = split_pair(trim(kv));
    if (!seen.insert(key).second)
      throw std::invalid_argument("config: duplicate override '" + key + "'");
    apply_pair(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path,
                            const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](const char* k, std::string v) { out.emplace_back(k, std::move(v)); };
  add("preset", cfg.preset);
  add("nx", std::to_string(cfg.nx));
  add("ny", std::to_string(cfg.ny));
  add("width", fmt(cfg.width));
  add("height", fmt(cfg.height));
  add("load_x0", fmt(cfg.load_x0));
  add("load_x1", fmt(cfg.load_x1));
  add("load_total", fmt(cfg.load_total));
  add("load_dir", load_dir_name(cfg.load_dir));
  add("V", fmt(cfg.V));
  add("rho_min", fmt(cfg.rho_min));
  add("penal", fmt(cfg.penal));
  add("nu", fmt(cfg.nu));
  add("E0", fmt(cfg.E0));
  add("ED", fmt(cfg.ED));
  add("R", fmt(cfg.R));
  add("set", kind_name(cfg.set.kind));
  add("weighting", weighting_name(cfg.set.weighting));
  add("D", fmt(cfg.set.budget));
  add("D2", fmt(cfg.set.dispersion));
  add("m", fmt(cfg.set.anchor));
  add("mu_init", fmt(cfg.barrier.mu_init));
  add("mu_target", fmt(cfg.barrier.mu_target));
  add("mu_factor", fmt(cfg.barrier.mu_factor));
  add("tol", fmt(cfg.barrier.tol));
  add("constr_viol_tol", fmt(cfg.barrier.constr_viol_tol));
  add("compl_inf_tol", fmt(cfg.barrier.compl_inf_tol));
  add("tau", fmt(cfg.barrier.tau));
  add("max_newton_per_stage", std::to_string(cfg.barrier.max_newton_per_stage));
  add("max_backtracks", std::to_string(cfg.barrier.max_backtracks));
  add("max_iter", std::to_string(cfg.max_iter));
  add("change_tol", fmt(cfg.change_tol));
  add("move_limit", fmt(cfg.move_limit));
  add("continuation_steps", std::to_string(cfg.continuation_steps));
  add("tikhonov_eps", fmt(cfg.tikhonov_eps));
  add("out_dir", cfg.out_dir);
  add("seed", std::to_string(cfg.seed));
  std::string sw;
  for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
    if (i) sw += ",";
    sw += fmt(cfg.sweep[i]);
  }
  add("sweep", sw);
  return out;
}

}  // namespace wcto
