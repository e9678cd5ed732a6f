#include "qtube/study.hpp"

#include "format.hpp"
#include "qtube/broken_line.hpp"
#include "qtube/cross_section.hpp"
#include "qtube/effective_operator.hpp"
#include "qtube/error.hpp"
#include "qtube/gamma_forms.hpp"
#include "qtube/geometry.hpp"
#include "qtube/tube3d.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#ifndef QTUBE_VERSION
#define QTUBE_VERSION "0.0.0"
#endif

namespace qtube {

using json = nlohmann::ordered_json;
using detail::num;

const char* version_string() { return QTUBE_VERSION; }

// ---------------------------------------------------------------------------
// Scalar expressions

namespace {

class ExprParser {
 public:
  explicit ExprParser(const std::string& s) : s_(s) {}

  double parse() {
    const double v = sum();
    skip();
    if (p_ != s_.size()) bad();
    return v;
  }

 private:
  [[noreturn]] void bad() const { fail(ErrorCode::InvalidInput, "cannot parse number '" + s_ + "'"); }

  void skip() {
    while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
  }

  bool eat(char c) {
    skip();
    if (p_ < s_.size() && s_[p_] == c) {
      ++p_;
      return true;
    }
    return false;
  }

  double sum() {
    double v = product();
    for (;;) {
      if (eat('+')) v += product();
      else if (eat('-')) v -= product();
      else return v;
    }
  }

  double product() {
    double v = unary();
    for (;;) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else return v;
    }
  }

  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }

  double atom() {
    skip();
    if (eat('(')) {
      const double v = sum();
      if (!eat(')')) bad();
      return v;
    }
    if (s_.compare(p_, 2, "pi") == 0) {
      p_ += 2;
      return std::numbers::pi;
    }
    if (s_.compare(p_, 4, "sqrt") == 0) {
      p_ += 4;
      if (!eat('(')) bad();
      const double v = sum();
      if (!eat(')')) bad();
      return std::sqrt(v);
    }
    const char* begin = s_.c_str() + p_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) bad();
    p_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  const std::string& s_;
  std::size_t p_ = 0;
};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

double parse_scalar(const std::string& text) {
  const double v = ExprParser(text).parse();
  require(std::isfinite(v), "number '" + text + "' is not finite");
  return v;
}

std::vector<double> parse_scalar_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& w : words(text)) out.push_back(parse_scalar(w));
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::set<std::string>& schema() {
  static const std::set<std::string> keys = {
      "study.command",       "study.seed",         "study.threads",
      "curve.preset",        "curve.length",       "curve.intervals",
      "curve.kappa0",        "curve.tau0",         "curve.center",
      "curve.halfwidth",     "curve.amp",          "curve.path",
      "section.shape",       "section.h",          "section.modes",
      "section.curvature_modes", "section.xi_list", "section.simplicity_tol",
      "effective.n",         "effective.j_max",    "effective.c_n",
      "effective.bound_state_halfwidth",
      "tube.n",              "tube.eps_list",      "tube.j_max",
      "tube.study",          "tube.leak_j",
      "broken_line.potential", "broken_line.cells", "broken_line.delta_list",
      "broken_line.k_list",
      "gamma.family",        "gamma.dim",          "gamma.eps_list",
      "gamma.lam",           "gamma.samples",      "gamma.tol",
      "gamma.instances",
  };
  return keys;
}

const std::map<std::string, std::string>& preset_texts() {
  static const std::map<std::string, std::string> presets = {
      {"acc-1", R"(
[study]
command = tube
[curve]
preset = bump
length = 10
kappa0 = 1.5
center = 5
halfwidth = 2
intervals = 100
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/24
[tube]
n = 0
eps_list = 0.2 0.1 0.05
j_max = 3
)"},
      {"acc-2", R"(
[study]
command = tube
[curve]
preset = twisted
length = 10
amp = 1
center = 5
halfwidth = 2
intervals = 100
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/24
[tube]
n = 1
eps_list = 0.2 0.1 0.05
j_max = 3
)"},
      {"acc-3", R"(
[study]
command = tube
[curve]
preset = bump
length = 10
kappa0 = 1.5
center = 5
halfwidth = 2
intervals = 100
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/24
[tube]
study = leak
n = 1
leak_j = 0
eps_list = 0.2 0.1 0.05
)"},
      {"acc-4", R"(
[study]
command = cross-section
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/48
modes = 3
curvature_modes = 0 1 2
xi_list = 0.02 0.04 0.06
)"},
      {"acc-5", R"(
[study]
command = cross-section
[section]
shape = rectangle pi pi/sqrt(2); disc 1; rectangle pi pi
h = pi/128
modes = 3
)"},
      {"acc-6", R"(
[study]
command = broken-line
[broken_line]
potential = square_well 1; curvature_bump 2; square_well pi*pi; balanced 1 0.2 0.7
cells = 2000
delta_list = 0.4 0.2 0.1
k_list = 0.1
)"},
      {"acc-7", R"(
[study]
command = gamma-lab
seed = 1
[gamma]
family = perturbation penalization oscillation
instances = 100
dim = 50
eps_list = 1e-1 1e-2 1e-3 1e-4 1e-5 1e-6
lam = 1
samples = 20
tol = 1e-2
)"},
      {"acc-8", R"(
[study]
command = invariants
[curve]
preset = bump
length = 10
kappa0 = 1.5
center = 5
halfwidth = 2
intervals = 100
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/16
[tube]
eps_list = 0.2 0.1 0.05
[broken_line]
potential = square_well 1; square_well pi*pi; square_well pi*pi/4; curvature_bump 2; balanced 1 0.2 0.7
cells = 2000
delta_list = 0.5 0.25
k_list = 0.05 0.1 1 5
)"},
      {"straight-tube", R"(
[study]
command = tube
[curve]
preset = straight
length = 10
intervals = 50
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/16
[tube]
n = 0
eps_list = 0.2 0.1
j_max = 3
)"},
      {"square-well-resonant", R"(
[study]
command = broken-line
[broken_line]
potential = square_well pi*pi
cells = 2000
delta_list = 0.4 0.2 0.1
k_list = 0.1
)"},
      {"bump-effective", R"(
[study]
command = effective
[curve]
preset = bump
length = 10
kappa0 = 1.5
center = 5
halfwidth = 2
intervals = 400
[section]
shape = rectangle pi pi/sqrt(2)
h = pi/24
[effective]
n = 0
j_max = 3
)"},
      {"gamma-small", R"(
[study]
command = gamma-lab
[gamma]
family = penalization
dim = 8
eps_list = 1e-1 1e-2 1e-3 1e-4
)"},
  };
  return presets;
}

}  // namespace

StudyConfig StudyConfig::parse(const std::string& text) {
  StudyConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, where + "expected 'key = value'");
    require(!section.empty(), where + "key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), where + "empty key");
    const std::string full = section + "." + key;
    require(!cfg.has(full), where + "duplicate key '" + full + "'");
    cfg.set(full, value);
  }
  return cfg;
}

StudyConfig StudyConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

StudyConfig StudyConfig::preset(const std::string& name) {
  const auto& p = preset_texts();
  const auto it = p.find(name);
  if (it == p.end()) fail(ErrorCode::InvalidInput, "unknown preset '" + name + "'");
  return parse(it->second);
}

std::vector<std::string> StudyConfig::preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : preset_texts()) out.push_back(k);
  return out;
}

void StudyConfig::set(const std::string& key, const std::string& value) {
  require(schema().count(key) != 0, "unknown config key '" + key + "'");
  values_[key] = trim(value);
}

std::string StudyConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double StudyConfig::get_scalar(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return parse_scalar(get(key));
  } catch (const Error& e) {
    fail(ErrorCode::InvalidInput, key + ": " + e.what());
  }
}

long StudyConfig::get_int(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  require(!v.empty() && *end == '\0', key + ": expected an integer, got '" + v + "'");
  return x;
}

std::vector<double> StudyConfig::get_list(const std::string& key,
                                          const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  try {
    return parse_scalar_list(get(key));
  } catch (const Error& e) {
    fail(ErrorCode::InvalidInput, key + ": " + e.what());
  }
}

std::string StudyConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t StudyConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Plans: every key a command reads is parsed and checked here, before any work.

namespace {

const std::vector<std::string> kCommands = {"cross-section", "effective", "tube",
                                      "broken-line",   "gamma-lab", "invariants"};

CurveSpec plan_curve(const StudyConfig& c) {
  const std::string preset = c.get("curve.preset", "bump");
  const double length = c.get_scalar("curve.length", 10.0);
  const long intervals = c.get_int("curve.intervals", 100);
  require(length > 0.0, "curve.length must be positive");
  require(intervals >= 4, "curve.intervals must be at least 4");
  const int n = static_cast<int>(intervals);
  if (preset == "straight") return CurveSpec::straight(length, n);
  if (preset == "arc") return CurveSpec::circular_arc(length, c.get_scalar("curve.kappa0", 0.5), n);
  if (preset == "bump")
    return CurveSpec::bump_curvature(length, c.get_scalar("curve.kappa0", 1.5),
                                     c.get_scalar("curve.center", 0.5 * length),
                                     c.get_scalar("curve.halfwidth", 0.2 * length), n);
  if (preset == "helix")
    return CurveSpec::helix(length, c.get_scalar("curve.kappa0", 0.5),
                            c.get_scalar("curve.tau0", 0.5), n);
  if (preset == "twisted")
    return CurveSpec::twisted_straight(length, c.get_scalar("curve.amp", 1.0),
                                       c.get_scalar("curve.center", 0.5 * length),
                                       c.get_scalar("curve.halfwidth", 0.2 * length), n);
  if (preset == "file") {
    require(c.has("curve.path"), "curve.preset = file needs curve.path");
    return CurveSpec::from_file(c.get("curve.path"));
  }
  fail(ErrorCode::InvalidInput, "unknown curve.preset '" + preset + "'");
}

ShapeSpec parse_shape(const std::string& text) {
  const auto w = words(text);
  require(!w.empty(), "empty section shape");
  if (w[0] == "mask") return ShapeSpec::parse(text);
  std::string canon = w[0];
  for (std::size_t i = 1; i < w.size(); ++i) canon += " " + num(parse_scalar(w[i]));
  return ShapeSpec::parse(canon);
}

struct SectionPlan {
  std::vector<ShapeSpec> shapes;
  double h = 0.0;
  int modes = 3;
  std::vector<int> curvature_modes;
  std::vector<double> xi_list;
  double simplicity_tol = 1e-6;
};

SectionPlan plan_section(const StudyConfig& c, bool allow_many) {
  SectionPlan p;
  const auto items = split(c.get("section.shape", "rectangle pi pi/sqrt(2)"), ';');
  require(!items.empty(), "section.shape is empty");
  require(allow_many || items.size() == 1, "this command takes a single section.shape");
  for (const auto& s : items) p.shapes.push_back(parse_shape(s));
  p.h = c.get_scalar("section.h", std::numbers::pi / 24.0);
  require(p.h > 0.0, "section.h must be positive");
  const long modes = c.get_int("section.modes", 3);
  require(modes >= 1 && modes <= 64, "section.modes must lie in [1, 64]");
  p.modes = static_cast<int>(modes);
  for (double v : c.get_list("section.curvature_modes", {})) {
    require(v >= 0 && v == std::floor(v), "section.curvature_modes must be non-negative integers");
    p.curvature_modes.push_back(static_cast<int>(v));
  }
  p.xi_list = c.get_list("section.xi_list", {0.02, 0.04, 0.06});
  require(p.xi_list.size() >= 2, "section.xi_list needs at least two values");
  for (double x : p.xi_list) require(x > 0.0, "section.xi_list values must be positive");
  p.simplicity_tol = c.get_scalar("section.simplicity_tol", 1e-6);
  require(p.simplicity_tol > 0.0, "section.simplicity_tol must be positive");
  return p;
}

std::vector<double> positive_list(const StudyConfig& c, const std::string& key,
                                  const std::vector<double>& fallback) {
  const auto v = c.get_list(key, fallback);
  require(!v.empty(), key + " must be non-empty");
  for (double x : v) require(x > 0.0, key + " values must be positive");
  return v;
}

int threads_of(const StudyConfig& c) {
  const long t = c.get_int("study.threads", 1);
  require(t >= 1 && t <= 256, "study.threads must lie in [1, 256]");
  return static_cast<int>(t);
}

std::uint64_t seed_of(const StudyConfig& c) {
  const long s = c.get_int("study.seed", 1);
  require(s >= 0, "study.seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

json fit_json(const CurvatureFit& f) {
  json j;
  j["lambda_n"] = f.lambda_n;
  j["xi_norms"] = f.xi_norms;
  j["gamma"] = f.gamma;
  j["coefficient"] = f.coefficient;
  j["max_odd_part"] = f.max_odd_part;
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

StudyOutcome cross_section_study(const StudyConfig& c) {
  const auto plan = plan_section(c, true);
  StudyOutcome out;
  json shapes = json::array();
  std::ostringstream line;
  for (std::size_t i = 0; i < plan.shapes.size(); ++i) {
    const auto mesh = CrossSectionMesh::build(plan.shapes[i], plan.h);
    int want = plan.modes;
    for (int n : plan.curvature_modes) want = std::max(want, n + 1);
    const auto spec = dirichlet_eigenpairs(mesh, want, plan.simplicity_tol);
    const std::string tag = plan.shapes.size() == 1 ? "" : "_" + std::to_string(i);

    std::ostringstream csv, dat;
    write_eigen_csv(csv, mesh, spec);
    dat << "# index lambda C_n\n";
    json lam = json::array(), cn = json::array();
    for (std::size_t k = 0; k < spec.pairs.size(); ++k) {
      const double C = twist_coefficient(mesh, spec.pairs[k]);
      lam.push_back(spec.pairs[k].lam);
      cn.push_back(C);
      dat << k << ' ' << num(spec.pairs[k].lam) << ' ' << num(C) << '\n';
    }
    json s;
    s["shape"] = plan.shapes[i].describe();
    s["h"] = plan.h;
    s["nodes"] = mesh.size();
    s["lambda"] = lam;
    s["C_n"] = cn;
    s["flagged_gaps"] = spec.flagged_gaps;
    if (!plan.curvature_modes.empty()) {
      json fits = json::array();
      for (int n : plan.curvature_modes) {
        spec.require_simple(n);
        json fj;
        fj["n"] = n;
        fj["along_y1"] = fit_json(curvature_coefficient(mesh, n, spec.pairs, Vec2(1, 0), plan.xi_list));
        fj["along_y2"] = fit_json(curvature_coefficient(mesh, n, spec.pairs, Vec2(0, 1), plan.xi_list));
        fits.push_back(fj);
      }
      s["curvature"] = fits;
    }
    shapes.push_back(s);
    out.artifacts.push_back({"eigen" + tag + ".csv", csv.str()});
    out.artifacts.push_back({"eigen" + tag + ".dat", dat.str()});
    line << (i ? "; " : "") << plan.shapes[i].describe() << ": lambda_0 = " << num(spec.pairs[0].lam);
  }
  json summary;
  summary["command"] = "cross-section";
  summary["shapes"] = shapes;
  out.artifacts.push_back({"summary.json", dump(summary)});
  out.summary = line.str();
  return out;
}

// C_n of mode n on the configured section.
double section_c_n(const SectionPlan& plan, int n) {
  const auto mesh = CrossSectionMesh::build(plan.shapes.front(), plan.h);
  const auto spec = dirichlet_eigenpairs(mesh, std::max(plan.modes, n + 1), plan.simplicity_tol);
  return twist_coefficient(mesh, spec.require_simple(n));
}

StudyOutcome effective_study(const StudyConfig& c) {
  const auto curve = plan_curve(c);
  const long n = c.get_int("effective.n", 0);
  require(n >= 0, "effective.n must be non-negative");
  const long j_max = c.get_int("effective.j_max", 3);
  require(j_max >= 1, "effective.j_max must be positive");
  const bool given = c.has("effective.c_n");
  double c_n = c.get_scalar("effective.c_n", 0.0);
  require(c_n >= 0.0, "effective.c_n must be non-negative");
  const bool bound = c.has("effective.bound_state_halfwidth");
  const double R = c.get_scalar("effective.bound_state_halfwidth", 0.0);
  if (bound) require(R > 0.0, "effective.bound_state_halfwidth must be positive");
  if (!given) c_n = section_c_n(plan_section(c, false), static_cast<int>(n));

  const auto pot = effective_potential(curve, c_n, static_cast<int>(n));
  const auto spec = schrodinger_eigen(pot, static_cast<int>(j_max));
  StudyOutcome out;
  std::ostringstream pcsv, scsv, dat;
  write_potential_csv(pcsv, pot);
  write_spectrum_csv(scsv, spec);
  dat << "# s V\n";
  for (std::size_t i = 0; i < pot.s.size(); ++i) dat << num(pot.s[i]) << ' ' << num(pot.values[i]) << '\n';
  json summary;
  summary["command"] = "effective";
  summary["mode"] = n;
  summary["c_n"] = c_n;
  summary["mu"] = std::vector<double>(spec.mu.data(), spec.mu.data() + spec.mu.size());
  if (bound) {
    const auto b = bound_state_exists(pot, R);
    summary["bound_state"] = {{"exists", b.exists}, {"lowest", b.lowest}, {"lowest_2r", b.lowest_2r}};
  }
  out.artifacts = {{"potential.csv", pcsv.str()},
                   {"spectrum.csv", scsv.str()},
                   {"potential.dat", dat.str()},
                   {"summary.json", dump(summary)}};
  out.summary = "C_n = " + num(c_n) + ", mu_0 = " + num(spec.mu(0));
  return out;
}

// Value at eps^2 = 0 of the interpolating polynomial in eps^2 (Neville).
double richardson_eps2(const std::vector<double>& eps, const std::vector<double>& f) {
  std::vector<double> p = f;
  const std::size_t m = eps.size();
  for (std::size_t k = 1; k < m; ++k)
    for (std::size_t i = 0; i + k < m; ++i) {
      const double xi = eps[i] * eps[i], xk = eps[i + k] * eps[i + k];
      p[i] = (xi * p[i + 1] - xk * p[i]) / (xi - xk);
    }
  return p[0];
}

StudyOutcome tube_study(const StudyConfig& c) {
  const auto curve = plan_curve(c);
  const auto plan = plan_section(c, false);
  const long n = c.get_int("tube.n", 0);
  require(n >= 0, "tube.n must be non-negative");
  const auto eps = positive_list(c, "tube.eps_list", {0.2, 0.1, 0.05});
  const std::string kind = c.get("tube.study", "confinement");
  require(kind == "confinement" || kind == "leak", "tube.study must be confinement or leak");
  AssemblyOptions opt;
  opt.threads = threads_of(c);
  const auto mesh = CrossSectionMesh::build(plan.shapes.front(), plan.h);
  StudyOutcome out;

  if (kind == "leak") {
    const long j = c.get_int("tube.leak_j", 0);
    require(j >= 0, "tube.leak_j must be non-negative");
    const auto spec = dirichlet_eigenpairs(mesh, static_cast<int>(std::max(n, j) + 1), plan.simplicity_tol);
    std::vector<double> values;
    std::ostringstream csv;
    csv << "eps,value\n";
    for (double e : eps) {
      const auto form = assemble_form(curve, mesh, spec, e, static_cast<int>(n), opt);
      const double L = curve.s_max() - curve.s_min();
      Eigen::VectorXd w(static_cast<Eigen::Index>(form.slabs()));
      for (std::size_t i = 0; i < form.slabs(); ++i)
        w(static_cast<Eigen::Index>(i)) = std::sin(std::numbers::pi * (form.s[i] - curve.s_min()) / L);
      w /= std::sqrt(w.squaredNorm() * form.h_s);
      values.push_back(leak_estimate(form, w, static_cast<int>(j)));
      csv << num(e) << ',' << num(values.back()) << '\n';
    }
    const double target = spec.pairs[static_cast<std::size_t>(j)].lam - spec.pairs[static_cast<std::size_t>(n)].lam;
    const double extrap = richardson_eps2(eps, values);
    json summary;
    summary["command"] = "tube";
    summary["study"] = "leak";
    summary["n"] = n;
    summary["j"] = j;
    summary["eps"] = eps;
    summary["values"] = values;
    summary["extrapolated"] = extrap;
    summary["target"] = target;
    summary["relative_error"] = std::abs(extrap - target) / std::abs(target);
    out.artifacts = {{"leak.csv", csv.str()}, {"summary.json", dump(summary)}};
    out.summary = "extrapolated " + num(extrap) + " vs lambda_j - lambda_n = " + num(target);
    return out;
  }

  const long j_max = c.get_int("tube.j_max", 3);
  require(j_max >= 1, "tube.j_max must be positive");
  const auto st = confinement_study(curve, mesh, static_cast<int>(n), eps, static_cast<int>(j_max), opt);
  std::ostringstream csv, dat;
  write_confinement_csv(csv, st);
  dat << "# eps j diff\n";
  for (const auto& r : st.rows) dat << num(r.eps) << ' ' << r.j << ' ' << num(r.diff) << '\n';
  json summary;
  summary["command"] = "tube";
  summary["study"] = "confinement";
  summary["n"] = n;
  summary["c_n"] = st.c_n;
  summary["lambda_n"] = st.lambda_n;
  summary["gamma"] = {{st.gamma(0, 0), st.gamma(0, 1)}, {st.gamma(1, 0), st.gamma(1, 1)}};
  summary["fitted_order"] = st.fitted_order;
  summary["mu_effective"] = std::vector<double>(st.effective.mu.data(), st.effective.mu.data() + st.effective.mu.size());
  summary["mu_continuum"] = std::vector<double>(st.continuum.mu.data(), st.continuum.mu.data() + st.continuum.mu.size());
  out.artifacts = {{"confinement.csv", csv.str()},
                   {"confinement.dat", dat.str()},
                   {"summary.json", dump(summary)}};
  std::ostringstream line;
  line << "fitted orders:";
  for (double o : st.fitted_order) line << ' ' << num(o);
  out.summary = line.str();
  return out;
}

struct NamedPotential {
  std::string label;
  StepPotential V;
};

NamedPotential parse_potential(const std::string& text, int cells) {
  const auto w = words(text);
  require(!w.empty(), "empty broken_line.potential entry");
  auto arg = [&](std::size_t i, double fallback) {
    return w.size() > i ? parse_scalar(w[i]) : fallback;
  };
  if (w[0] == "square_well") {
    require(w.size() >= 2 && w.size() <= 3, "square_well takes depth [halfwidth]");
    const double hw = arg(2, 1.0);
    require(hw > 0.0 && hw <= 1.0, "square_well halfwidth must lie in (0, 1]");
    return {text, StepPotential::square_well(arg(1, 0.0), hw, cells)};
  }
  if (w[0] == "curvature_bump") {
    require(w.size() == 2, "curvature_bump takes kappa0");
    const double k0 = arg(1, 0.0);
    return {text, StepPotential::sample(
                      [k0](double s) {
                        const double k = k0 * cosine_bump(s);
                        return -0.25 * k * k;
                      },
                      -1.0, 1.0, cells)};
  }
  if (w[0] == "balanced") {
    require(w.size() == 4, "balanced takes C_n center halfwidth");
    return {text, resonant_balanced_potential(arg(1, 0), arg(2, 0), arg(3, 0), cells).V};
  }
  if (w[0] == "csv") {
    require(w.size() == 2, "csv takes a path");
    std::ifstream in(w[1]);
    if (!in) fail(ErrorCode::Io, "cannot open potential '" + w[1] + "'");
    return {text, StepPotential::from_nodal(read_potential_csv(in))};
  }
  fail(ErrorCode::InvalidInput, "unknown potential kind '" + w[0] + "'");
}

const char* kind_name(VertexCondition::Kind k) {
  switch (k) {
    case VertexCondition::Kind::Dirichlet: return "dirichlet";
    case VertexCondition::Kind::ScaledCoupling: return "scaled-coupling";
    case VertexCondition::Kind::Free: return "free";
  }
  return "";
}

struct BrokenPlan {
  std::vector<std::string> entries;
  int cells = 2000;
  std::vector<double> deltas, ks;
};

BrokenPlan plan_broken(const StudyConfig& c) {
  BrokenPlan p;
  p.entries = split(c.get("broken_line.potential", "square_well pi*pi"), ';');
  require(!p.entries.empty(), "broken_line.potential is empty");
  const long cells = c.get_int("broken_line.cells", 2000);
  require(cells >= 10 && cells <= 10000000, "broken_line.cells must lie in [10, 1e7]");
  p.cells = static_cast<int>(cells);
  p.deltas = positive_list(c, "broken_line.delta_list", {0.4, 0.2, 0.1});
  p.ks = positive_list(c, "broken_line.k_list", {0.1});
  return p;
}

StudyOutcome broken_line_study(const StudyConfig& c) {
  const auto plan = plan_broken(c);
  std::vector<NamedPotential> pots;
  for (const auto& e : plan.entries) pots.push_back(parse_potential(e, plan.cells));
  StudyOutcome out;
  std::ostringstream line;
  for (std::size_t i = 0; i < pots.size(); ++i) {
    const auto st = delta_convergence_study(pots[i].V, plan.deltas, plan.ks);
    const std::string tag = pots.size() == 1 ? "" : "_" + std::to_string(i);
    std::ostringstream csv, dat;
    write_delta_csv(csv, st);
    dat << "# delta max_deviation\n";
    for (std::size_t d = 0; d < plan.deltas.size(); ++d)
      dat << num(plan.deltas[d]) << ' ' << num(st.max_deviation[d]) << '\n';
    json j;
    j["resonant"] = st.resonance.resonant;
    j["mean_branch"] = st.limit.branch == MeanBranch::Zero ? "zero" : "nonzero";
    const bool coupled = st.limit.kind == VertexCondition::Kind::ScaledCoupling;
    j["c1"] = coupled ? json(st.limit.c1) : json(nullptr);
    j["c2"] = coupled ? json(st.limit.c2) : json(nullptr);
    j["potential"] = pots[i].label;
    j["kind"] = kind_name(st.limit.kind);
    j["mean"] = mean_potential(pots[i].V);
    j["exit_slope"] = st.resonance.exit_slope;
    j["slope_tol"] = st.resonance.slope_tol;
    if (coupled && st.limit.branch == MeanBranch::Zero) j["W"] = st.limit.W;
    j["max_deviation"] = st.max_deviation;
    j["fitted_rate"] = st.fitted_rate;
    out.artifacts.push_back({"delta" + tag + ".csv", csv.str()});
    out.artifacts.push_back({"delta" + tag + ".dat", dat.str()});
    out.artifacts.push_back({"classification" + tag + ".json", dump(j)});
    line << (i ? "; " : "") << pots[i].label << ": " << kind_name(st.limit.kind);
  }
  out.summary = line.str();
  return out;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

StudyOutcome gamma_study(const StudyConfig& c) {
  const auto families = words(c.get("gamma.family", "perturbation"));
  require(!families.empty(), "gamma.family is empty");
  for (const auto& f : families)
    require(f == "perturbation" || f == "penalization" || f == "oscillation",
            "unknown gamma.family '" + f + "'");
  const long dim = c.get_int("gamma.dim", 12);
  require(dim >= 2 && dim <= 400, "gamma.dim must lie in [2, 400]");
  const auto eps = positive_list(c, "gamma.eps_list", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
  for (std::size_t i = 1; i < eps.size(); ++i)
    require(eps[i] < eps[i - 1], "gamma.eps_list must be strictly decreasing");
  const double lam = c.get_scalar("gamma.lam", 1.0);
  require(lam > 0.0, "gamma.lam must be positive");
  const long samples = c.get_int("gamma.samples", 20);
  require(samples >= 0, "gamma.samples must be non-negative");
  const double tol = c.get_scalar("gamma.tol", 1e-2);
  require(tol > 0.0, "gamma.tol must be positive");
  const long instances = c.get_int("gamma.instances", 1);
  require(instances >= 1 && instances <= 100000, "gamma.instances must be positive");
  const std::uint64_t seed = seed_of(c);

  json list = json::array();
  bool all_agree = true;
  double worst_identity = 0.0, worst_gap_attained = 0.0, min_gap_subset = INFINITY;
  std::ostringstream dat;
  dat << "# eps min_deviation resolvent_deviation\n";
  for (long i = 0; i < instances; ++i) {
    const std::string fam = families[static_cast<std::size_t>(i) % families.size()];
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const int d = instances == 1 ? static_cast<int>(dim)
                                 : 2 + static_cast<int>(splitmix(s) % static_cast<std::uint64_t>(dim - 1));
    const auto seq = make_family(fam, d, eps, s);
    const auto smp = sample_vectors(d, static_cast<int>(samples), splitmix(s + 1));
    const auto rep = check_equivalence_iv_v(seq, lam, smp, tol);

    std::mt19937_64 rng(splitmix(s + 2));
    std::normal_distribution<double> nd;
    Eigen::VectorXd eta(d), zeta(d);
    for (int k = 0; k < d; ++k) eta(k) = nd(rng);
    for (int k = 0; k < d; ++k) zeta(k) = nd(rng);
    zeta = seq.P0 * zeta;
    const auto ident = minimizer_identity(seq.limit, seq.P0, eta);
    auto with = smp;
    with.push_back(zeta);
    const auto sup_in = sup_representation(seq.limit, seq.P0, zeta, with);
    const auto sup_out = sup_representation(seq.limit, seq.P0, zeta, smp);
    const auto conv = minimizer_convergence(seq, lam, eta);
    const auto mono = check_monotone(seq, lam);

    all_agree = all_agree && rep.agree;
    worst_identity = std::max(worst_identity, ident.residual);
    worst_gap_attained = std::max(worst_gap_attained, std::abs(sup_in.gap));
    min_gap_subset = std::min(min_gap_subset, sup_out.gap);
    json j;
    j["family"] = fam;
    j["seed"] = s;
    j["dim"] = d;
    j["minima_converge"] = rep.minima_converge;
    j["resolvents_converge"] = rep.resolvents_converge;
    j["agree"] = rep.agree;
    j["min_rate"] = rep.min_rate;
    j["resolvent_rate"] = rep.resolvent_rate;
    j["identity_residual"] = ident.residual;
    j["sup_gap_attained"] = sup_in.gap;
    j["sup_gap_subset"] = sup_out.gap;
    j["minimizer_rate"] = conv.rate;
    j["minimizer_distance_last"] = conv.distance.back();
    j["monotone_consistent"] = mono.consistent;
    list.push_back(j);
    if (i == 0)
      for (std::size_t k = 0; k < eps.size(); ++k)
        dat << num(eps[k]) << ' ' << num(rep.min_deviation[k]) << ' ' << num(rep.resolvent_deviation[k]) << '\n';
  }
  json summary;
  summary["command"] = "gamma-lab";
  summary["all_agree"] = all_agree;
  summary["max_identity_residual"] = worst_identity;
  summary["max_attained_gap"] = worst_gap_attained;
  summary["min_subset_gap"] = min_gap_subset;
  summary["instances"] = list;
  StudyOutcome out;
  out.artifacts = {{"gamma.json", dump(summary)}, {"gamma.dat", dat.str()}};
  out.summary = std::string("iv/v agree on all instances: ") + (all_agree ? "yes" : "no");
  return out;
}

StudyOutcome invariants_study(const StudyConfig& c) {
  const auto curve = plan_curve(c);
  const auto plan = plan_section(c, false);
  const auto eps = positive_list(c, "tube.eps_list", {0.2, 0.1, 0.05});
  const auto bplan = plan_broken(c);
  std::vector<NamedPotential> pots;
  for (const auto& e : bplan.entries) pots.push_back(parse_potential(e, bplan.cells));

  json j;
  j["command"] = "invariants";

  const auto frame = build_frame(curve);
  double frame_err = 0.0;
  for (std::size_t i = 0; i < frame.T.size(); ++i) {
    Mat3 F;
    F << frame.T[i].transpose(), frame.N[i].transpose(), frame.B[i].transpose();
    frame_err = std::max(frame_err, (F * F.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  j["frame_orthonormality"] = frame_err;

  const auto mesh = CrossSectionMesh::build(plan.shapes.front(), plan.h);
  double det_err = 0.0;
  for (double e : eps)
    for (std::size_t i = 0; i < curve.size(); i += 5)
      for (std::size_t k = 0; k < mesh.size(); k += 7) {
        const auto m = metric_at(curve, e, curve.s()[i], mesh.nodes()[k]);
        const double ref = std::pow(e, 4) * m.beta * m.beta;
        det_err = std::max(det_err, std::abs(m.det_G - ref) / ref);
      }
  j["det_G_relative"] = det_err;

  // Twist split between torsion and section rotation; only tau - alpha_dot may matter.
  const double shift = 0.75;
  const std::size_t n = curve.size();
  std::vector<double> tau_b(n), ad_b(n), alpha_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    tau_b[i] = curve.tau()[i] + shift;
    ad_b[i] = curve.alpha_dot()[i] + shift;
    alpha_b[i] = curve.alpha()[i] + shift * (curve.s()[i] - curve.s_min());
  }
  const auto split_curve = CurveSpec::from_samples(curve.s(), curve.kappa(), tau_b, alpha_b, ad_b);
  const auto pa = effective_potential(curve, 1.0);
  const auto pb = effective_potential(split_curve, 1.0);
  double gauge_pot = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    gauge_pot = std::max(gauge_pot, std::abs(pa.values[i] - pb.values[i]) / std::max(1.0, std::abs(pa.values[i])));
  j["gauge_potential"] = gauge_pot;
  // The tube form depends on alpha through the curvature direction, so the
  // form-level check uses the straight version of the curve.
  std::vector<double> zero(n, 0.0);
  const auto sa = CurveSpec::from_samples(curve.s(), zero, curve.tau(), curve.alpha(), curve.alpha_dot());
  const auto sb = CurveSpec::from_samples(curve.s(), zero, tau_b, alpha_b, ad_b);
  const auto spec = dirichlet_eigenpairs(mesh, 2);
  const auto fa = assemble_form(sa, mesh, spec, eps.front(), 0);
  const auto fb = assemble_form(sb, mesh, spec, eps.front(), 0);
  const double scale = std::max(1.0, fa.stiffness.coeffs().cwiseAbs().maxCoeff());
  j["gauge_form"] = linalg::SparseMatrix(fa.stiffness - fb.stiffness).coeffs().cwiseAbs().maxCoeff() / scale;

  double unitarity = 0.0;
  bool covariant = true;
  json classes = json::array();
  for (const auto& p : pots) {
    const bool base = detect_resonance(p.V).resonant;
    json cl;
    cl["potential"] = p.label;
    cl["resonant"] = base;
    json scaled = json::array();
    for (double d : bplan.deltas) {
      const auto sv = scale_potential(p.V, d);
      const bool r = detect_resonance(sv.values).resonant;
      scaled.push_back(r);
      covariant = covariant && r == base;
      for (double k : bplan.ks) {
        const auto s = scattering_1d(sv.values, k);
        unitarity = std::max(unitarity, std::abs(std::norm(s.r) + std::norm(s.t) - 1.0));
      }
    }
    cl["scaled_resonant"] = scaled;
    classes.push_back(cl);
  }
  j["unitarity"] = unitarity;
  j["resonance_scale_covariant"] = covariant;
  j["classes"] = classes;

  StudyOutcome out;
  out.artifacts = {{"invariants.json", dump(j)}};
  out.summary = "frame " + num(frame_err) + ", det G " + num(det_err) + ", unitarity " + num(unitarity);
  return out;
}

}  // namespace

std::vector<std::string> study_commands() { return kCommands; }

StudyOutcome compute_study(const std::string& command, const StudyConfig& config) {
  std::string cmd = command.empty() ? config.get("study.command") : command;
  require(!cmd.empty(), "no command given and study.command is unset");
  if (!command.empty() && config.has("study.command"))
    require(config.get("study.command") == command,
            "config is for '" + config.get("study.command") + "', not '" + command + "'");
  threads_of(config);
  seed_of(config);
  StudyOutcome out;
  if (cmd == "cross-section") out = cross_section_study(config);
  else if (cmd == "effective") out = effective_study(config);
  else if (cmd == "tube") out = tube_study(config);
  else if (cmd == "broken-line") out = broken_line_study(config);
  else if (cmd == "gamma-lab") out = gamma_study(config);
  else if (cmd == "invariants") out = invariants_study(config);
  else fail(ErrorCode::InvalidInput, "unknown command '" + cmd + "'");
  out.command = cmd;
  return out;
}

std::string manifest_json(const StudyOutcome& outcome, const StudyConfig& config) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config.hash()));
  json j;
  j["version"] = version_string();
  j["command"] = outcome.command;
  j["config_hash"] = std::string("fnv1a64:") + hex;
  j["seed"] = seed_of(config);
  j["threads"] = threads_of(config);
  json cfg = json::object();
  for (const auto& [k, v] : config.values()) cfg[k] = v;
  j["config"] = cfg;
  json names = json::array();
  for (const auto& a : outcome.artifacts) names.push_back(a.name);
  j["artifacts"] = names;
  j["eigen"] = EIGEN_WORLD_VERSION * 10000 + EIGEN_MAJOR_VERSION * 100 + EIGEN_MINOR_VERSION;
  return dump(j);
}

StudyOutcome run_study(const std::string& command, const StudyConfig& config,
                       const std::string& out_dir) {
  require(!out_dir.empty(), "output directory is empty");
  auto outcome = compute_study(command, config);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create '" + out_dir + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    const fs::path p = fs::path(out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) fail(ErrorCode::Io, "cannot write '" + p.string() + "'");
  };
  for (const auto& a : outcome.artifacts) write(a.name, a.content);
  write("run_manifest.json", manifest_json(outcome, config));
  return outcome;
}

}  // namespace qtube
