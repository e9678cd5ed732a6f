#include "qtube/effective_operator.hpp"

#include "format.hpp"
#include "qtube/error.hpp"
#include "qtube/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace qtube {

EffectivePotential effective_potential(const CurveSpec& curve, double c_n, int mode) {
  require(std::isfinite(c_n) && c_n >= -1e-12, "twist coefficient must be non-negative");
  EffectivePotential pot;
  pot.s = curve.s();
  pot.c_n = c_n;
  pot.mode = mode;
  pot.sup_kappa = curve.sup_kappa();
  pot.values.resize(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double g = curve.twist(i);
    const double k = curve.kappa()[i];
    pot.values[i] = g * g * c_n - 0.25 * k * k;
  }
  return pot;
}

EffectivePotential effective_potential(const CurveSpec& curve, double c_n, int mode,
                                       const Eigen::Matrix2d& curvature_form) {
  require(curvature_form.allFinite(), "curvature form must be finite");
  EffectivePotential pot = effective_potential(curve, c_n, mode);
  pot.curvature_form = 0.5 * (curvature_form + curvature_form.transpose());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double g = curve.twist(i);
    const double k = curve.kappa()[i];
    const Vec2 z(std::cos(curve.alpha()[i]), std::sin(curve.alpha()[i]));
    pot.values[i] = g * g * c_n + k * k * z.dot(pot.curvature_form * z);
  }
  return pot;
}

EffectivePotential potential_from_samples(std::vector<double> s, std::vector<double> values) {
  require(s.size() >= 3 && values.size() == s.size(), "potential needs matching s and V columns");
  const double h = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
  require(h > 0.0, "potential grid must increase");
  const double scale = std::max({1.0, std::abs(s.front()), std::abs(s.back())});
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(std::isfinite(s[i]) && std::isfinite(values[i]), "potential samples must be finite");
    require(std::abs(s[i] - (s.front() + h * static_cast<double>(i))) <= 1e-12 * scale,
            "potential grid must be uniform");
  }
  EffectivePotential pot;
  pot.s = std::move(s);
  pot.values = std::move(values);
  return pot;
}

EffectivePotential extend_potential(const EffectivePotential& pot, double a, double b) {
  require(pot.s.size() >= 2, "potential grid too small");
  const double h = pot.h();
  const int left = std::max(0, static_cast<int>(std::ceil((pot.s.front() - a) / h - 1e-9)));
  const int right = std::max(0, static_cast<int>(std::ceil((b - pot.s.back()) / h - 1e-9)));
  EffectivePotential out = pot;
  const std::size_t n = pot.s.size() + static_cast<std::size_t>(left + right);
  out.s.resize(n);
  out.values.assign(n, 0.0);
  const double s0 = pot.s.front() - left * h;
  for (std::size_t i = 0; i < n; ++i) out.s[i] = s0 + h * static_cast<double>(i);
  std::copy(pot.values.begin(), pot.values.end(), out.values.begin() + left);
  return out;
}

Spectrum1D schrodinger_eigen(const EffectivePotential& pot, int j_max) {
  const std::size_t n = pot.s.size();
  require(n >= 3, "potential grid too small");
  const int interior = static_cast<int>(n) - 2;
  require(j_max >= 1 && j_max <= interior, "j_max exceeds the number of interior nodes");
  const double h = pot.h();
  const double ih2 = 1.0 / (h * h);
  Eigen::VectorXd diag(interior), off(std::max(interior - 1, 0));
  for (int i = 0; i < interior; ++i) diag[i] = 2.0 * ih2 + pot.values[static_cast<std::size_t>(i) + 1];
  off.setConstant(-ih2);

  Spectrum1D out;
  out.mu = linalg::tridiagonal_lowest(diag, off, j_max);
  const double vmin = *std::min_element(pot.values.begin(), pot.values.end());
  const double k_top = std::sqrt(std::max(out.mu[j_max - 1] - vmin, 0.0));
  if (k_top > std::numbers::pi / (4.0 * h))
    fail(ErrorCode::Resolution, "requested modes are under-resolved by the grid");

  out.a = pot.s.front();
  out.b = pot.s.back();
  out.s.assign(pot.s.begin() + 1, pot.s.end() - 1);
  out.w.resize(interior, j_max);
  for (int j = 0; j < j_max; ++j) {
    Eigen::VectorXd v = linalg::tridiagonal_eigenvector(diag, off, out.mu[j]);
    v /= std::sqrt(v.squaredNorm() * h);
    const double big = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) >= (1.0 - 1e-6) * big) {
        if (v[i] < 0.0) v = -v;
        break;
      }
    out.w.col(j) = v;
  }
  return out;
}

BoundStateReport bound_state_exists(const EffectivePotential& pot, double domain_halfwidth) {
  require(pot.s.size() >= 3, "potential grid too small");
  require(domain_halfwidth > 0.0, "domain half-width must be positive");
  double vmax = 0.0;
  for (double v : pot.values) vmax = std::max(vmax, std::abs(v));
  require(std::abs(pot.values.front()) <= 1e-12 * vmax && std::abs(pot.values.back()) <= 1e-12 * vmax,
          "potential must vanish at the grid ends");
  const double c = 0.5 * (pot.s.front() + pot.s.back());
  require(c - domain_halfwidth <= pot.s.front() + 1e-12 && c + domain_halfwidth >= pot.s.back() - 1e-12,
          "domain must contain the potential grid");

  BoundStateReport rep;
  const auto lowest = [&](double r) {
    return schrodinger_eigen(extend_potential(pot, c - r, c + r), 1).mu[0];
  };
  rep.lowest = lowest(domain_halfwidth);
  rep.lowest_2r = lowest(2.0 * domain_halfwidth);
  const bool a = rep.lowest < -rep.tol, b = rep.lowest_2r < -rep.tol;
  if (a != b)
    fail(ErrorCode::Inconclusive, "bound-state test changes under R -> 2R; enlarge the domain");
  rep.exists = a;
  return rep;
}

void write_potential_csv(std::ostream& out, const EffectivePotential& pot) {
  out << "s,V\n";
  for (std::size_t i = 0; i < pot.s.size(); ++i)
    out << detail::num(pot.s[i]) << ',' << detail::num(pot.values[i]) << '\n';
}

EffectivePotential read_potential_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "potential CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "s,V", "potential CSV header must be 's,V'");
  std::vector<double> s, v;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    double a = 0, b = 0;
    char comma = 0;
    require(static_cast<bool>(row >> a >> comma >> b) && comma == ',', "malformed potential row: " + line);
    s.push_back(a);
    v.push_back(b);
  }
  return potential_from_samples(std::move(s), std::move(v));
}

void write_spectrum_csv(std::ostream& out, const Spectrum1D& spec) {
  out << "j,mu_j\n";
  for (Eigen::Index j = 0; j < spec.mu.size(); ++j) out << j << ',' << detail::num(spec.mu[j]) << '\n';
}

}  // namespace qtube
