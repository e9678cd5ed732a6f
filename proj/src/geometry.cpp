#include "qtube/geometry.hpp"

#include "qtube/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace qtube {
namespace {

std::vector<double> derive_alpha_dot(const std::vector<double>& alpha, double h) {
  const std::size_t n = alpha.size();
  std::vector<double> d(n, 0.0);
  if (n == 2) {
    d[0] = d[1] = (alpha[1] - alpha[0]) / h;
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (alpha[i + 1] - alpha[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * alpha[0] + 4.0 * alpha[1] - alpha[2]) / (2.0 * h);
  d[n - 1] = (3.0 * alpha[n - 1] - 4.0 * alpha[n - 2] + alpha[n - 3]) / (2.0 * h);
  return d;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> uniform_grid(double a, double b, int intervals) {
  require(intervals >= 1, "curve preset needs at least one interval");
  require(b > a, "curve preset needs positive length");
  std::vector<double> s(static_cast<std::size_t>(intervals) + 1);
  const double h = (b - a) / intervals;
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = a + h * static_cast<double>(i);
  s.back() = b;
  return s;
}

// Cubic (4-point Lagrange) value at the midpoint of [i, i+1].
double midpoint_value(const std::vector<double>& f, std::size_t i) {
  const std::size_t n = f.size();
  if (n < 4) return 0.5 * (f[i] + f[i + 1]);
  if (i == 0) return (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0;
  if (i + 2 == n)
    return (5.0 * f[n - 1] + 15.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) / 16.0;
  return (-f[i - 1] + 9.0 * f[i] + 9.0 * f[i + 1] - f[i + 2]) / 16.0;
}

struct FrameState {
  Vec3 T, N, B, X;
};

FrameState rhs(const FrameState& y, double kappa, double tau) {
  return {kappa * y.N, -kappa * y.T + tau * y.B, -tau * y.N, y.T};
}

FrameState axpy(const FrameState& y, double a, const FrameState& k) {
  return {y.T + a * k.T, y.N + a * k.N, y.B + a * k.B, y.X + a * k.X};
}

}  // namespace

double cosine_bump(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * x);
  return c * c;
}

CurveSpec CurveSpec::from_samples(std::vector<double> s, std::vector<double> kappa,
                                  std::vector<double> tau, std::vector<double> alpha,
                                  std::optional<std::vector<double>> alpha_dot) {
  const std::size_t n = s.size();
  require(n >= 2, "curve needs at least two samples");
  require(kappa.size() == n && tau.size() == n && alpha.size() == n,
          "curve columns have different lengths");
  require(all_finite(s) && all_finite(kappa) && all_finite(tau) && all_finite(alpha),
          "curve samples must be finite");

  const double h = (s.back() - s.front()) / static_cast<double>(n - 1);
  require(h > 0.0, "arc-length grid must be strictly increasing");
  const double scale = std::max({1.0, std::abs(s.front()), std::abs(s.back())});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    require(s[i + 1] > s[i], "arc-length grid must be strictly increasing");
    const double expected = s.front() + h * static_cast<double>(i);
    require(std::abs(s[i] - expected) <= 1e-12 * scale, "arc-length grid must be uniform");
  }

  CurveSpec c;
  c.h_ = h;
  if (alpha_dot) {
    require(alpha_dot->size() == n, "alpha_dot column has wrong length");
    require(all_finite(*alpha_dot), "alpha_dot samples must be finite");
    c.alpha_dot_ = std::move(*alpha_dot);
  } else {
    c.alpha_dot_ = derive_alpha_dot(alpha, h);
    c.alpha_dot_derived_ = true;
  }
  c.s_ = std::move(s);
  c.kappa_ = std::move(kappa);
  c.tau_ = std::move(tau);
  c.alpha_ = std::move(alpha);

  // Large twist is accepted but flagged: the limit operator domain is not modeled.
  double sup_twist = 0.0;
  for (std::size_t i = 0; i < n; ++i) sup_twist = std::max(sup_twist, std::abs(c.twist(i)));
  c.twist_flagged_ = sup_twist * c.h_ > 1.0;
  return c;
}

CurveSpec CurveSpec::from_stream(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
    std::istringstream ls(line);
    if (header.empty()) {
      std::string tok;
      while (ls >> tok) header.push_back(tok);
      if (header.empty()) continue;
      const bool ok4 = header.size() == 4;
      const bool ok5 = header.size() == 5 && header[4] == "alpha_dot";
      require((ok4 || ok5) && header[0] == "s" && header[1] == "kappa" && header[2] == "tau" &&
                  header[3] == "alpha",
              "curve file header must be 's kappa tau alpha [alpha_dot]'");
      cols.resize(header.size());
      continue;
    }
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) fail(ErrorCode::InvalidInput, "curve file: bad number on line " + std::to_string(lineno));
    if (row.empty()) continue;
    require(row.size() == cols.size(),
            "curve file: wrong column count on line " + std::to_string(lineno));
    for (std::size_t k = 0; k < row.size(); ++k) cols[k].push_back(row[k]);
  }
  require(!header.empty(), "curve file: missing header");
  std::optional<std::vector<double>> ad;
  if (cols.size() == 5) ad = std::move(cols[4]);
  return from_samples(std::move(cols[0]), std::move(cols[1]), std::move(cols[2]),
                      std::move(cols[3]), std::move(ad));
}

CurveSpec CurveSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open curve file '" + path + "'");
  return from_stream(in);
}

void CurveSpec::write(std::ostream& out) const {
  out << "s kappa tau alpha alpha_dot\n" << std::setprecision(17);
  for (std::size_t i = 0; i < size(); ++i)
    out << s_[i] << ' ' << kappa_[i] << ' ' << tau_[i] << ' ' << alpha_[i] << ' '
        << alpha_dot_[i] << '\n';
}

CurveSpec CurveSpec::straight(double length, int intervals) {
  auto s = uniform_grid(0.0, length, intervals);
  std::vector<double> z(s.size(), 0.0);
  return from_samples(s, z, z, z, z);
}

CurveSpec CurveSpec::circular_arc(double length, double kappa0, int intervals) {
  auto s = uniform_grid(0.0, length, intervals);
  std::vector<double> z(s.size(), 0.0), k(s.size(), kappa0);
  return from_samples(s, k, z, z, z);
}

CurveSpec CurveSpec::bump_curvature(double length, double kappa0, double center,
                                    double halfwidth, int intervals) {
  require(halfwidth > 0.0, "bump halfwidth must be positive");
  auto s = uniform_grid(0.0, length, intervals);
  std::vector<double> z(s.size(), 0.0), k(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) k[i] = kappa0 * cosine_bump((s[i] - center) / halfwidth);
  return from_samples(s, k, z, z, z);
}

CurveSpec CurveSpec::helix(double length, double kappa0, double tau0, int intervals) {
  auto s = uniform_grid(0.0, length, intervals);
  std::vector<double> z(s.size(), 0.0), k(s.size(), kappa0), t(s.size(), tau0);
  return from_samples(s, k, t, z, z);
}

CurveSpec CurveSpec::twisted_straight(double length, double amp, double center,
                                      double halfwidth, int intervals) {
  require(halfwidth > 0.0, "bump halfwidth must be positive");
  auto s = uniform_grid(0.0, length, intervals);
  const std::size_t n = s.size();
  std::vector<double> z(n, 0.0), ad(n), a(n);
  // alpha is the running integral of alpha_dot; closed form of the cos^2 bump.
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp((s[i] - center) / halfwidth, -1.0, 1.0);
    ad[i] = amp * cosine_bump(x);
    a[i] = amp * halfwidth * 0.5 * ((x + 1.0) + std::sin(pi * x) / pi);
  }
  return from_samples(s, z, z, a, ad);
}

double CurveSpec::sup_kappa() const {
  double m = 0.0;
  for (double k : kappa_) m = std::max(m, std::abs(k));
  return m;
}

CurveSpec::Sample CurveSpec::at(double s) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(s_.back()));
  require(s >= s_.front() - tol && s <= s_.back() + tol, "arc length outside curve grid");
  const double x = std::clamp((s - s_.front()) / h_, 0.0, static_cast<double>(size() - 1));
  std::size_t i = std::min(static_cast<std::size_t>(x), size() - 2);
  const double t = x - static_cast<double>(i);
  auto lerp = [&](const std::vector<double>& f) { return (1.0 - t) * f[i] + t * f[i + 1]; };
  return {lerp(kappa_), lerp(tau_), lerp(alpha_), lerp(alpha_dot_)};
}

FrameField build_frame(const CurveSpec& curve) {
  const std::size_t n = curve.size();
  const double h = curve.h();
  const auto& k = curve.kappa();
  const auto& t = curve.tau();

  FrameField f;
  f.T.resize(n);
  f.N.resize(n);
  f.B.resize(n);
  f.position.resize(n);
  FrameState y{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), Vec3::Zero()};
  auto store = [&](std::size_t i) {
    f.T[i] = y.T;
    f.N[i] = y.N;
    f.B[i] = y.B;
    f.position[i] = y.X;
  };
  store(0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double km = midpoint_value(k, i), tm = midpoint_value(t, i);
    const FrameState k1 = rhs(y, k[i], t[i]);
    const FrameState k2 = rhs(axpy(y, 0.5 * h, k1), km, tm);
    const FrameState k3 = rhs(axpy(y, 0.5 * h, k2), km, tm);
    const FrameState k4 = rhs(axpy(y, h, k3), k[i + 1], t[i + 1]);
    y.T += h / 6.0 * (k1.T + 2.0 * k2.T + 2.0 * k3.T + k4.T);
    y.N += h / 6.0 * (k1.N + 2.0 * k2.N + 2.0 * k3.N + k4.N);
    y.X += h / 6.0 * (k1.X + 2.0 * k2.X + 2.0 * k3.X + k4.X);
    y.T.normalize();
    y.N -= y.N.dot(y.T) * y.T;
    y.N.normalize();
    y.B = y.T.cross(y.N);
    store(i + 1);
  }

  f.N_alpha.resize(n);
  f.B_alpha.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ca = std::cos(curve.alpha()[i]), sa = std::sin(curve.alpha()[i]);
    f.N_alpha[i] = ca * f.N[i] - sa * f.B[i];
    f.B_alpha[i] = sa * f.N[i] + ca * f.B[i];
  }
  return f;
}

double beta_weight(const CurveSpec& curve, double eps, double s, const Vec2& y) {
  const auto c = curve.at(s);
  return 1.0 - eps * c.kappa * (y[0] * std::cos(c.alpha) + y[1] * std::sin(c.alpha));
}

MetricSample metric_at(const CurveSpec& curve, double eps, double s, const Vec2& y,
                       JacobianConvention convention) {
  const auto c = curve.at(s);
  const double ca = std::cos(c.alpha), sa = std::sin(c.alpha);
  const double g = c.tau - c.alpha_dot;
  const double e2 = eps * eps;

  MetricSample m;
  m.beta = 1.0 - eps * c.kappa * (y[0] * ca + y[1] * sa);
  m.rho = -e2 * y[1] * g;
  m.sigma = e2 * y[0] * g;
  m.G << m.beta * m.beta + (m.rho * m.rho + m.sigma * m.sigma) / e2, m.rho, m.sigma,
      m.rho, e2, 0.0,
      m.sigma, 0.0, e2;

  // e_1 = beta T + eps g (y1 B_alpha - y2 N_alpha), e_2 = eps N_alpha, e_3 = eps B_alpha.
  const double sgn = convention == JacobianConvention::Derived ? 1.0 : -1.0;
  m.J << m.beta, eps * g * (y[0] * sa - y[1] * ca), eps * g * (y[1] * sa + y[0] * ca),
      0.0, sgn * eps * ca, -sgn * eps * sa,
      0.0, eps * sa, eps * ca;
  if (convention == JacobianConvention::Flipped) {
    m.G = m.J * m.J.transpose();
    m.rho = m.G(0, 1);
    m.sigma = m.G(0, 2);
  }
  m.det_G = m.G.determinant();
  return m;
}

TubeDiagnostics validate_tube(const CurveSpec& curve, double eps, double section_radius) {
  require(eps >= 0.0 && std::isfinite(eps), "eps must be finite and non-negative");
  require(section_radius > 0.0, "section radius must be positive");
  TubeDiagnostics d;
  d.min_beta = 1.0;
  d.s_at_min = curve.s_min();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double b = 1.0 - eps * std::abs(curve.kappa()[i]) * section_radius;
    if (b < d.min_beta) {
      d.min_beta = b;
      d.s_at_min = curve.s()[i];
    }
  }
  d.ok = d.min_beta >= TubeDiagnostics::margin;
  return d;
}

}  // namespace qtube
