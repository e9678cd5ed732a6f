#pragma once

// Reference computations used only by the tests. None of them call into the
// library's numerics: closed forms, brute-force quadrature and plain ODE solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

// Eigenvalues of the 5-point Dirichlet Laplacian on an a x b rectangle with
// spacings a/nx, b/ny, sorted ascending.
inline std::vector<double> discrete_rectangle_eigs(double a, double b, int nx, int ny, int count) {
  const double hx = a / nx, hy = b / ny;
  std::vector<double> out;
  for (int p = 1; p < nx; ++p)
    for (int q = 1; q < ny; ++q) {
      const double sx = std::sin(p * pi * hx / (2 * a)), sy = std::sin(q * pi * hy / (2 * b));
      out.push_back(4 / (hx * hx) * sx * sx + 4 / (hy * hy) * sy * sy);
    }
  std::sort(out.begin(), out.end());
  out.resize(std::min<std::size_t>(out.size(), static_cast<std::size_t>(count)));
  return out;
}

// Continuum Dirichlet eigenvalues (p pi / a)^2 + (q pi / b)^2.
inline std::vector<double> rectangle_eigs(double a, double b, int count) {
  std::vector<double> out;
  for (int p = 1; p <= count + 1; ++p)
    for (int q = 1; q <= count + 1; ++q) out.push_back(std::pow(p * pi / a, 2) + std::pow(q * pi / b, 2));
  std::sort(out.begin(), out.end());
  out.resize(static_cast<std::size_t>(count));
  return out;
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// First zero of J_0, from its series.
inline double bessel_j0(double x) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 80; ++k) {
    term *= -(x * x / 4.0) / (k * k);
    sum += term;
  }
  return sum;
}

inline double first_j0_zero() { return bisect(bessel_j0, 2.0, 3.0); }

// Continuum C_0 of the a x b rectangle centred at the origin by a tensor
// Gauss-Legendre rule on each cell of an m x m partition.
inline double rectangle_c0(double a, double b, int m = 200) {
  const double g = std::sqrt(3.0 / 5.0);
  const double nodes[3] = {-g, 0.0, g}, weights[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
  const double norm = 2.0 / std::sqrt(a * b);
  double sum = 0.0;
  const double dx = a / m, dy = b / m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
          const double x = -a / 2 + dx * (i + 0.5 + 0.5 * nodes[p]);
          const double y = -b / 2 + dy * (j + 0.5 + 0.5 * nodes[q]);
          const double ux = -norm * (pi / a) * std::sin(pi * x / a) * std::cos(pi * y / b);
          const double uy = -norm * (pi / b) * std::cos(pi * x / a) * std::sin(pi * y / b);
          const double d = -y * ux + x * uy;
          sum += weights[p] * weights[q] * 0.25 * dx * dy * d * d;
        }
  return sum;
}

// Eigenvalues of -w'' on (0, L) for the 3-point scheme with n interior nodes.
inline std::vector<double> discrete_free_1d(double L, int n, int count) {
  const double h = L / (n + 1);
  std::vector<double> out;
  for (int j = 1; j <= count; ++j) {
    const double s = std::sin(j * pi * h / (2 * L));
    out.push_back(4 / (h * h) * s * s);
  }
  return out;
}

// Classical RK4 for y'' = (V(s) - E) y on [a, b] with n steps, complex data.
struct Rk4Result {
  std::complex<double> y, dy;
};

inline Rk4Result rk4(const std::function<double(double)>& V, double E, double a, double b, int n,
                     std::complex<double> y, std::complex<double> dy) {
  const double h = (b - a) / n;
  auto f = [&](double s, std::complex<double> u, std::complex<double> du, std::complex<double>& ddu) {
    ddu = (V(s) - E) * u;
    (void)du;
  };
  for (int i = 0; i < n; ++i) {
    const double s = a + i * h;
    std::complex<double> a1, a2, a3, a4;
    f(s, y, dy, a1);
    const auto y2 = y + 0.5 * h * dy, d2 = dy + 0.5 * h * a1;
    f(s + 0.5 * h, y2, d2, a2);
    const auto y3 = y + 0.5 * h * d2, d3 = dy + 0.5 * h * a2;
    f(s + 0.5 * h, y3, d3, a3);
    const auto y4 = y + h * d3, d4 = dy + h * a3;
    f(s + h, y4, d4, a4);
    y += h / 6 * (dy + 2.0 * d2 + 2.0 * d3 + d4);
    dy += h / 6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  return {y, dy};
}

// Reflection and transmission for a potential supported in [a, b] by RK4 from the right.
inline std::pair<std::complex<double>, std::complex<double>> scattering(
    const std::function<double(double)>& V, double a, double b, double k, int n) {
  const std::complex<double> ik(0, k);
  // Integrate backwards by integrating forwards in the reflected variable.
  auto Vr = [&](double x) { return V(a + b - x); };
  const std::complex<double> yb = std::exp(ik * b);
  const auto r = rk4(Vr, k * k, a, b, n, yb, -ik * yb);
  const std::complex<double> ya = r.y, dya = -r.dy;
  const auto in = 0.5 * (ya + dya / ik) * std::exp(-ik * a);
  const auto out = 0.5 * (ya - dya / ik) * std::exp(ik * a);
  return {out / in, 1.0 / in};
}

// Zero-energy solution with psi = 1, psi' = 0 at a, sampled on n + 1 nodes.
inline std::vector<double> zero_energy_solution(const std::function<double(double)>& V, double a,
                                                double b, int n) {
  const double h = (b - a) / n;
  std::vector<double> out{1.0};
  std::complex<double> y = 1.0, dy = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto r = rk4(V, 0.0, a + i * h, a + (i + 1) * h, 1, y, dy);
    y = r.y;
    dy = r.dy;
    out.push_back(y.real());
  }
  return out;
}

// c1, c2 and W by nested trapezoid sums on the nodes of a zero-energy solution,
// O(N^2) per integral; psi is sup-normalized here.
struct VertexOracle {
  double c1 = 0, c2 = 0, W = 0, mean = 0;
};

inline VertexOracle vertex_quadrature(const std::function<double(double)>& V, double a, double b,
                                      int n, bool zero_branch) {
  auto psi = zero_energy_solution(V, a, b, n);
  double sup = 0;
  for (double p : psi) sup = std::max(sup, std::abs(p));
  for (double& p : psi) p /= sup;
  const double h = (b - a) / n;
  std::vector<double> s(n + 1), v(n + 1), w(n + 1, h);
  w.front() = w.back() = 0.5 * h;
  for (int i = 0; i <= n; ++i) {
    s[i] = a + i * h;
    v[i] = V(s[i]);
  }
  VertexOracle o;
  for (int i = 0; i <= n; ++i) {
    o.mean += w[i] * v[i];
    o.c2 += w[i] * s[i] * v[i] * psi[i];
  }
  o.c2 *= -0.5;
  std::vector<double> F(n + 1, 0.0);  // F(x) = int |x - y| V psi dy
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) F[i] += w[j] * std::abs(s[i] - s[j]) * v[j] * psi[j];
  if (!zero_branch) {
    double dbl = 0;
    for (int i = 0; i <= n; ++i) dbl += w[i] * v[i] * F[i];
    o.c1 = dbl / (2 * o.mean);
    return o;
  }
  double triple = 0, W = 0;
  for (int i = 0; i <= n; ++i) {
    double H = 0, K = 0;
    for (int j = 0; j <= n; ++j) {
      H += w[j] * std::abs(s[i] - s[j]) * v[j] * F[j];
      K += w[j] * std::abs(s[i] - s[j]) * v[j];
    }
    triple += w[i] * v[i] * H;
    W += w[i] * v[i] * K;
  }
  o.W = W;
  o.c1 = triple / (2 * W);
  return o;
}

// Minimizes z^T A z + eta^T z by cyclic coordinate descent (A symmetric positive definite).
inline Eigen::VectorXd coordinate_descent(const Eigen::MatrixXd& A, const Eigen::VectorXd& eta,
                                          int sweeps = 20000, double tol = 1e-15) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(eta.size());
  for (int it = 0; it < sweeps; ++it) {
    double change = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      // d/dz_i: 2 (A z)_i + eta_i = 0
      const double rest = A.row(i).dot(z) - A(i, i) * z(i);
      const double zi = -(eta(i) / 2 + rest) / A(i, i);
      change = std::max(change, std::abs(zi - z(i)));
      z(i) = zi;
    }
    if (change < tol) break;
  }
  return z;
}

}  // namespace oracle
