#include "qtube/broken_line.hpp"

#include "format.hpp"
#include "qtube/error.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace qtube {

StepPotential StepPotential::sample(const std::function<double(double)>& f, double a, double b,
                                    int cells) {
  require(cells > 0 && b > a, "step potential needs cells > 0 and b > a");
  StepPotential V;
  V.s0 = a;
  V.h = (b - a) / cells;
  V.values.resize(static_cast<std::size_t>(cells));
  for (std::size_t c = 0; c < V.values.size(); ++c) V.values[c] = f(V.midpoint(c));
  return V;
}

StepPotential StepPotential::from_nodal(const EffectivePotential& pot) {
  require(pot.s.size() >= 2 && pot.s.size() == pot.values.size(),
          "nodal potential needs at least two samples");
  StepPotential V;
  V.s0 = pot.s.front();
  V.h = pot.h();
  V.values.resize(pot.s.size() - 1);
  for (std::size_t c = 0; c + 1 < pot.s.size(); ++c)
    V.values[c] = 0.5 * (pot.values[c] + pot.values[c + 1]);
  return V;
}

StepPotential StepPotential::square_well(double depth, double halfwidth, int cells) {
  return sample([depth](double) { return -depth; }, -halfwidth, halfwidth, cells);
}

double StepPotential::l1_norm() const {
  double sum = 0.0;
  for (double v : values) sum += std::abs(v);
  return sum * h;
}

ScaledPotential scale_potential(const StepPotential& base, double delta) {
  require(delta > 0.0 && std::isfinite(delta), "delta must be positive");
  const double slack = 1e-12;
  for (std::size_t c = 0; c < base.cells(); ++c) {
    if (base.values[c] == 0.0) continue;
    const double lo = base.s0 + base.h * static_cast<double>(c);
    require(lo >= -1.0 - slack && lo + base.h <= 1.0 + slack,
            "base potential must vanish outside [-1, 1]");
  }
  ScaledPotential out;
  out.delta = delta;
  out.base = base;
  out.values.s0 = base.s0 * delta;
  out.values.h = base.h * delta;
  out.values.values.resize(base.cells());
  const double f = 1.0 / (delta * delta);
  for (std::size_t c = 0; c < base.cells(); ++c) out.values.values[c] = base.values[c] * f;
  return out;
}

CurveSpec scale_curve(const CurveSpec& curve, double delta) {
  require(delta > 0.0 && std::isfinite(delta), "delta must be positive");
  const std::size_t n = curve.size();
  std::vector<double> s(n), kappa(n), tau(n), alpha_dot(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = curve.s()[i] * delta;
    kappa[i] = curve.kappa()[i] / delta;
    tau[i] = curve.tau()[i] / delta;
    alpha_dot[i] = curve.alpha_dot()[i] / delta;
  }
  return CurveSpec::from_samples(std::move(s), std::move(kappa), std::move(tau), curve.alpha(),
                                 std::move(alpha_dot));
}

double bend_angle(const CurveSpec& curve) {
  const auto& k = curve.kappa();
  const auto& s = curve.s();
  double theta = 0.0;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) theta += 0.5 * (k[i] + k[i + 1]) * (s[i + 1] - s[i]);
  return theta;
}

std::array<double, 2> zero_energy_step(double V, double h, double psi, double dpsi) {
  const double q = std::sqrt(std::abs(V));
  const double x = q * h;
  double c, sq, qs;  // cos-like, sin-like / q, q * sin-like with sign of V folded in
  if (std::abs(x) < 1e-4) {
    const double x2 = V * h * h;
    c = 1.0 + x2 / 2.0 + x2 * x2 / 24.0;
    sq = h * (1.0 + x2 / 6.0 + x2 * x2 / 120.0);
    qs = V * sq;
  } else if (V > 0.0) {
    c = std::cosh(x);
    sq = std::sinh(x) / q;
    qs = q * std::sinh(x);
  } else {
    c = std::cos(x);
    sq = std::sin(x) / q;
    qs = -q * std::sin(x);
  }
  return {c * psi + sq * dpsi, qs * psi + c * dpsi};
}

ResonanceState detect_resonance(const StepPotential& V) {
  require(V.cells() > 0 && V.h > 0.0, "potential has no cells");
  ResonanceState st;
  const std::size_t n = V.cells();
  st.psi_nodes.resize(n + 1);
  st.dpsi_nodes.resize(n + 1);
  st.psi_mid.resize(n);
  double psi = 1.0, dpsi = 0.0;
  st.psi_nodes[0] = psi;
  st.dpsi_nodes[0] = dpsi;
  double sup = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    const auto mid = zero_energy_step(V.values[c], 0.5 * V.h, psi, dpsi);
    st.psi_mid[c] = mid[0];
    const auto end = zero_energy_step(V.values[c], V.h, psi, dpsi);
    psi = end[0];
    dpsi = end[1];
    st.psi_nodes[c + 1] = psi;
    st.dpsi_nodes[c + 1] = dpsi;
    sup = std::max({sup, std::abs(mid[0]), std::abs(psi)});
  }
  st.exit_slope = dpsi;
  const double width = V.b() - V.a();
  st.slope_tol = 1e-6 * sup / width;
  st.resonant = std::abs(dpsi) <= st.slope_tol;
  if (st.resonant) {
    for (double& x : st.psi_nodes) x /= sup;
    for (double& x : st.dpsi_nodes) x /= sup;
    for (double& x : st.psi_mid) x /= sup;
  }
  st.left_value = st.psi_nodes.front();
  st.right_value = st.psi_nodes.back();
  return st;
}

double mean_potential(const StepPotential& V) {
  double sum = 0.0;
  for (double v : V.values) sum += v;
  return sum * V.h;
}

MeanBranch mean_branch(const StepPotential& V, double mean_tol) {
  return std::abs(mean_potential(V)) <= mean_tol * V.l1_norm() ? MeanBranch::Zero
                                                                : MeanBranch::Nonzero;
}

namespace {

// out[c] = sum_d |s_c - s_d| f[d] over cell midpoints, by the recursion
// out[c+1] = out[c] + h (left mass - right mass).
std::vector<double> abs_kernel(const StepPotential& V, const std::vector<double>& f) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  double total = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    total += f[d];
    out[0] += V.h * static_cast<double>(d) * f[d];
  }
  double left = 0.0;
  for (std::size_t c = 0; c + 1 < n; ++c) {
    left += f[c];
    out[c + 1] = out[c] + V.h * (left - (total - left));
  }
  return out;
}

bool identically_zero(const StepPotential& V) {
  return std::all_of(V.values.begin(), V.values.end(), [](double v) { return v == 0.0; });
}

}  // namespace

VertexCondition vertex_coefficients(const StepPotential& V, const ResonanceState& res,
                                    double mean_tol) {
  if (!res.resonant) fail(ErrorCode::ContractViolation, "vertex coefficients need a resonant potential");
  if (identically_zero(V))
    fail(ErrorCode::DegenerateFreeLine, "V = 0: free line, c1 and c2 are undefined");
  require(res.psi_mid.size() == V.cells(), "resonance state does not match the potential");

  const std::size_t n = V.cells();
  VertexCondition vc;
  vc.kind = VertexCondition::Kind::ScaledCoupling;
  vc.mean = mean_potential(V);
  vc.branch = mean_branch(V, mean_tol);

  std::vector<double> f(n);  // V psi_r h
  double c2 = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    f[c] = V.values[c] * res.psi_mid[c] * V.h;
    c2 += V.midpoint(c) * f[c];
  }
  vc.c2 = -0.5 * c2;

  const auto F = abs_kernel(V, f);
  if (vc.branch == MeanBranch::Nonzero) {
    double dbl = 0.0;
    for (std::size_t c = 0; c < n; ++c) dbl += V.values[c] * V.h * F[c];
    vc.c1 = dbl / (2.0 * vc.mean);
  } else {
    std::vector<double> g(n), vh(n);
    for (std::size_t c = 0; c < n; ++c) {
      g[c] = V.values[c] * F[c] * V.h;
      vh[c] = V.values[c] * V.h;
    }
    const auto H = abs_kernel(V, g);
    const auto K = abs_kernel(V, vh);
    double triple = 0.0, W = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      triple += vh[c] * H[c];
      W += vh[c] * K[c];
    }
    vc.W = W;
    if (W == 0.0) fail(ErrorCode::Numerical, "W vanishes on the zero-mean branch");
    vc.c1 = triple / (2.0 * W);
  }
  if (vc.c1 == 0.0 && vc.c2 == 0.0)
    fail(ErrorCode::Numerical, "c1 and c2 vanish simultaneously");
  return vc;
}

VertexCondition limit_operator(const StepPotential& V, const ResonanceState& res) {
  VertexCondition vc;
  if (identically_zero(V)) {
    vc.kind = VertexCondition::Kind::Free;
    return vc;
  }
  if (!res.resonant) {
    vc.kind = VertexCondition::Kind::Dirichlet;
    vc.mean = mean_potential(V);
    vc.branch = mean_branch(V);
    return vc;
  }
  return vertex_coefficients(V, res);
}

Scattering scattering_1d(const StepPotential& V, double k) {
  require(k > 0.0 && std::isfinite(k), "wavenumber must be positive");
  using cd = std::complex<double>;
  const cd ik(0.0, k);
  // Unit transmitted wave at the right edge, propagated back through the cells.
  const double b = V.b(), a = V.a();
  cd psi = std::exp(ik * b);
  cd dpsi = ik * psi;
  for (std::size_t c = V.cells(); c-- > 0;) {
    const double q = V.values[c] - k * k;
    const auto re = zero_energy_step(q, -V.h, psi.real(), dpsi.real());
    const auto im = zero_energy_step(q, -V.h, psi.imag(), dpsi.imag());
    psi = cd(re[0], im[0]);
    dpsi = cd(re[1], im[1]);
  }
  const cd in = 0.5 * (psi + dpsi / ik) * std::exp(-ik * a);
  const cd out = 0.5 * (psi - dpsi / ik) * std::exp(ik * a);
  return {out / in, 1.0 / in};
}

Scattering limit_scattering(const VertexCondition& vc) {
  switch (vc.kind) {
    case VertexCondition::Kind::Dirichlet:
      return {-1.0, 0.0};
    case VertexCondition::Kind::Free:
      return {0.0, 1.0};
    case VertexCondition::Kind::ScaledCoupling:
      break;
  }
  // r = (1 - mu^2) / (1 + mu^2), t = 2 mu / (1 + mu^2), written without dividing by c1 + c2.
  const double n2 = vc.c1 * vc.c1 + vc.c2 * vc.c2;
  return {2.0 * vc.c1 * vc.c2 / n2, (vc.c1 * vc.c1 - vc.c2 * vc.c2) / n2};
}

DeltaStudy delta_convergence_study(const StepPotential& base, const std::vector<double>& deltas,
                                   const std::vector<double>& ks) {
  require(!deltas.empty() && !ks.empty(), "delta and k lists must be non-empty");
  DeltaStudy study;
  study.resonance = detect_resonance(base);
  study.limit = limit_operator(base, study.resonance);
  const Scattering target = limit_scattering(study.limit);
  for (double delta : deltas) {
    const auto scaled = scale_potential(base, delta);
    double worst = 0.0;
    for (double k : ks) {
      DeltaRow row{delta, k, scattering_1d(scaled.values, k), target, 0.0};
      row.deviation = std::max(std::abs(row.s.r - target.r), std::abs(row.s.t - target.t));
      worst = std::max(worst, row.deviation);
      study.rows.push_back(row);
    }
    study.max_deviation.push_back(worst);
  }
  if (deltas.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      if (!(study.max_deviation[i] > 0.0)) continue;
      const double x = std::log(deltas[i]), y = std::log(study.max_deviation[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
    const double den = m * sxx - sx * sx;
    if (m >= 2 && den > 0.0) study.fitted_rate = (m * sxy - sx * sy) / den;
  }
  return study;
}

BalancedPotential balanced_potential(double c_n, double kappa_amp, double twist_center,
                                     double twist_halfwidth, int cells) {
  require(c_n > 0.0, "balanced potential needs C_n > 0");
  require(twist_halfwidth > 0.0 && std::abs(twist_center) + twist_halfwidth <= 1.0,
          "twist bump must lie in [-1, 1]");
  auto tw = [&](double s) {
    const double b = cosine_bump((s - twist_center) / twist_halfwidth);
    return b * b;
  };
  auto cu = [](double s) {
    const double b = cosine_bump(s);
    return b * b;
  };
  const auto T = StepPotential::sample(tw, -1.0, 1.0, cells);
  const auto K = StepPotential::sample(cu, -1.0, 1.0, cells);
  const double ratio = mean_potential(K) / mean_potential(T);
  BalancedPotential out;
  out.kappa_amp = kappa_amp;
  const double t2 = 0.25 * kappa_amp * kappa_amp * ratio / c_n;
  out.twist_amp = std::sqrt(t2);
  out.V = T;
  for (std::size_t c = 0; c < T.cells(); ++c)
    out.V.values[c] = c_n * t2 * T.values[c] - 0.25 * kappa_amp * kappa_amp * K.values[c];
  return out;
}

BalancedPotential resonant_balanced_potential(double c_n, double twist_center,
                                              double twist_halfwidth, int cells, double kappa_min,
                                              double kappa_max) {
  require(kappa_max > kappa_min && kappa_min > 0.0, "kappa range must be increasing and positive");
  auto slope = [&](double amp) {
    const auto bp = balanced_potential(c_n, amp, twist_center, twist_halfwidth, cells);
    const auto st = detect_resonance(bp.V);
    double sup = 0.0;
    for (double x : st.psi_nodes) sup = std::max(sup, std::abs(x));
    return st.exit_slope / sup;
  };
  const double step = 0.25;
  double lo = kappa_min, flo = slope(lo);
  for (double hi = lo + step; hi <= kappa_max + 1e-12; hi += step) {
    const double fhi = slope(hi);
    if ((flo < 0.0) != (fhi < 0.0)) {
      std::uintmax_t iters = 200;
      const auto root = boost::math::tools::toms748_solve(
          slope, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iters);
      const double amp = 0.5 * (root.first + root.second);
      auto bp = balanced_potential(c_n, amp, twist_center, twist_halfwidth, cells);
      if (!detect_resonance(bp.V).resonant)
        fail(ErrorCode::Numerical, "resonance tuning did not reach the slope tolerance");
      return bp;
    }
    lo = hi;
    flo = fhi;
  }
  fail(ErrorCode::Numerical, "no resonance found in the kappa range");
}

void write_delta_csv(std::ostream& out, const DeltaStudy& study) {
  out << "delta,k,re_r,im_r,re_t,im_t,target_r,target_t,deviation\n";
  using detail::num;
  for (const auto& r : study.rows) {
    // Limit amplitudes are real for every vertex kind.
    out << num(r.delta) << ',' << num(r.k) << ',' << num(r.s.r.real()) << ','
        << num(r.s.r.imag()) << ',' << num(r.s.t.real()) << ',' << num(r.s.t.imag()) << ','
        << num(r.target.r.real()) << ',' << num(r.target.t.real()) << ',' << num(r.deviation)
        << '\n';
  }
}

}  // namespace qtube
