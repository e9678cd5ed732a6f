#pragma once

#include "qtube/effective_operator.hpp"
#include "qtube/geometry.hpp"

#include <array>
#include <complex>
#include <functional>
#include <iosfwd>
#include <vector>

namespace qtube {

/// Piecewise-constant potential: cell c covers [s0 + c h, s0 + (c+1) h].
/// Outside the cells V = 0. All propagation below is exact cell by cell.
struct StepPotential {
  double s0 = 0.0;
  double h = 0.0;
  std::vector<double> values;

  std::size_t cells() const { return values.size(); }
  double a() const { return s0; }
  double b() const { return s0 + h * static_cast<double>(values.size()); }
  double midpoint(std::size_t c) const { return s0 + h * (static_cast<double>(c) + 0.5); }

  /// Cell values f(midpoint) on [a, b].
  static StepPotential sample(const std::function<double(double)>& f, double a, double b,
                              int cells);
  /// Cell values are averages of adjacent node values.
  static StepPotential from_nodal(const EffectivePotential& pot);
  static StepPotential square_well(double depth, double halfwidth, int cells);

  double l1_norm() const;
};

/// V_delta(s) = V(s / delta) / delta^2.
struct ScaledPotential {
  double delta = 1.0;
  StepPotential base;
  StepPotential values;
};

/// Base must vanish outside [-1, 1].
ScaledPotential scale_potential(const StepPotential& base, double delta);

/// kappa, tau, alpha_dot scaled by 1/delta on the arc length s * delta.
CurveSpec scale_curve(const CurveSpec& curve, double delta);
/// Trapezoidal integral of kappa.
double bend_angle(const CurveSpec& curve);

struct ResonanceState {
  bool resonant = false;
  double exit_slope = 0.0;  // raw psi'(b) for psi(a) = 1, psi'(a) = 0
  double slope_tol = 0.0;
  /// Shooting solution on cell boundaries and midpoints, sup-normalized with
  /// left value +1 when resonant; raw otherwise.
  std::vector<double> psi_nodes, dpsi_nodes, psi_mid;
  double left_value = 0.0, right_value = 0.0;
};

ResonanceState detect_resonance(const StepPotential& V);

/// Zero-energy shooting on a single cell: (psi, psi') after length h in constant V.
std::array<double, 2> zero_energy_step(double V, double h, double psi, double dpsi);

double mean_potential(const StepPotential& V);

enum class MeanBranch { Nonzero, Zero };
/// Zero when |<V>| <= mean_tol * ||V||_1.
MeanBranch mean_branch(const StepPotential& V, double mean_tol = 1e-10);

struct VertexCondition {
  enum class Kind { Dirichlet, ScaledCoupling, Free };
  Kind kind = Kind::Dirichlet;
  double c1 = 0.0;
  double c2 = 0.0;
  MeanBranch branch = MeanBranch::Nonzero;
  double mean = 0.0;
  /// Only set on the zero-mean branch.
  double W = 0.0;

  /// psi(0+) = mu psi(0-), psi'(0+) = psi'(0-) / mu.
  double mu() const { return (c1 - c2) / (c1 + c2); }
};

/// c_1, c_2 by midpoint quadrature with O(N) prefix sums for the |s - y| kernels.
VertexCondition vertex_coefficients(const StepPotential& V, const ResonanceState& res,
                                    double mean_tol = 1e-10);

/// Dirichlet when not resonant, the scaled coupling when resonant, Free for V = 0.
VertexCondition limit_operator(const StepPotential& V, const ResonanceState& res);

struct Scattering {
  std::complex<double> r, t;
};

Scattering scattering_1d(const StepPotential& V, double k);
/// Amplitudes of the limit point interaction; k-independent.
Scattering limit_scattering(const VertexCondition& vc);

struct DeltaRow {
  double delta, k;
  Scattering s;
  Scattering target;
  double deviation;
};

struct DeltaStudy {
  VertexCondition limit;
  ResonanceState resonance;
  std::vector<DeltaRow> rows;
  std::vector<double> max_deviation;  // per delta, in input order
  double fitted_rate = 0.0;           // slope of log max deviation vs log delta
};

DeltaStudy delta_convergence_study(const StepPotential& base, const std::vector<double>& deltas,
                                   const std::vector<double>& ks);

/// V = C_n (t b((s - center) / halfwidth))^2 - (kappa_amp b(s))^2 / 4 on (-1, 1),
/// b the cosine bump, with the twist amplitude t chosen so the discrete mean is zero.
struct BalancedPotential {
  StepPotential V;
  double twist_amp = 0.0;
  double kappa_amp = 0.0;
};

BalancedPotential balanced_potential(double c_n, double kappa_amp, double twist_center,
                                     double twist_halfwidth, int cells);

/// Tunes kappa_amp to the first sign change of the exit slope above `kappa_min`,
/// giving a zero-mean potential with a resonance at zero.
BalancedPotential resonant_balanced_potential(double c_n, double twist_center,
                                              double twist_halfwidth, int cells,
                                              double kappa_min = 0.5, double kappa_max = 60.0);

/// CSV `delta,k,re_r,im_r,re_t,im_t,target_r,target_t,deviation`.
void write_delta_csv(std::ostream& out, const DeltaStudy& study);

}  // namespace qtube
