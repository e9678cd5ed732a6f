#pragma once

#include "qtube/geometry.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace qtube {

/// V(s) = (tau - alpha_dot)^2 C_n - kappa^2 / 4 sampled on the curve grid.
/// The curvature term is kappa^2 z^T Gamma z with z = (cos alpha, sin alpha);
/// Gamma = -I/4 is the continuum value, a mesh may supply its discrete one.
struct EffectivePotential {
  std::vector<double> s;
  std::vector<double> values;
  double c_n = 0.0;
  int mode = 0;
  double sup_kappa = 0.0;
  Eigen::Matrix2d curvature_form = -0.25 * Eigen::Matrix2d::Identity();

  double h() const { return s.size() > 1 ? s[1] - s[0] : 0.0; }
};

EffectivePotential effective_potential(const CurveSpec& curve, double c_n, int mode = 0);
EffectivePotential effective_potential(const CurveSpec& curve, double c_n, int mode,
                                       const Eigen::Matrix2d& curvature_form);

/// Potential given directly by samples on a uniform grid.
EffectivePotential potential_from_samples(std::vector<double> s, std::vector<double> values);

/// Pads with zeros (same spacing) so the grid covers [a, b].
EffectivePotential extend_potential(const EffectivePotential& pot, double a, double b);

struct Spectrum1D {
  Eigen::VectorXd mu;
  /// Columns are eigenfunctions on `s` (interior nodes), sum w^2 h = 1.
  Eigen::MatrixXd w;
  std::vector<double> s;
  double a = 0.0, b = 0.0;
  std::string bc = "dirichlet";
};

/// Lowest j_max eigenpairs of -d^2/ds^2 + V with Dirichlet ends at the first
/// and last grid node (three-point scheme). Resolution error when the top
/// mode has fewer than eight points per local wavelength.
Spectrum1D schrodinger_eigen(const EffectivePotential& pot, int j_max);

struct BoundStateReport {
  bool exists = false;
  double lowest = 0.0;       // on (c - R, c + R)
  double lowest_2r = 0.0;    // on (c - 2R, c + 2R)
  double tol = 1e-9;
};

/// Bound-state test on intervals centred at the grid midpoint c. V must vanish
/// at the grid ends; Inconclusive when R and 2R classify differently.
BoundStateReport bound_state_exists(const EffectivePotential& pot, double domain_halfwidth);

void write_potential_csv(std::ostream& out, const EffectivePotential& pot);
EffectivePotential read_potential_csv(std::istream& in);
void write_spectrum_csv(std::ostream& out, const Spectrum1D& spec);

}  // namespace qtube
