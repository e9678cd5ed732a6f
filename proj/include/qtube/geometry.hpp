#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qtube {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Smooth compactly supported profile cos^2(pi x / 2) on |x| < 1, zero outside.
double cosine_bump(double x);

/// Reference curve sampled on a uniform arc-length grid: curvature, torsion
/// and cross-section rotation angle with its derivative.
class CurveSpec {
 public:
  struct Sample {
    double kappa;
    double tau;
    double alpha;
    double alpha_dot;
  };

  /// Validates and builds a curve. When `alpha_dot` is omitted it is derived
  /// from `alpha` (central differences inside, one-sided second order at ends).
  static CurveSpec from_samples(std::vector<double> s, std::vector<double> kappa,
                                std::vector<double> tau, std::vector<double> alpha,
                                std::optional<std::vector<double>> alpha_dot = std::nullopt);

  /// Reads the `s kappa tau alpha [alpha_dot]` table format.
  static CurveSpec from_stream(std::istream& in);
  static CurveSpec from_file(const std::string& path);
  void write(std::ostream& out) const;

  // Closed-form presets, all sampled with `intervals` uniform steps.
  static CurveSpec straight(double length, int intervals);
  static CurveSpec circular_arc(double length, double kappa0, int intervals);
  /// Planar curve with kappa = kappa0 * cosine_bump((s - center) / halfwidth) on [0, length].
  static CurveSpec bump_curvature(double length, double kappa0, double center,
                                  double halfwidth, int intervals);
  static CurveSpec helix(double length, double kappa0, double tau0, int intervals);
  /// Straight tube whose cross section rotates at alpha_dot = amp * cosine_bump(...).
  static CurveSpec twisted_straight(double length, double amp, double center,
                                    double halfwidth, int intervals);

  std::size_t size() const { return s_.size(); }
  double h() const { return h_; }
  double s_min() const { return s_.front(); }
  double s_max() const { return s_.back(); }

  const std::vector<double>& s() const { return s_; }
  const std::vector<double>& kappa() const { return kappa_; }
  const std::vector<double>& tau() const { return tau_; }
  const std::vector<double>& alpha() const { return alpha_; }
  const std::vector<double>& alpha_dot() const { return alpha_dot_; }
  bool alpha_dot_derived() const { return alpha_dot_derived_; }

  /// tau - alpha_dot at node i; the only combination of the two that enters the forms.
  double twist(std::size_t i) const { return tau_[i] - alpha_dot_[i]; }
  double sup_kappa() const;
  bool has_unbounded_twist_flag() const { return twist_flagged_; }

  /// Linear interpolation between nodes; `s` must lie inside the grid.
  Sample at(double s) const;

 private:
  CurveSpec() = default;

  std::vector<double> s_, kappa_, tau_, alpha_, alpha_dot_;
  double h_ = 0.0;
  bool alpha_dot_derived_ = false;
  bool twist_flagged_ = false;
};

/// Per-node Frenet triads plus the rotated normals and the integrated curve.
struct FrameField {
  std::vector<Vec3> T, N, B;
  std::vector<Vec3> N_alpha, B_alpha;
  std::vector<Vec3> position;
};

/// Integrates the Serret-Frenet system with classical RK4 and Gram-Schmidt
/// re-orthonormalization each step, starting from the canonical basis.
FrameField build_frame(const CurveSpec& curve);

double beta_weight(const CurveSpec& curve, double eps, double s, const Vec2& y);

/// Sign convention for the transverse rows of the Jacobian. `Derived` follows
/// from differentiating the tube map; `Flipped` negates the e_2 row, and G is
/// then assembled as J J^T.
enum class JacobianConvention { Derived, Flipped };

struct MetricSample {
  double beta = 1.0;
  double rho = 0.0;
  double sigma = 0.0;
  Mat3 G = Mat3::Identity();
  Mat3 J = Mat3::Identity();  // rows e_1, e_2, e_3 in the (T, N, B) frame
  double det_G = 0.0;
};

MetricSample metric_at(const CurveSpec& curve, double eps, double s, const Vec2& y,
                       JacobianConvention convention = JacobianConvention::Derived);

struct TubeDiagnostics {
  bool ok = false;
  double min_beta = 1.0;
  double s_at_min = 0.0;
  static constexpr double margin = 1e-6;
};

/// Worst-case weight 1 - eps |kappa(s)| r over the grid, r = sup |y| on S.
TubeDiagnostics validate_tube(const CurveSpec& curve, double eps, double section_radius);

}  // namespace qtube
