#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace qtube {

/// Quadratic forms b_eps(z) = z^T T_eps z on R^N and a limit form T living on
/// ran P0 (b = +inf off ran P0). `limit` is stored as an N x N matrix; only its
/// compression to ran P0 is used.
struct FormSequence {
  std::string family;
  int dim = 0;
  std::vector<double> eps;  // decreasing
  std::vector<Eigen::MatrixXd> forms;
  Eigen::MatrixXd limit;
  Eigen::MatrixXd P0;
  double beta = 0.0;  // declared lower bound of every T_eps

  /// Orthonormal basis of ran P0 (columns).
  Eigen::MatrixXd range_basis() const;
  /// (T|ran P0 + lam)^{-1} P0 as an N x N matrix.
  Eigen::MatrixXd limit_resolvent(double lam) const;
  /// Symmetry, the lower bound, and P0 being a symmetric idempotent; InvalidInput otherwise.
  void validate() const;
};

/// T_eps = T + eps D with T SPD and D symmetric of unit spectral norm; P0 = I.
FormSequence perturbation_family(int dim, const std::vector<double>& eps, std::uint64_t seed);
/// T_eps = T + (1/eps)(I - P0) for a random rank-dim/2 projector P0 (rounded up).
FormSequence penalization_family(int dim, const std::vector<double>& eps, std::uint64_t seed);
/// Alternates between T and T + I; declared limit T.
FormSequence oscillation_family(int dim, const std::vector<double>& eps, std::uint64_t seed);
/// Dispatches on "perturbation", "penalization" or "oscillation".
FormSequence make_family(const std::string& family, int dim, const std::vector<double>& eps,
                         std::uint64_t seed);

/// Canonical basis vectors followed by `random_count` seeded random unit vectors.
std::vector<Eigen::VectorXd> sample_vectors(int dim, int random_count, std::uint64_t seed);

struct Minimum {
  double value = 0.0;
  Eigen::VectorXd minimizer;
};

/// min over z of z^T T z + lam |z|^2 + eta^T z. InvalidInput unless T + lam is positive definite.
Minimum min_perturbed(const Eigen::MatrixXd& T, double lam, const Eigen::VectorXd& eta);
/// The same functional for the limit form, minimized over ran P0.
Minimum min_perturbed_limit(const FormSequence& seq, double lam, const Eigen::VectorXd& eta);

struct EquivalenceReport {
  std::vector<double> eps;
  std::vector<double> min_deviation;        // max over eta of |min_eps - min_limit|
  std::vector<double> resolvent_deviation;  // max over zeta of |R_eps z - R_lim z|
  bool minima_converge = false;
  bool resolvents_converge = false;
  bool agree = false;
  double min_rate = 0.0;
  double resolvent_rate = 0.0;
};

/// A criterion converges when the largest deviation over the tail (last half,
/// rounded up, of the eps list) is at most tol times the largest over the head,
/// or below 1e-14 outright.
EquivalenceReport check_equivalence_iv_v(const FormSequence& seq, double lam,
                                         const std::vector<Eigen::VectorXd>& samples, double tol);

struct MinimizerIdentity {
  bool unbounded = false;
  double residual = 0.0;  // |P0 T zeta - P0 eta|
  Eigen::VectorXd minimizer;
};

/// Minimizes z^T T z - 2 eta^T z over ran P0 and checks T0 z = P0 eta, T0 = P0 T P0.
/// T must be positive semidefinite on ran P0; `unbounded` flags a null direction
/// of T0 along which P0 eta has a component.
MinimizerIdentity minimizer_identity(const Eigen::MatrixXd& T, const Eigen::MatrixXd& P0,
                                     const Eigen::VectorXd& eta);

struct SupRepresentation {
  bool infinite = false;  // zeta outside ran P0
  double form_value = 0.0;
  double sup = 0.0;
  double gap = 0.0;
};

/// sup over samples (projected to ran P0) of 2 eta^T T zeta - eta^T T eta.
SupRepresentation sup_representation(const Eigen::MatrixXd& T, const Eigen::MatrixXd& P0,
                                     const Eigen::VectorXd& zeta,
                                     const std::vector<Eigen::VectorXd>& samples);

struct MinimizerConvergence {
  std::vector<double> eps;
  std::vector<double> distance;
  Eigen::VectorXd limit_minimizer;
  double rate = 0.0;
};

MinimizerConvergence minimizer_convergence(const FormSequence& seq, double lam,
                                           const Eigen::VectorXd& shift);

struct MonotonicityReport {
  /// Per consecutive pair (i, i+1): T_i <= T_{i+1}, and R_{i+1} <= R_i.
  /// `consistent` when the two orderings agree on every pair.
  std::vector<bool> forms_ordered;
  std::vector<bool> resolvents_ordered;
  bool consistent = false;
};

/// A <= B in the matrix order when min eig(B - A) >= -tol.
bool matrix_leq(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double tol = 1e-10);

MonotonicityReport check_monotone(const FormSequence& seq, double lam);

/// Least-squares slope of log y against log x over positive y.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qtube
