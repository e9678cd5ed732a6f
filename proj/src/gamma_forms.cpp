#include "qtube/gamma_forms.hpp"

#include "qtube/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace qtube {

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) A(i, j) = nd(rng);
  return A;
}

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  const Eigen::MatrixXd A = gaussian(n, n, rng);
  return A * A.transpose() / n + Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd random_symmetric_unit(int n, std::mt19937_64& rng) {
  const Eigen::MatrixXd A = gaussian(n, n, rng);
  Eigen::MatrixXd D = 0.5 * (A + A.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return norm > 0.0 ? Eigen::MatrixXd(D / norm) : D;
}

double min_eig(const Eigen::MatrixXd& A) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void check_eps(const std::vector<double>& eps) {
  require(!eps.empty(), "eps list must be non-empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    require(eps[i] > 0.0 && std::isfinite(eps[i]), "eps values must be positive");
    if (i > 0) require(eps[i] < eps[i - 1], "eps list must be strictly decreasing");
  }
}

}  // namespace

Eigen::MatrixXd FormSequence::range_basis() const {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P0 + P0.transpose()));
  std::vector<int> keep;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > 0.5) keep.push_back(i);
  Eigen::MatrixXd Q(P0.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) Q.col(j) = es.eigenvectors().col(keep[j]);
  return Q;
}

Eigen::MatrixXd FormSequence::limit_resolvent(double lam) const {
  const Eigen::MatrixXd Q = range_basis();
  Eigen::MatrixXd A = Q.transpose() * limit * Q;
  A.diagonal().array() += lam;
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) fail(ErrorCode::InvalidInput, "limit form + lam is not positive definite");
  return Q * llt.solve(Q.transpose());
}

void FormSequence::validate() const {
  require(dim > 0, "dimension must be positive");
  check_eps(eps);
  require(forms.size() == eps.size(), "one form per eps value");
  const double tol = 1e-10;
  for (const auto& T : forms) {
    require(T.rows() == dim && T.cols() == dim, "form has the wrong size");
    require((T - T.transpose()).norm() <= tol * std::max(1.0, T.norm()), "form is not symmetric");
    require(min_eig(T) >= beta - tol * std::max(1.0, T.norm()), "form violates the declared lower bound");
  }
  require(limit.rows() == dim && limit.cols() == dim, "limit form has the wrong size");
  require(P0.rows() == dim && P0.cols() == dim, "projector has the wrong size");
  require((P0 - P0.transpose()).norm() <= tol, "P0 is not symmetric");
  require((P0 * P0 - P0).norm() <= tol, "P0 is not idempotent");
}

FormSequence perturbation_family(int dim, const std::vector<double>& eps, std::uint64_t seed) {
  require(dim > 0, "dimension must be positive");
  check_eps(eps);
  std::mt19937_64 rng(seed);
  FormSequence seq;
  seq.family = "perturbation";
  seq.dim = dim;
  seq.eps = eps;
  seq.limit = random_spd(dim, rng);
  const Eigen::MatrixXd D = random_symmetric_unit(dim, rng);
  for (double e : eps) seq.forms.push_back(seq.limit + e * D);
  seq.P0 = Eigen::MatrixXd::Identity(dim, dim);
  seq.beta = min_eig(seq.limit) - eps.front();
  return seq;
}

FormSequence penalization_family(int dim, const std::vector<double>& eps, std::uint64_t seed) {
  require(dim >= 2, "penalization needs dimension >= 2");
  check_eps(eps);
  std::mt19937_64 rng(seed);
  FormSequence seq;
  seq.family = "penalization";
  seq.dim = dim;
  seq.eps = eps;
  seq.limit = random_spd(dim, rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(dim, dim, rng));
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, (dim + 1) / 2);
  seq.P0 = Q * Q.transpose();
  seq.P0 = 0.5 * (seq.P0 + seq.P0.transpose());
  const Eigen::MatrixXd perp = Eigen::MatrixXd::Identity(dim, dim) - seq.P0;
  for (double e : eps) seq.forms.push_back(seq.limit + perp / e);
  seq.beta = min_eig(seq.limit);
  return seq;
}

FormSequence oscillation_family(int dim, const std::vector<double>& eps, std::uint64_t seed) {
  require(dim > 0, "dimension must be positive");
  check_eps(eps);
  std::mt19937_64 rng(seed);
  FormSequence seq;
  seq.family = "oscillation";
  seq.dim = dim;
  seq.eps = eps;
  seq.limit = random_spd(dim, rng);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  for (std::size_t i = 0; i < eps.size(); ++i)
    seq.forms.push_back(i % 2 == 0 ? seq.limit : Eigen::MatrixXd(seq.limit + I));
  seq.P0 = I;
  seq.beta = min_eig(seq.limit);
  return seq;
}

FormSequence make_family(const std::string& family, int dim, const std::vector<double>& eps,
                         std::uint64_t seed) {
  if (family == "perturbation") return perturbation_family(dim, eps, seed);
  if (family == "penalization") return penalization_family(dim, eps, seed);
  if (family == "oscillation") return oscillation_family(dim, eps, seed);
  fail(ErrorCode::InvalidInput, "unknown form family '" + family + "'");
}

std::vector<Eigen::VectorXd> sample_vectors(int dim, int random_count, std::uint64_t seed) {
  require(dim > 0 && random_count >= 0, "bad sample set size");
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < dim; ++i) out.push_back(Eigen::VectorXd::Unit(dim, i));
  std::mt19937_64 rng(seed);
  for (int k = 0; k < random_count; ++k) {
    Eigen::VectorXd v = gaussian(dim, 1, rng);
    out.push_back(v / v.norm());
  }
  return out;
}

Minimum min_perturbed(const Eigen::MatrixXd& T, double lam, const Eigen::VectorXd& eta) {
  require(T.rows() == T.cols() && T.rows() == eta.size(), "dimension mismatch");
  Eigen::MatrixXd A = 0.5 * (T + T.transpose());
  A.diagonal().array() += lam;
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) fail(ErrorCode::InvalidInput, "T + lam is not positive definite");
  Minimum m;
  m.minimizer = -0.5 * llt.solve(eta);
  m.value = 0.5 * eta.dot(m.minimizer);
  return m;
}

Minimum min_perturbed_limit(const FormSequence& seq, double lam, const Eigen::VectorXd& eta) {
  Minimum m;
  m.minimizer = -0.5 * seq.limit_resolvent(lam) * eta;
  m.value = 0.5 * eta.dot(m.minimizer);
  return m;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    ++m;
  }
  const double den = m * sxx - sx * sx;
  return (m >= 2 && den > 0.0) ? (m * sxy - sx * sy) / den : 0.0;
}

EquivalenceReport check_equivalence_iv_v(const FormSequence& seq, double lam,
                                         const std::vector<Eigen::VectorXd>& samples, double tol) {
  seq.validate();
  require(lam > std::max(0.0, -seq.beta), "lam must exceed max(0, -beta)");
  require(!samples.empty(), "sample set is empty");
  EquivalenceReport rep;
  rep.eps = seq.eps;
  const Eigen::MatrixXd Rlim = seq.limit_resolvent(lam);
  for (const auto& T : seq.forms) {
    Eigen::MatrixXd A = T;
    A.diagonal().array() += lam;
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) fail(ErrorCode::InvalidInput, "T_eps + lam is not positive definite");
    double dmin = 0.0, dres = 0.0;
    for (const auto& v : samples) {
      const Eigen::VectorXd Rv = llt.solve(v);
      const Eigen::VectorXd Lv = Rlim * v;
      // min value is -v^T R v / 4 for both functionals.
      dmin = std::max(dmin, 0.25 * std::abs(v.dot(Rv) - v.dot(Lv)));
      dres = std::max(dres, (Rv - Lv).norm());
    }
    rep.min_deviation.push_back(dmin);
    rep.resolvent_deviation.push_back(dres);
  }
  // Tail discrepancy relative to the head: scale-free, so the two criteria are
  // judged alike although the minima carry a factor 1/4.
  const std::size_t n = seq.eps.size(), tail = n / 2;
  auto tail_ok = [&](const std::vector<double>& d) {
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(tail);
    const double head = tail == 0 ? d.front() : *std::max_element(d.begin(), mid);
    const double rest = *std::max_element(mid, d.end());
    return rest <= 1e-14 || rest <= tol * head;
  };
  rep.minima_converge = tail_ok(rep.min_deviation);
  rep.resolvents_converge = tail_ok(rep.resolvent_deviation);
  rep.agree = rep.minima_converge == rep.resolvents_converge;
  rep.min_rate = loglog_slope(seq.eps, rep.min_deviation);
  rep.resolvent_rate = loglog_slope(seq.eps, rep.resolvent_deviation);
  return rep;
}

MinimizerIdentity minimizer_identity(const Eigen::MatrixXd& T, const Eigen::MatrixXd& P0,
                                     const Eigen::VectorXd& eta) {
  require(T.rows() == T.cols() && P0.rows() == T.rows() && eta.size() == T.rows(),
          "dimension mismatch");
  FormSequence tmp;
  tmp.P0 = P0;
  const Eigen::MatrixXd Q = tmp.range_basis();
  const Eigen::MatrixXd A = Q.transpose() * (0.5 * (T + T.transpose())) * Q;
  const Eigen::VectorXd b = Q.transpose() * eta;
  MinimizerIdentity out;
  out.minimizer = Eigen::VectorXd::Zero(T.rows());
  if (A.rows() == 0) return out;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  require(es.eigenvalues()(0) >= -1e-10 * scale, "T must be positive semidefinite on ran P0");
  const Eigen::VectorXd c = es.eigenvectors().transpose() * b;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(A.rows());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev <= 1e-12 * scale) {
      if (std::abs(c(i)) > 1e-12 * std::max(1.0, b.norm())) out.unbounded = true;
      continue;
    }
    z(i) = c(i) / ev;
  }
  out.minimizer = Q * (es.eigenvectors() * z);
  if (out.unbounded) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  out.residual = (P0 * (T * out.minimizer) - P0 * eta).norm();
  return out;
}

SupRepresentation sup_representation(const Eigen::MatrixXd& T, const Eigen::MatrixXd& P0,
                                     const Eigen::VectorXd& zeta,
                                     const std::vector<Eigen::VectorXd>& samples) {
  require(T.rows() == T.cols() && P0.rows() == T.rows() && zeta.size() == T.rows(),
          "dimension mismatch");
  SupRepresentation out;
  const Eigen::MatrixXd Ts = 0.5 * (T + T.transpose());
  out.sup = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const Eigen::VectorXd eta = P0 * s;
    const Eigen::VectorXd Te = Ts * eta;
    out.sup = std::max(out.sup, 2.0 * Te.dot(zeta) - Te.dot(eta));
  }
  if ((zeta - P0 * zeta).norm() > 1e-12 * std::max(1.0, zeta.norm())) {
    out.infinite = true;
    out.form_value = std::numeric_limits<double>::infinity();
    out.gap = std::numeric_limits<double>::infinity();
    return out;
  }
  out.form_value = zeta.dot(Ts * zeta);
  out.gap = out.form_value - out.sup;
  return out;
}

MinimizerConvergence minimizer_convergence(const FormSequence& seq, double lam,
                                           const Eigen::VectorXd& shift) {
  seq.validate();
  require(seq.beta + lam > 0.0, "beta + lam must be positive");
  require(shift.size() == seq.dim, "shift has the wrong size");
  MinimizerConvergence out;
  out.eps = seq.eps;
  out.limit_minimizer = min_perturbed_limit(seq, lam, shift).minimizer;
  for (const auto& T : seq.forms)
    out.distance.push_back((min_perturbed(T, lam, shift).minimizer - out.limit_minimizer).norm());
  out.rate = loglog_slope(seq.eps, out.distance);
  return out;
}

bool matrix_leq(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double tol) {
  const Eigen::MatrixXd D = B - A;
  return min_eig(0.5 * (D + D.transpose())) >= -tol;
}

MonotonicityReport check_monotone(const FormSequence& seq, double lam) {
  seq.validate();
  require(lam > std::max(0.0, -seq.beta), "lam must exceed max(0, -beta)");
  MonotonicityReport rep;
  std::vector<Eigen::MatrixXd> R;
  std::vector<double> cond;
  for (const auto& T : seq.forms) {
    Eigen::MatrixXd A = T;
    A.diagonal().array() += lam;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    cond.push_back(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff());
    R.push_back(A.llt().solve(Eigen::MatrixXd::Identity(seq.dim, seq.dim)));
  }
  rep.consistent = true;
  for (std::size_t i = 0; i + 1 < seq.forms.size(); ++i) {
    const double tol = 1e-10 * std::max(1.0, seq.forms[i + 1].norm());
    // Inverting a matrix of condition c costs about c * eps in absolute accuracy (|R| <= 1/lam).
    const double rtol = 1e-13 * std::max(cond[i], cond[i + 1]) / lam;
    const bool f = matrix_leq(seq.forms[i], seq.forms[i + 1], tol);
    const bool r = matrix_leq(R[i + 1], R[i], rtol);
    rep.forms_ordered.push_back(f);
    rep.resolvents_ordered.push_back(r);
    if (f != r) rep.consistent = false;
  }
  return rep;
}

}  // namespace qtube
