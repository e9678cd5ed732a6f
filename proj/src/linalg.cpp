#include "qtube/linalg.hpp"

#include "qtube/error.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace qtube::linalg {

struct SymmetricSolver::Ldlt {
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> f;
};
struct SymmetricSolver::Lu {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> f;
};

SymmetricSolver::SymmetricSolver(const SparseMatrix& K) {
  ldlt_ = std::make_unique<Ldlt>();
  ldlt_->f.compute(K);
  bool ok = ldlt_->f.info() == Eigen::Success;
  if (ok) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd b(K.rows());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
    const Eigen::VectorXd x = ldlt_->f.solve(b);
    const double res = (K * x - b).norm() / b.norm();
    ok = std::isfinite(res) && res < 1e-9;
  }
  if (!ok) {
    ldlt_.reset();
    lu_ = std::make_unique<Lu>();
    lu_->f.analyzePattern(K);
    lu_->f.factorize(K);
    if (lu_->f.info() != Eigen::Success)
      fail(ErrorCode::Numerical, "sparse factorization failed: " + lu_->f.lastErrorMessage());
  }
}

SymmetricSolver::~SymmetricSolver() = default;

Eigen::VectorXd SymmetricSolver::solve(const Eigen::VectorXd& b) const {
  if (ldlt_) return ldlt_->f.solve(b);
  return lu_->f.solve(b);
}

namespace {

// Orthonormal basis (unweighted) of { x : C^T x = 0 }.
Eigen::MatrixXd null_space_of_transpose(const Eigen::MatrixXd& C) {
  const Eigen::Index n = C.rows(), m = C.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return Q.rightCols(n - m);
}

EigenResult dense_solve(const SparseMatrix& A, const Eigen::VectorXd& mass, int count,
                        const SparseMatrix* constraint) {
  const Eigen::MatrixXd Ad(A);
  EigenResult out;
  if (!constraint) {
    const Eigen::VectorXd is = mass.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd B = is.asDiagonal() * Ad * is.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()));
    if (es.info() != Eigen::Success) fail(ErrorCode::Numerical, "dense eigensolve failed");
    out.values = es.eigenvalues().head(count);
    out.vectors = is.asDiagonal() * es.eigenvectors().leftCols(count);
    return out;
  }
  const Eigen::MatrixXd Z = null_space_of_transpose(Eigen::MatrixXd(*constraint));
  const Eigen::MatrixXd Ar = Z.transpose() * Ad * Z;
  const Eigen::MatrixXd Mr = Z.transpose() * mass.asDiagonal() * Z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Ar + Ar.transpose()),
                                                               0.5 * (Mr + Mr.transpose()));
  if (es.info() != Eigen::Success) fail(ErrorCode::Numerical, "dense eigensolve failed");
  out.values = es.eigenvalues().head(count);
  out.vectors = Z * es.eigenvectors().leftCols(count);
  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
    const double nrm = std::sqrt(out.vectors.col(j).dot(mass.cwiseProduct(out.vectors.col(j))));
    out.vectors.col(j) /= nrm;
  }
  return out;
}

// Shift-inverted operator x -> (A - sigma M)^{-1} M x, restricted to ker C^T.
class ShiftInvert {
 public:
  ShiftInvert(const SparseMatrix& A, const Eigen::VectorXd& mass, double shift,
              const SparseMatrix* C)
      : mass_(mass), solver_(SparseMatrix(A - shift * SparseMatrix(mass.asDiagonal()))) {
    if (C && C->cols() > 0) {
      C_ = *C;
      Y_.resize(A.rows(), C->cols());
      for (Eigen::Index j = 0; j < C->cols(); ++j)
        Y_.col(j) = solver_.solve(Eigen::VectorXd(C->col(j)));
      const Eigen::MatrixXd S = Eigen::MatrixXd(C->transpose() * Y_);
      schur_.compute(0.5 * (S + S.transpose()));
      constrained_ = true;
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd x = solver_.solve(mass_.cwiseProduct(v));
    if (constrained_) {
      const Eigen::VectorXd mu = schur_.solve(C_.transpose() * x);
      x -= Y_ * mu;
    }
    return x;
  }

 private:
  const Eigen::VectorXd& mass_;
  SymmetricSolver solver_;
  bool constrained_ = false;
  SparseMatrix C_;
  Eigen::MatrixXd Y_;
  Eigen::LDLT<Eigen::MatrixXd> schur_;
};

struct LanczosPass {
  std::vector<double> lambdas;
  std::vector<Eigen::VectorXd> vectors;
};

// One Lanczos run in the M inner product with full reorthogonalization,
// deflating the already locked vectors.
LanczosPass lanczos_pass(const ShiftInvert& op, const Eigen::VectorXd& mass, double shift,
                         int count, const EigenOptions& opt,
                         const std::vector<Eigen::VectorXd>& locked,
                         const std::vector<double>& locked_lambda, std::uint64_t seed) {
  const Eigen::Index n = mass.size();
  auto mdot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(mass.cwiseProduct(b));
  };
  auto deflate = [&](Eigen::VectorXd& w) {
    for (const auto& q : locked) w -= mdot(q, w) * q;
  };
  // Projection alone lets Lanczos re-find locked pairs from rounding-level
  // components; shifting them to zero (Hotelling) removes them from the top.
  auto apply = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = op.apply(x);
    for (std::size_t i = 0; i < locked.size(); ++i)
      y -= (mdot(locked[i], x) / (locked_lambda[i] - shift)) * locked[i];
    return y;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  v = op.apply(v);  // lands in the constrained subspace
  deflate(v);
  v /= std::sqrt(mdot(v, v));

  const int kmax = static_cast<int>(std::min<Eigen::Index>(opt.max_krylov, n - static_cast<Eigen::Index>(locked.size())));
  std::vector<Eigen::VectorXd> V;
  std::vector<double> alpha, beta;
  V.push_back(v);

  LanczosPass out;
  Eigen::VectorXd theta;
  Eigen::MatrixXd Y;
  int checked_at = 0;
  for (int j = 0; j < kmax; ++j) {
    Eigen::VectorXd w = apply(V[j]);
    deflate(w);
    const double a = mdot(V[j], w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : V) w -= mdot(q, w) * q;
      deflate(w);
    }
    const double b = std::sqrt(std::max(mdot(w, w), 0.0));

    const int m = j + 1;
    const bool breakdown = b <= 1e-14 * std::abs(a) || m == kmax;
    const int need = std::min(count, m);
    if (breakdown || m >= std::max(2 * count + 10, checked_at + 8)) {
      checked_at = m;
      Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        Tm(i, i) = alpha[i];
        if (i + 1 < m) Tm(i, i + 1) = Tm(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tm);
      // Largest theta first: closest eigenvalues above the shift.
      theta = es.eigenvalues().reverse();
      Y = es.eigenvectors().rowwise().reverse();
      bool converged = true;
      for (int i = 0; i < need; ++i) {
        if (!(theta[i] > 0.0) || std::abs(b * Y(m - 1, i)) > opt.tol * std::abs(theta[i]))
          converged = false;
      }
      if (converged || breakdown) {
        for (int i = 0; i < need; ++i) {
          if (!(theta[i] > 0.0)) break;
          Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
          for (int k = 0; k < m; ++k) x += Y(k, i) * V[k];
          x /= std::sqrt(mdot(x, x));
          out.lambdas.push_back(shift + 1.0 / theta[i]);
          out.vectors.push_back(std::move(x));
        }
        if (!converged && !breakdown)
          fail(ErrorCode::Numerical, "Lanczos iteration did not converge");
        return out;
      }
    }
    beta.push_back(b);
    V.push_back(w / b);
  }
  fail(ErrorCode::Numerical, "Lanczos iteration did not converge");
}

}  // namespace

EigenResult lowest_eigenpairs(const SparseMatrix& A, const Eigen::VectorXd& mass,
                              const EigenOptions& opt, const SparseMatrix* constraint) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = constraint ? constraint->cols() : 0;
  require(A.cols() == n && mass.size() == n, "pencil dimensions disagree");
  require(opt.count >= 1 && opt.count <= n - m, "requested more eigenpairs than the space holds");
  require((mass.array() > 0.0).all(), "mass must be positive");

  if (n <= opt.dense_limit) return dense_solve(A, mass, opt.count, constraint);

  ShiftInvert op(A, mass, opt.shift, constraint);
  std::vector<double> lams;
  std::vector<Eigen::VectorXd> vecs;
  // Restart with locking until a fresh start vector finds nothing new below
  // the current count-th value; this recovers multiplicities.
  for (int pass = 0; pass < 8; ++pass) {
    const int want = opt.count;
    LanczosPass p = lanczos_pass(op, mass, opt.shift, want, opt, vecs, lams, 1234 + 17 * pass);
    bool improved = false;
    const bool full = static_cast<int>(lams.size()) >= opt.count;
    const double top = full ? *std::max_element(lams.begin(), lams.end()) : 0.0;
    for (std::size_t i = 0; i < p.lambdas.size(); ++i) {
      if (!full || p.lambdas[i] < top - 1e-10 * std::max(1.0, std::abs(top))) {
        lams.push_back(p.lambdas[i]);
        vecs.push_back(std::move(p.vectors[i]));
        improved = true;
      }
    }
    // Keep the lowest `count` of everything found so far.
    std::vector<std::size_t> idx(lams.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return lams[a] < lams[b]; });
    if (idx.size() > static_cast<std::size_t>(opt.count)) idx.resize(opt.count);
    std::vector<double> l2;
    std::vector<Eigen::VectorXd> v2;
    for (auto i : idx) {
      l2.push_back(lams[i]);
      v2.push_back(vecs[i]);
    }
    lams = std::move(l2);
    vecs = std::move(v2);
    if (!improved && static_cast<int>(lams.size()) >= opt.count) break;
    if (pass == 7) fail(ErrorCode::Numerical, "eigensolver restarts exhausted");
  }

  // Rayleigh-Ritz on the collected vectors to restore orthogonality across passes.
  const int k = static_cast<int>(vecs.size());
  Eigen::MatrixXd X(n, k);
  for (int i = 0; i < k; ++i) X.col(i) = vecs[i];
  const Eigen::MatrixXd AX = A * X;
  const Eigen::MatrixXd Ar = X.transpose() * AX;
  const Eigen::MatrixXd Mr = X.transpose() * mass.asDiagonal() * X;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Ar + Ar.transpose()),
                                                               0.5 * (Mr + Mr.transpose()));
  EigenResult out;
  out.values = es.eigenvalues();
  out.vectors = X * es.eigenvectors();
  for (int j = 0; j < k; ++j) {
    const double nrm = std::sqrt(out.vectors.col(j).dot(mass.cwiseProduct(out.vectors.col(j))));
    out.vectors.col(j) /= nrm;
  }
  return out;
}

Eigen::VectorXd tridiagonal_lowest(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                   int count) {
  const Eigen::Index n = diag.size();
  require(off.size() == std::max<Eigen::Index>(n - 1, 0), "tridiagonal sizes disagree");
  require(count >= 1 && count <= n, "tridiagonal: bad eigenvalue count");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  // Number of eigenvalues strictly below x (Sturm sequence via LDL^T pivots).
  auto count_below = [&](double x) {
    int c = 0;
    double d = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double o2 = i > 0 ? off[i - 1] * off[i - 1] : 0.0;
      d = diag[i] - x - (i > 0 ? o2 / d : 0.0);
      if (d == 0.0) d = -1e-300;
      if (d < 0.0) ++c;
    }
    return c;
  };
  Eigen::VectorXd out(count);
  const double span = std::max(hi - lo, 1e-300);
  for (int k = 0; k < count; ++k) {
    double a = lo - 1e-12 * span, b = hi + 1e-12 * span;
    for (int it = 0; it < 200 && b - a > 4e-16 * std::max({std::abs(a), std::abs(b), 1e-300}); ++it) {
      const double mid = 0.5 * (a + b);
      if (count_below(mid) > k) b = mid;
      else a = mid;
    }
    out[k] = 0.5 * (a + b);
  }
  return out;
}

Eigen::VectorXd tridiagonal_eigenvector(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                        double lambda) {
  const Eigen::Index n = diag.size();
  // Inverse iteration with a tiny offset; Thomas algorithm with partial pivoting is
  // unnecessary because the offset keeps pivots away from zero in practice.
  const double scale = std::max(diag.cwiseAbs().maxCoeff(), off.size() ? off.cwiseAbs().maxCoeff() : 0.0);
  const double mu = lambda + 1e-13 * std::max(scale, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] += 0.01 * std::sin(1.0 + 0.7 * static_cast<double>(i));
  std::vector<double> c(n), d(n);
  for (int it = 0; it < 3; ++it) {
    // Solve (T - mu) y = x.
    double piv = diag[0] - mu;
    if (piv == 0.0) piv = 1e-300;
    d[0] = x[0] / piv;
    for (Eigen::Index i = 1; i < n; ++i) {
      c[i - 1] = off[i - 1] / piv;
      piv = diag[i] - mu - off[i - 1] * c[i - 1];
      if (piv == 0.0) piv = 1e-300;
      d[i] = (x[i] - off[i - 1] * d[i - 1]) / piv;
    }
    Eigen::VectorXd y(n);
    y[n - 1] = d[n - 1];
    for (Eigen::Index i = n - 1; i-- > 0;) y[i] = d[i] - c[i] * y[i + 1];
    x = y / y.norm();
  }
  return x;
}

}  // namespace qtube::linalg
