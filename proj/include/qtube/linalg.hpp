#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace qtube::linalg {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct EigenOptions {
  int count = 1;
  /// Shift for shift-invert; must lie below the wanted eigenvalues.
  double shift = 0.0;
  double tol = 1e-12;
  int max_krylov = 320;
  /// Problems at or below this size are solved densely.
  int dense_limit = 1200;
};

struct EigenResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, unit norm in the mass inner product
};

/// Lowest `count` eigenpairs of the symmetric pencil A x = lam M x with a
/// positive diagonal mass M. With a constraint matrix C the pencil is
/// restricted to { x : C^T x = 0 }.
EigenResult lowest_eigenpairs(const SparseMatrix& A, const Eigen::VectorXd& mass,
                              const EigenOptions& opt, const SparseMatrix* constraint = nullptr);

/// Sparse factorization of a symmetric (possibly indefinite) matrix:
/// LDL^T first, LU when the LDL^T solve fails its residual check.
class SymmetricSolver {
 public:
  explicit SymmetricSolver(const SparseMatrix& K);
  ~SymmetricSolver();
  SymmetricSolver(const SymmetricSolver&) = delete;
  SymmetricSolver& operator=(const SymmetricSolver&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  bool used_lu() const { return lu_ != nullptr; }

 private:
  struct Ldlt;
  struct Lu;
  std::unique_ptr<Ldlt> ldlt_;
  std::unique_ptr<Lu> lu_;
};

/// Symmetric tridiagonal eigenvalues by Sturm bisection; returns the lowest `count`.
Eigen::VectorXd tridiagonal_lowest(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                   int count);

/// Eigenvector of the tridiagonal matrix for an accurately known eigenvalue.
Eigen::VectorXd tridiagonal_eigenvector(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                        double lambda);

}  // namespace qtube::linalg
