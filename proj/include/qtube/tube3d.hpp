#pragma once

#include "qtube/cross_section.hpp"
#include "qtube/effective_operator.hpp"
#include "qtube/geometry.hpp"
#include "qtube/linalg.hpp"

#include <iosfwd>
#include <memory>
#include <vector>

namespace qtube {

/// The regularized form b_n^eps and weighted inner product on the tensor grid
/// (interior s-nodes) x (cross-section nodes). Unknown (i, k) sits at i * N + k.
struct TubeFormAssembly {
  linalg::SparseMatrix stiffness;
  Eigen::VectorXd mass;  // diagonal: h_s * beta * cell area
  double eps = 0.0;
  int n = 0;
  double lambda_n = 0.0;
  double h_s = 0.0;
  std::vector<double> s;  // interior s-nodes, one per slab
  std::size_t section_size = 0;
  /// Cross-section modes 0..m-1 from the same mesh, reused for projections and probes.
  std::vector<EigenPair> modes;
  double sup_kappa = 0.0;

  std::size_t slabs() const { return s.size(); }
  std::size_t size() const { return s.size() * section_size; }
};

struct AssemblyOptions {
  int threads = 1;
};

/// `spectrum` must come from the same mesh and contain mode n.
TubeFormAssembly assemble_form(const CurveSpec& curve, const CrossSectionMesh& mesh,
                               const SpectralResult& spectrum, double eps, int n,
                               const AssemblyOptions& opt = {});

/// Convenience overload computing the cross-section modes itself.
TubeFormAssembly assemble_form(const CurveSpec& curve, const CrossSectionMesh& mesh, double eps,
                               int n, const AssemblyOptions& opt = {});

/// Orthogonal projection (unweighted) onto the complement of span{w(s) u_k(y), k < n}.
class SectorProjector {
 public:
  SectorProjector(const TubeFormAssembly& asm_, int n);

  int n() const { return n_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& psi) const;
  /// Columns e_i (x) u_k spanning the removed sector.
  const linalg::SparseMatrix& constraint() const { return c_; }

 private:
  int n_;
  std::size_t slabs_, section_;
  Eigen::MatrixXd u_;  // section_ x n
  linalg::SparseMatrix c_;
};

struct TubeSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // unit in the weighted norm
};

/// Lowest j_max eigenpairs of the pencil. MustProject when n >= 1 and no sector is given.
TubeSpectrum tube_eigenvalues(const TubeFormAssembly& asm_, int j_max,
                              const SectorProjector* sector = nullptr);

/// eps^2 b_n^eps(w u_j) for w on the interior s-nodes with sum w^2 h_s = 1.
double leak_estimate(const TubeFormAssembly& asm_, const Eigen::VectorXd& w, int j);

struct ConfinementRow {
  double eps;
  int j;
  double eig_tube;
  double mu_eff;
  double diff;
  double overlap;
};

struct ConfinementStudy {
  /// mu_eff uses the mesh's own curvature form, the exact eps -> 0 limit of
  /// the discrete tube; `continuum` uses Gamma = -I/4 for reference.
  std::vector<ConfinementRow> rows;
  /// Least-squares slope of log|diff| against log eps, per j.
  std::vector<double> fitted_order;
  double c_n = 0.0;
  double lambda_n = 0.0;
  Eigen::Matrix2d gamma = Eigen::Matrix2d::Zero();
  Spectrum1D effective;
  Spectrum1D continuum;
};

ConfinementStudy confinement_study(const CurveSpec& curve, const CrossSectionMesh& mesh, int n,
                                   const std::vector<double>& eps_list, int j_max,
                                   const AssemblyOptions& opt = {});

/// CSV `eps,j,eig_tube,mu_eff,diff,overlap`.
void write_confinement_csv(std::ostream& out, const ConfinementStudy& study);

}  // namespace qtube
