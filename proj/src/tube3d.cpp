#include "qtube/tube3d.hpp"

#include "format.hpp"
#include "qtube/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace qtube {
namespace {

Vec2 curvature_vector(const CurveSpec& curve, double eps, std::size_t i) {
  const double a = curve.alpha()[i];
  return eps * curve.kappa()[i] * Vec2(std::cos(a), std::sin(a));
}

void add_block(linalg::Triplets& t, const linalg::SparseMatrix& A, int row0, int col0,
               double scale) {
  for (int c = 0; c < A.outerSize(); ++c)
    for (linalg::SparseMatrix::InnerIterator it(A, c); it; ++it)
      t.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                     scale * it.value());
}

}  // namespace

TubeFormAssembly assemble_form(const CurveSpec& curve, const CrossSectionMesh& mesh,
                               const SpectralResult& spectrum, double eps, int n,
                               const AssemblyOptions& opt) {
  require(std::isfinite(eps) && eps > 0.0, "eps must be positive");
  require(curve.size() >= 3, "curve needs at least one interior node");
  require(opt.threads >= 1, "thread count must be positive");
  const auto diag = validate_tube(curve, eps, mesh.radius());
  if (!diag.ok)
    fail(ErrorCode::InvalidInput, "tube map degenerates: min beta " + detail::num(diag.min_beta) +
                                      " at s = " + detail::num(diag.s_at_min));
  const EigenPair& un = spectrum.require_simple(n);
  require(un.u.size() == static_cast<Eigen::Index>(mesh.size()), "spectrum does not match the mesh");

  TubeFormAssembly out;
  out.eps = eps;
  out.n = n;
  out.lambda_n = un.lam;
  out.h_s = curve.h();
  out.s.assign(curve.s().begin() + 1, curve.s().end() - 1);
  out.section_size = mesh.size();
  out.modes = spectrum.pairs;
  out.sup_kappa = curve.sup_kappa();

  const std::size_t S = out.slabs(), N = mesh.size();
  const double hs = out.h_s, area = mesh.cell_area(), ie2 = 1.0 / (eps * eps);
  const auto D = mesh.rotation_generator();
  const auto Dc = mesh.cell_rotation_generator();
  const auto& cells = mesh.cell_centers();
  const auto& nodes = mesh.nodes();

  auto inv_beta = [&](std::size_t ci) {
    const Vec2 xi = curvature_vector(curve, eps, ci);
    Eigen::VectorXd b(static_cast<Eigen::Index>(N));
    for (std::size_t k = 0; k < N; ++k) b[static_cast<Eigen::Index>(k)] = 1.0 / (1.0 - xi.dot(nodes[k]));
    return b;
  };

  out.mass.resize(static_cast<Eigen::Index>(S * N));
  for (std::size_t i = 0; i < S; ++i)
    out.mass.segment(static_cast<Eigen::Index>(i * N), static_cast<Eigen::Index>(N)) =
        hs * mesh.mass(curvature_vector(curve, eps, i + 1));

  // Each slab emits its own rows: transverse and angular blocks, the s-edge to
  // its left (and right for the last slab), and both halves of the mixed term.
  auto slab_triplets = [&](std::size_t i, linalg::Triplets& t) {
    const std::size_t ci = i + 1;
    const int r0 = static_cast<int>(i * N);
    const Vec2 xi = curvature_vector(curve, eps, ci);
    const double g = curve.twist(ci);

    linalg::SparseMatrix T = mesh.stiffness(xi);
    const Eigen::VectorXd m = mesh.mass(xi);
    for (Eigen::Index k = 0; k < m.size(); ++k) T.coeffRef(k, k) -= out.lambda_n * m[k];
    add_block(t, T, r0, r0, hs * ie2);

    if (g != 0.0) {
      Eigen::VectorXd wc(static_cast<Eigen::Index>(cells.size()));
      for (std::size_t c = 0; c < cells.size(); ++c)
        wc[static_cast<Eigen::Index>(c)] = area / (1.0 - xi.dot(cells[c]));
      const linalg::SparseMatrix A = Dc.transpose() * wc.asDiagonal() * Dc;
      add_block(t, A, r0, r0, hs * g * g);
    }

    const Eigen::VectorXd ib = inv_beta(ci);
    auto edge = [&](std::size_t left_ci, bool left_unknown, bool right_unknown, int left_row,
                    int right_row) {
      const Eigen::VectorXd ibl = inv_beta(left_ci);
      const Eigen::VectorXd ibr = inv_beta(left_ci + 1);
      for (std::size_t k = 0; k < N; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double w = 0.5 * (ibl[kk] + ibr[kk]) * area / hs;
        const int a = left_row + static_cast<int>(k), b = right_row + static_cast<int>(k);
        if (left_unknown) t.emplace_back(a, a, w);
        if (right_unknown) t.emplace_back(b, b, w);
        if (left_unknown && right_unknown) {
          t.emplace_back(a, b, -w);
          t.emplace_back(b, a, -w);
        }
      }
    };
    edge(ci - 1, i > 0, true, r0 - static_cast<int>(N), r0);
    if (i + 1 == S) edge(ci, true, false, r0, r0 + static_cast<int>(N));

    // -2 (g / beta) (d_s psi)(d_theta psi) with central d_s: the coefficient of
    // psi_{i+-1,k} * psi_{i,l} is -+ g area / beta_ik * D_kl.
    if (g != 0.0) {
      for (int c = 0; c < D.outerSize(); ++c)
        for (linalg::SparseMatrix::InnerIterator it(D, c); it; ++it) {
          const auto k = it.row();
          const double coef = g * area * ib[k] * it.value();
          const int col = r0 + static_cast<int>(it.col());
          if (i + 1 < S) {
            const int row = r0 + static_cast<int>(N) + static_cast<int>(k);
            t.emplace_back(row, col, -0.5 * coef);
            t.emplace_back(col, row, -0.5 * coef);
          }
          if (i > 0) {
            const int row = r0 - static_cast<int>(N) + static_cast<int>(k);
            t.emplace_back(row, col, 0.5 * coef);
            t.emplace_back(col, row, 0.5 * coef);
          }
        }
    }
  };

  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(opt.threads), S);
  std::vector<linalg::Triplets> parts(nthreads);
  auto work = [&](std::size_t p) {
    const std::size_t lo = S * p / nthreads, hi = S * (p + 1) / nthreads;
    for (std::size_t i = lo; i < hi; ++i) slab_triplets(i, parts[p]);
  };
  if (nthreads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t p = 0; p < nthreads; ++p) pool.emplace_back(work, p);
    for (auto& th : pool) th.join();
  }
  // Concatenating in slab order keeps the summation order, and so the matrix,
  // independent of the thread count.
  linalg::Triplets all;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  all.reserve(total);
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  out.stiffness.resize(static_cast<Eigen::Index>(S * N), static_cast<Eigen::Index>(S * N));
  out.stiffness.setFromTriplets(all.begin(), all.end());
  return out;
}

TubeFormAssembly assemble_form(const CurveSpec& curve, const CrossSectionMesh& mesh, double eps,
                               int n, const AssemblyOptions& opt) {
  require(n >= 0, "mode index must be non-negative");
  return assemble_form(curve, mesh, dirichlet_eigenpairs(mesh, n + 2), eps, n, opt);
}

SectorProjector::SectorProjector(const TubeFormAssembly& asm_, int n)
    : n_(n), slabs_(asm_.slabs()), section_(asm_.section_size) {
  require(n >= 1, "sector projection needs n >= 1");
  require(static_cast<int>(asm_.modes.size()) >= n, "assembly holds too few cross-section modes");
  u_.resize(static_cast<Eigen::Index>(section_), n);
  for (int k = 0; k < n; ++k) u_.col(k) = asm_.modes[static_cast<std::size_t>(k)].u;
  linalg::Triplets t;
  for (std::size_t i = 0; i < slabs_; ++i)
    for (int k = 0; k < n; ++k)
      for (std::size_t q = 0; q < section_; ++q) {
        const double v = u_(static_cast<Eigen::Index>(q), k);
        if (v != 0.0)
          t.emplace_back(static_cast<int>(i * section_ + q), static_cast<int>(i) * n + k, v);
      }
  c_.resize(static_cast<Eigen::Index>(slabs_ * section_), static_cast<Eigen::Index>(slabs_) * n);
  c_.setFromTriplets(t.begin(), t.end());
}

Eigen::VectorXd SectorProjector::apply(const Eigen::VectorXd& psi) const {
  require(psi.size() == static_cast<Eigen::Index>(slabs_ * section_), "vector size mismatch");
  Eigen::VectorXd out = psi;
  // The u_k are orthonormal only up to solver accuracy; Gram matrix keeps P exact.
  const Eigen::MatrixXd gram = u_.transpose() * u_;
  const Eigen::LDLT<Eigen::MatrixXd> g(gram);
  for (std::size_t i = 0; i < slabs_; ++i) {
    auto seg = out.segment(static_cast<Eigen::Index>(i * section_), static_cast<Eigen::Index>(section_));
    const Eigen::VectorXd c = g.solve(u_.transpose() * seg);
    seg -= u_ * c;
  }
  return out;
}

TubeSpectrum tube_eigenvalues(const TubeFormAssembly& asm_, int j_max, const SectorProjector* sector) {
  require(j_max >= 1, "j_max must be positive");
  if (asm_.n >= 1 && !sector)
    fail(ErrorCode::MustProject, "the pencil for n >= 1 is indefinite; pass the sector projector");
  if (sector) require(sector->n() == asm_.n, "sector index differs from the assembly mode");
  linalg::EigenOptions opt;
  opt.count = j_max;
  opt.shift = -(0.5 * asm_.sup_kappa * asm_.sup_kappa + 1.0);
  const auto r = linalg::lowest_eigenpairs(asm_.stiffness, asm_.mass, opt,
                                           sector ? &sector->constraint() : nullptr);
  return {r.values, r.vectors};
}

double leak_estimate(const TubeFormAssembly& asm_, const Eigen::VectorXd& w, int j) {
  require(w.size() == static_cast<Eigen::Index>(asm_.slabs()), "w must live on the interior s-nodes");
  require(std::abs(w.squaredNorm() * asm_.h_s - 1.0) <= 1e-8, "w must have unit norm");
  require(j >= 0 && j < static_cast<int>(asm_.modes.size()), "mode j not available in the assembly");
  const Eigen::VectorXd& u = asm_.modes[static_cast<std::size_t>(j)].u;
  const Eigen::Index N = u.size();
  Eigen::VectorXd psi(asm_.stiffness.rows());
  for (Eigen::Index i = 0; i < w.size(); ++i) psi.segment(i * N, N) = w[i] * u;
  return asm_.eps * asm_.eps * psi.dot(asm_.stiffness * psi);
}

ConfinementStudy confinement_study(const CurveSpec& curve, const CrossSectionMesh& mesh, int n,
                                   const std::vector<double>& eps_list, int j_max,
                                   const AssemblyOptions& opt) {
  require(!eps_list.empty(), "eps list is empty");
  require(n >= 0, "mode index must be non-negative");
  const SpectralResult spec = dirichlet_eigenpairs(mesh, n + 2);
  const EigenPair& un = spec.require_simple(n);

  ConfinementStudy study;
  study.c_n = twist_coefficient(mesh, un);
  study.lambda_n = un.lam;
  study.gamma = curve.sup_kappa() > 0.0 ? curvature_form(mesh, n, spec.pairs)
                                         : Eigen::Matrix2d(-0.25 * Eigen::Matrix2d::Identity());
  study.effective =
      schrodinger_eigen(effective_potential(curve, study.c_n, n, study.gamma), j_max);
  study.continuum = schrodinger_eigen(effective_potential(curve, study.c_n, n), j_max);

  for (double eps : eps_list) {
    const TubeFormAssembly a = assemble_form(curve, mesh, spec, eps, n, opt);
    std::unique_ptr<SectorProjector> sector;
    if (n >= 1) sector = std::make_unique<SectorProjector>(a, n);
    const TubeSpectrum ts = tube_eigenvalues(a, j_max, sector.get());
    const Eigen::Index N = static_cast<Eigen::Index>(mesh.size());
    for (int j = 0; j < j_max; ++j) {
      Eigen::VectorXd phi(a.stiffness.rows());
      const auto w = study.effective.w.col(j);
      for (Eigen::Index i = 0; i < w.size(); ++i) phi.segment(i * N, N) = w[i] * un.u;
      phi /= std::sqrt(phi.dot(a.mass.cwiseProduct(phi)));
      const double ov = std::abs(phi.dot(a.mass.cwiseProduct(ts.vectors.col(j))));
      const double mu = study.effective.mu[j];
      study.rows.push_back({eps, j, ts.values[j], mu, ts.values[j] - mu, ov});
    }
  }

  study.fitted_order.assign(static_cast<std::size_t>(j_max), 0.0);
  if (eps_list.size() >= 2) {
    for (int j = 0; j < j_max; ++j) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
      for (const auto& r : study.rows) {
        if (r.j != j || r.diff == 0.0) continue;
        const double x = std::log(r.eps), y = std::log(std::abs(r.diff));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1;
      }
      const double den = m * sxx - sx * sx;
      study.fitted_order[static_cast<std::size_t>(j)] = den > 0 ? (m * sxy - sx * sy) / den : 0.0;
    }
  }
  return study;
}

void write_confinement_csv(std::ostream& out, const ConfinementStudy& study) {
  out << "eps,j,eig_tube,mu_eff,diff,overlap\n";
  for (const auto& r : study.rows)
    out << detail::num(r.eps) << ',' << r.j << ',' << detail::num(r.eig_tube) << ','
        << detail::num(r.mu_eff) << ',' << detail::num(r.diff) << ',' << detail::num(r.overlap)
        << '\n';
}

}  // namespace qtube
