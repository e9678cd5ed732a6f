#pragma once

#include "qtube/geometry.hpp"
#include "qtube/linalg.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace qtube {

/// Cross-section shape, centred at the origin.
struct ShapeSpec {
  enum class Kind { Rectangle, Disc, Mask };

  Kind kind = Kind::Rectangle;
  double a = 0.0, b = 0.0;  // rectangle sides
  double r = 0.0;           // disc radius
  // Mask rows, top row first; 1 marks an interior node. Pixel pitch is the mesh h.
  std::vector<std::vector<int>> mask;

  static ShapeSpec rectangle(double a, double b);
  static ShapeSpec disc(double r);
  static ShapeSpec from_mask(std::vector<std::vector<int>> rows);
  static ShapeSpec read_mask(const std::string& path);

  /// Parses "rectangle a b", "disc r" or "mask path".
  static ShapeSpec parse(const std::string& text);
  std::string describe() const;
};

/// Interior lattice nodes of S on a uniform grid; Dirichlet data eliminated.
class CrossSectionMesh {
 public:
  static CrossSectionMesh build(const ShapeSpec& shape, double h);

  std::size_t size() const { return nodes_.size(); }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double cell_area() const { return hx_ * hy_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  /// sup |y| over S.
  double radius() const { return radius_; }
  const ShapeSpec& shape() const { return shape_; }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  /// Lattice (i, j) -> unknown index, -1 for boundary/exterior points.
  int index(int i, int j) const;
  /// Neighbour unknowns in order east, west, north, south; -1 is a Dirichlet ghost.
  const std::array<int, 4>& neighbors(std::size_t k) const { return nbr_[k]; }
  /// Distance to the boundary along each direction in units of the spacing;
  /// 1 unless the boundary cuts the link to a ghost (disc only).
  const std::array<double, 4>& boundary_fraction(std::size_t k) const { return frac_[k]; }

  /// Stiffness with u^T K u = sum over edges of w(midpoint) (du/dl)^2 * cell area,
  /// where w(y) = 1 - xi . y. xi = 0 gives the plain Dirichlet form. Links cut
  /// by a curved boundary use the true boundary distance (symmetric
  /// Shortley-Weller), which keeps the disc second order.
  linalg::SparseMatrix stiffness(const Vec2& xi = Vec2::Zero()) const;
  /// Nodal weights (1 - xi . y) * cell area.
  Eigen::VectorXd mass(const Vec2& xi = Vec2::Zero()) const;
  /// Central-difference angular derivative d/dtheta = -y2 d/dy1 + y1 d/dy2,
  /// with zero ghosts outside S. The matrix is exactly antisymmetric.
  linalg::SparseMatrix rotation_generator() const;

  /// Centres of the lattice cells touching at least one unknown, restricted
  /// to centres inside S.
  const std::vector<Vec2>& cell_centers() const { return cells_; }
  /// d/dtheta sampled at cell centres from the four corners (cells x nodes).
  /// Summing its square times the cell area is second order on rectangles,
  /// where the nodal sum would drop the boundary contribution.
  linalg::SparseMatrix cell_rotation_generator() const;

 private:
  ShapeSpec shape_;
  double hx_ = 0.0, hy_ = 0.0, x0_ = 0.0, y0_ = 0.0, radius_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<int> map_;
  std::vector<Vec2> nodes_;
  std::vector<std::array<int, 4>> nbr_;
  std::vector<std::array<double, 4>> frac_;
  std::vector<Vec2> cells_;
  // Corner values (i,j), (i+1,j), (i,j+1), (i+1,j+1) as combinations of unknowns;
  // exterior corners are linearly extrapolated to the boundary.
  std::vector<std::array<std::vector<std::pair<int, double>>, 4>> cell_corners_;
};

struct EigenPair {
  double lam = 0.0;
  /// Nodal values with sum u^2 * cell area = 1; largest-magnitude entry positive.
  Eigen::VectorXd u;
};

struct SpectralResult {
  std::vector<EigenPair> pairs;
  /// k is listed when the relative gap between modes k and k+1 is below tol.
  std::vector<int> flagged_gaps;
  double simplicity_tol = 1e-6;

  bool is_simple(int n) const;
  /// Mode n for downstream use; DegenerateSpectrum when it sits in a flagged gap.
  const EigenPair& require_simple(int n) const;
};

/// Lowest n_modes Dirichlet eigenpairs. One extra mode is computed so the gap
/// above the last returned mode is also checked.
SpectralResult dirichlet_eigenpairs(const CrossSectionMesh& mesh, int n_modes,
                                    double simplicity_tol = 1e-6);

/// Cell-centred quadrature of |d_theta u|^2.
double twist_coefficient(const CrossSectionMesh& mesh, const EigenPair& pair);

/// Lowest eigenvalue of the (1 - xi.y)-weighted Dirichlet pencil on the
/// complement of basis[0..n-1] in the unweighted inner product.
double constrained_weighted_eigenvalue(const CrossSectionMesh& mesh, const Vec2& xi, int n,
                                       const std::vector<EigenPair>& basis);

struct CurvatureFit {
  std::vector<double> xi_norms;
  std::vector<double> gamma;  // (lambda_n(xi) - lambda_n) / |xi|^2, symmetrized in +-xi
  double lambda_n = 0.0;
  double coefficient = 0.0;   // extrapolated xi -> 0 limit of gamma
  double max_odd_part = 0.0;  // max |lambda_n(xi) - lambda_n(-xi)|
};

/// Fits gamma = c + d |xi|^2 over |xi| in xi_norms along `direction`.
CurvatureFit curvature_coefficient(const CrossSectionMesh& mesh, int n,
                                   const std::vector<EigenPair>& basis, const Vec2& direction,
                                   const std::vector<double>& xi_norms);

/// Symmetric 2x2 Gamma with lambda_n(xi) - lambda_n ~ xi^T Gamma xi, from fits
/// along e_1, e_2 and the diagonal.
Eigen::Matrix2d curvature_form(const CrossSectionMesh& mesh, int n,
                               const std::vector<EigenPair>& basis,
                               const std::vector<double>& xi_norms = {0.02, 0.04, 0.06});

/// CSV `index,lambda,C_n`.
void write_eigen_csv(std::ostream& out, const CrossSectionMesh& mesh,
                     const SpectralResult& spec);

}  // namespace qtube
