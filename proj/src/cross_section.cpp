#include "qtube/cross_section.hpp"

#include "format.hpp"
#include "qtube/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace qtube {

ShapeSpec ShapeSpec::rectangle(double a, double b) {
  require(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0,
          "rectangle sides must be positive");
  ShapeSpec s;
  s.kind = Kind::Rectangle;
  s.a = a;
  s.b = b;
  return s;
}

ShapeSpec ShapeSpec::disc(double r) {
  require(std::isfinite(r) && r > 0.0, "disc radius must be positive");
  ShapeSpec s;
  s.kind = Kind::Disc;
  s.r = r;
  return s;
}

ShapeSpec ShapeSpec::from_mask(std::vector<std::vector<int>> rows) {
  require(!rows.empty() && !rows.front().empty(), "mask is empty");
  for (const auto& row : rows) {
    require(row.size() == rows.front().size(), "mask rows have different lengths");
    for (int v : row) require(v == 0 || v == 1, "mask entries must be 0 or 1");
  }
  ShapeSpec s;
  s.kind = Kind::Mask;
  s.mask = std::move(rows);
  return s;
}

ShapeSpec ShapeSpec::read_mask(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open mask file " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
    std::vector<int> row;
    for (char c : line) {
      if (c == '0' || c == '1') row.push_back(c - '0');
      else if (!std::isspace(static_cast<unsigned char>(c)))
        fail(ErrorCode::InvalidInput, std::string("unexpected character in mask: ") + c);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return from_mask(std::move(rows));
}

ShapeSpec ShapeSpec::parse(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  if (kind == "rectangle") {
    double a = 0, b = 0;
    require(static_cast<bool>(in >> a >> b), "rectangle needs two sides");
    std::string extra;
    require(!(in >> extra), "trailing text after rectangle sides");
    return rectangle(a, b);
  }
  if (kind == "disc") {
    double r = 0;
    require(static_cast<bool>(in >> r), "disc needs a radius");
    std::string extra;
    require(!(in >> extra), "trailing text after disc radius");
    return disc(r);
  }
  if (kind == "mask") {
    std::string path;
    require(static_cast<bool>(in >> path), "mask needs a path");
    return read_mask(path);
  }
  fail(ErrorCode::InvalidInput, "unknown section shape '" + kind + "'");
}

std::string ShapeSpec::describe() const {
  switch (kind) {
    case Kind::Rectangle:
      return "rectangle " + detail::num(a) + " " + detail::num(b);
    case Kind::Disc:
      return "disc " + detail::num(r);
    case Kind::Mask:
      return "mask " + std::to_string(mask.size()) + "x" + std::to_string(mask.front().size());
  }
  return {};
}

CrossSectionMesh CrossSectionMesh::build(const ShapeSpec& shape, double h) {
  require(std::isfinite(h) && h > 0.0, "mesh spacing must be positive");
  CrossSectionMesh m;
  m.shape_ = shape;
  std::vector<char> inside;
  switch (shape.kind) {
    case ShapeSpec::Kind::Rectangle: {
      const int mx = std::max(1, static_cast<int>(std::lround(shape.a / h)));
      const int my = std::max(1, static_cast<int>(std::lround(shape.b / h)));
      m.hx_ = shape.a / mx;
      m.hy_ = shape.b / my;
      m.nx_ = mx - 1;
      m.ny_ = my - 1;
      m.x0_ = -0.5 * shape.a + m.hx_;
      m.y0_ = -0.5 * shape.b + m.hy_;
      inside.assign(static_cast<std::size_t>(std::max(m.nx_ * m.ny_, 0)), 1);
      m.radius_ = 0.5 * std::hypot(shape.a, shape.b);
      break;
    }
    case ShapeSpec::Kind::Disc: {
      const int k = static_cast<int>(std::ceil(shape.r / h));
      m.hx_ = m.hy_ = h;
      m.nx_ = m.ny_ = 2 * k + 1;
      m.x0_ = m.y0_ = -k * h;
      inside.resize(static_cast<std::size_t>(m.nx_) * m.ny_);
      // Nodes closer than 1e-3 h to the circle are treated as boundary points.
      const double rin = shape.r - 1e-3 * h;
      const double r2 = rin * rin;
      for (int j = 0; j < m.ny_; ++j)
        for (int i = 0; i < m.nx_; ++i) {
          const double x = m.x0_ + i * h, y = m.y0_ + j * h;
          inside[static_cast<std::size_t>(i + m.nx_ * j)] = x * x + y * y < r2;
        }
      m.radius_ = shape.r;
      break;
    }
    case ShapeSpec::Kind::Mask: {
      const int rows = static_cast<int>(shape.mask.size());
      const int cols = static_cast<int>(shape.mask.front().size());
      m.hx_ = m.hy_ = h;
      m.nx_ = cols;
      m.ny_ = rows;
      m.x0_ = -0.5 * (cols - 1) * h;
      m.y0_ = -0.5 * (rows - 1) * h;
      inside.resize(static_cast<std::size_t>(rows) * cols);
      for (int j = 0; j < rows; ++j)
        for (int i = 0; i < cols; ++i)
          inside[static_cast<std::size_t>(i + cols * j)] = shape.mask[rows - 1 - j][i] == 1;
      break;
    }
  }

  m.map_.assign(inside.size(), -1);
  for (int j = 0; j < m.ny_; ++j)
    for (int i = 0; i < m.nx_; ++i) {
      const std::size_t g = static_cast<std::size_t>(i + m.nx_ * j);
      if (!inside[g]) continue;
      m.map_[g] = static_cast<int>(m.nodes_.size());
      m.nodes_.emplace_back(m.x0_ + i * m.hx_, m.y0_ + j * m.hy_);
    }
  require(!m.nodes_.empty(), "cross section has no interior grid point");

  if (shape.kind == ShapeSpec::Kind::Mask) {
    double rmax = 0.0;
    for (const auto& y : m.nodes_) rmax = std::max(rmax, y.norm());
    m.radius_ = rmax + h;  // the staircase boundary lies within one pitch
  }

  m.nbr_.resize(m.nodes_.size());
  m.frac_.assign(m.nodes_.size(), {1.0, 1.0, 1.0, 1.0});
  for (int j = 0; j < m.ny_; ++j)
    for (int i = 0; i < m.nx_; ++i) {
      const int k = m.index(i, j);
      if (k < 0) continue;
      const auto kk = static_cast<std::size_t>(k);
      m.nbr_[kk] = {m.index(i + 1, j), m.index(i - 1, j), m.index(i, j + 1), m.index(i, j - 1)};
      if (shape.kind != ShapeSpec::Kind::Disc) continue;
      const Vec2& y = m.nodes_[kk];
      const double cx = std::sqrt(std::max(shape.r * shape.r - y[1] * y[1], 0.0));
      const double cy = std::sqrt(std::max(shape.r * shape.r - y[0] * y[0], 0.0));
      const double dist[4] = {cx - y[0], cx + y[0], cy - y[1], cy + y[1]};
      for (int d = 0; d < 4; ++d)
        if (m.nbr_[kk][d] < 0) m.frac_[kk][d] = std::clamp(dist[d] / h, 1e-3, 1.0);
    }

  // Linear extrapolation of an exterior lattice point from its interior axis
  // neighbours, vanishing where the link crosses the boundary.
  auto corner = [&m](int i, int j) {
    std::vector<std::pair<int, double>> terms;
    if (const int k = m.index(i, j); k >= 0) {
      terms.emplace_back(k, 1.0);
      return terms;
    }
    // Neighbour offset and the direction pointing from that neighbour back here.
    const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1}, back[4] = {0, 1, 2, 3};
    for (int q = 0; q < 4; ++q) {
      const int p = m.index(i + di[q], j + dj[q]);
      if (p < 0) continue;
      const double th = m.frac_[static_cast<std::size_t>(p)][back[q]];
      if (th < 1.0) terms.emplace_back(p, (th - 1.0) / th);
      else terms.emplace_back(p, 0.0);
    }
    if (terms.empty()) return terms;
    const double inv = 1.0 / static_cast<double>(terms.size());
    for (auto& t : terms) t.second *= inv;
    return terms;
  };
  for (int j = -1; j < m.ny_; ++j)
    for (int i = -1; i < m.nx_; ++i) {
      if (m.index(i, j) < 0 && m.index(i + 1, j) < 0 && m.index(i, j + 1) < 0 &&
          m.index(i + 1, j + 1) < 0)
        continue;
      const Vec2 centre(m.x0_ + (i + 0.5) * m.hx_, m.y0_ + (j + 0.5) * m.hy_);
      if (shape.kind == ShapeSpec::Kind::Disc && centre.norm() >= shape.r) continue;
      m.cells_.push_back(centre);
      m.cell_corners_.push_back({corner(i, j), corner(i + 1, j), corner(i, j + 1),
                                 corner(i + 1, j + 1)});
    }
  return m;
}

int CrossSectionMesh::index(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
  return map_[static_cast<std::size_t>(i + nx_ * j)];
}

linalg::SparseMatrix CrossSectionMesh::stiffness(const Vec2& xi) const {
  const std::size_t n = nodes_.size();
  linalg::Triplets t;
  t.reserve(5 * n);
  const double area = cell_area();
  const double cx = area / (hx_ * hx_), cy = area / (hy_ * hy_);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& y = nodes_[k];
    const auto& nb = nbr_[k];
    const int kk = static_cast<int>(k);
    // East and north edges are owned by this node; ghost edges on all four sides.
    const auto& th = frac_[k];
    const Vec2 off[4] = {{0.5 * hx_, 0.0}, {-0.5 * hx_, 0.0}, {0.0, 0.5 * hy_}, {0.0, -0.5 * hy_}};
    for (int d = 0; d < 4; ++d) {
      if (nb[d] < 0) {
        const double c = (d < 2 ? cx : cy) * (1.0 - xi.dot(y + th[d] * off[d])) / th[d];
        t.emplace_back(kk, kk, c);
        continue;
      }
      const double c = (d < 2 ? cx : cy) * (1.0 - xi.dot(y + off[d]));
      if (d == 0 || d == 2) {
        t.emplace_back(kk, kk, c);
        t.emplace_back(nb[d], nb[d], c);
        t.emplace_back(kk, nb[d], -c);
        t.emplace_back(nb[d], kk, -c);
      }
    }
  }
  linalg::SparseMatrix K(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

Eigen::VectorXd CrossSectionMesh::mass(const Vec2& xi) const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(nodes_.size()));
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    m[static_cast<Eigen::Index>(k)] = (1.0 - xi.dot(nodes_[k])) * cell_area();
  return m;
}

linalg::SparseMatrix CrossSectionMesh::rotation_generator() const {
  const std::size_t n = nodes_.size();
  linalg::Triplets t;
  t.reserve(4 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& y = nodes_[k];
    const auto& nb = nbr_[k];
    const int kk = static_cast<int>(k);
    const double ax = -y[1] / (2.0 * hx_), ay = y[0] / (2.0 * hy_);
    if (nb[0] >= 0) t.emplace_back(kk, nb[0], ax);
    if (nb[1] >= 0) t.emplace_back(kk, nb[1], -ax);
    if (nb[2] >= 0) t.emplace_back(kk, nb[2], ay);
    if (nb[3] >= 0) t.emplace_back(kk, nb[3], -ay);
  }
  linalg::SparseMatrix D(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

linalg::SparseMatrix CrossSectionMesh::cell_rotation_generator() const {
  linalg::Triplets t;
  t.reserve(4 * cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Vec2& y = cells_[c];
    const auto& k = cell_corners_[c];
    const double ax = -y[1] / (2.0 * hx_), ay = y[0] / (2.0 * hy_);
    // Corner weights: d/dy1 is +-1/(2hx) on the east/west pairs, d/dy2 likewise.
    const double w[4] = {-ax - ay, ax - ay, -ax + ay, ax + ay};
    for (int q = 0; q < 4; ++q)
      for (const auto& [node, f] : k[q])
        if (f != 0.0) t.emplace_back(static_cast<int>(c), node, w[q] * f);
  }
  linalg::SparseMatrix D(static_cast<Eigen::Index>(cells_.size()),
                         static_cast<Eigen::Index>(nodes_.size()));
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

bool SpectralResult::is_simple(int n) const {
  for (int k : flagged_gaps)
    if (k == n || k + 1 == n) return false;
  return true;
}

const EigenPair& SpectralResult::require_simple(int n) const {
  require(n >= 0 && n < static_cast<int>(pairs.size()), "mode index out of range");
  if (!is_simple(n))
    fail(ErrorCode::DegenerateSpectrum,
         "cross-section eigenvalue " + std::to_string(n) + " is not simple");
  return pairs[static_cast<std::size_t>(n)];
}

namespace {

void fix_sign(Eigen::VectorXd& u) {
  const double big = u.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u[i]) >= (1.0 - 1e-6) * big) {
      if (u[i] < 0.0) u = -u;
      return;
    }
  }
}

}  // namespace

SpectralResult dirichlet_eigenpairs(const CrossSectionMesh& mesh, int n_modes,
                                    double simplicity_tol) {
  require(n_modes >= 1, "need at least one mode");
  const int available = static_cast<int>(mesh.size());
  require(n_modes <= available, "more modes requested than mesh unknowns");
  linalg::EigenOptions opt;
  opt.count = std::min(n_modes + 1, available);
  opt.shift = 0.0;
  const auto res = linalg::lowest_eigenpairs(mesh.stiffness(), mesh.mass(), opt);

  SpectralResult out;
  out.simplicity_tol = simplicity_tol;
  for (int k = 0; k < n_modes; ++k) {
    EigenPair p;
    p.lam = res.values[k];
    p.u = res.vectors.col(k);
    fix_sign(p.u);
    out.pairs.push_back(std::move(p));
  }
  for (int k = 0; k + 1 < static_cast<int>(res.values.size()); ++k) {
    const double gap = (res.values[k + 1] - res.values[k]) / std::abs(res.values[k]);
    if (gap < simplicity_tol) out.flagged_gaps.push_back(k);
  }
  return out;
}

double twist_coefficient(const CrossSectionMesh& mesh, const EigenPair& pair) {
  require(pair.u.size() == static_cast<Eigen::Index>(mesh.size()),
          "eigenvector does not match the mesh");
  const Eigen::VectorXd v = mesh.cell_rotation_generator() * pair.u;
  return v.squaredNorm() * mesh.cell_area();
}

double constrained_weighted_eigenvalue(const CrossSectionMesh& mesh, const Vec2& xi, int n,
                                       const std::vector<EigenPair>& basis) {
  require(n >= 0 && static_cast<int>(basis.size()) >= n, "basis must hold modes 0..n-1");
  require(xi.allFinite(), "xi must be finite");
  if (xi.norm() * mesh.radius() >= 1.0)
    fail(ErrorCode::InvalidInput, "weight 1 - xi.y is not positive on the section");
  const Eigen::Index N = static_cast<Eigen::Index>(mesh.size());
  linalg::EigenOptions opt;
  opt.count = 1;
  opt.shift = 0.0;
  if (n == 0) return linalg::lowest_eigenpairs(mesh.stiffness(xi), mesh.mass(xi), opt).values[0];
  linalg::Triplets t;
  for (int k = 0; k < n; ++k) {
    const auto& u = basis[static_cast<std::size_t>(k)].u;
    require(u.size() == N, "basis vector does not match the mesh");
    for (Eigen::Index i = 0; i < N; ++i)
      if (u[i] != 0.0) t.emplace_back(static_cast<int>(i), k, u[i]);
  }
  linalg::SparseMatrix C(N, n);
  C.setFromTriplets(t.begin(), t.end());
  return linalg::lowest_eigenpairs(mesh.stiffness(xi), mesh.mass(xi), opt, &C).values[0];
}

CurvatureFit curvature_coefficient(const CrossSectionMesh& mesh, int n,
                                   const std::vector<EigenPair>& basis, const Vec2& direction,
                                   const std::vector<double>& xi_norms) {
  require(!xi_norms.empty(), "need at least one |xi|");
  require(direction.norm() > 0.0, "direction must be nonzero");
  const Vec2 d = direction.normalized();
  CurvatureFit fit;
  fit.xi_norms = xi_norms;
  fit.lambda_n = constrained_weighted_eigenvalue(mesh, Vec2::Zero(), n, basis);
  for (double r : xi_norms) {
    require(r > 0.0, "|xi| samples must be positive");
    const double lp = constrained_weighted_eigenvalue(mesh, r * d, n, basis);
    const double lm = constrained_weighted_eigenvalue(mesh, -r * d, n, basis);
    fit.gamma.push_back((0.5 * (lp + lm) - fit.lambda_n) / (r * r));
    fit.max_odd_part = std::max(fit.max_odd_part, std::abs(lp - lm));
  }
  if (xi_norms.size() == 1) {
    fit.coefficient = fit.gamma.front();
    return fit;
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(xi_norms.size()), 2);
  Eigen::VectorXd g(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double r = xi_norms[static_cast<std::size_t>(i)];
    A(i, 0) = 1.0;
    A(i, 1) = r * r;
    g[i] = fit.gamma[static_cast<std::size_t>(i)];
  }
  fit.coefficient = A.colPivHouseholderQr().solve(g)[0];
  return fit;
}

Eigen::Matrix2d curvature_form(const CrossSectionMesh& mesh, int n,
                               const std::vector<EigenPair>& basis,
                               const std::vector<double>& xi_norms) {
  const double gx = curvature_coefficient(mesh, n, basis, Vec2(1, 0), xi_norms).coefficient;
  const double gy = curvature_coefficient(mesh, n, basis, Vec2(0, 1), xi_norms).coefficient;
  const double gd = curvature_coefficient(mesh, n, basis, Vec2(1, 1), xi_norms).coefficient;
  // Along (1,1)/sqrt2: gd = (gx + gy)/2 + gxy.
  Eigen::Matrix2d G;
  G << gx, gd - 0.5 * (gx + gy), gd - 0.5 * (gx + gy), gy;
  return G;
}

void write_eigen_csv(std::ostream& out, const CrossSectionMesh& mesh,
                     const SpectralResult& spec) {
  out << "index,lambda,C_n\n";
  for (std::size_t k = 0; k < spec.pairs.size(); ++k)
    out << k << ',' << detail::num(spec.pairs[k].lam) << ','
        << detail::num(twist_coefficient(mesh, spec.pairs[k])) << '\n';
}

}  // namespace qtube
