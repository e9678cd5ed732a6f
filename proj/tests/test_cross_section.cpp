#include "oracles.hpp"

#include <qtube/cross_section.hpp>
#include <qtube/error.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace qtube;

namespace {
const double kPi = oracle::pi;
}

TEST(CrossSection, RectangleMatchesDiscreteClosedForm) {
  const double a = kPi, b = kPi / std::sqrt(2.0);
  const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(a, b), kPi / 32);
  const auto spec = dirichlet_eigenpairs(mesh, 5);
  const int mx = static_cast<int>(std::lround(a / mesh.hx()));
  const int my = static_cast<int>(std::lround(b / mesh.hy()));
  const auto ref = oracle::discrete_rectangle_eigs(a, b, mx, my, 5);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(spec.pairs[k].lam, ref[k], 1e-10 * ref[k]) << k;
}

TEST(CrossSection, RectangleConvergesAtSecondOrder) {
  const double a = kPi, b = kPi / std::sqrt(2.0);
  const auto exact = oracle::rectangle_eigs(a, b, 3);
  std::vector<double> err;
  for (int m : {16, 32, 64}) {
    const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(a, b), kPi / m);
    err.push_back(std::abs(dirichlet_eigenpairs(mesh, 3).pairs[2].lam - exact[2]));
  }
  EXPECT_NEAR(err[0] / err[1], 4.0, 0.5);
  EXPECT_NEAR(err[1] / err[2], 4.0, 0.5);
}

TEST(CrossSection, ResidualAndNormalization) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::disc(1.0), 1.0 / 24);
  const auto spec = dirichlet_eigenpairs(mesh, 4);
  const auto K = mesh.stiffness();
  const Eigen::VectorXd M = mesh.mass();
  for (const auto& p : spec.pairs) {
    const Eigen::VectorXd r = K * p.u - p.lam * M.cwiseProduct(p.u);
    EXPECT_LE(r.norm() / M.cwiseProduct(p.u).norm(), 1e-8 * p.lam);
    EXPECT_NEAR(p.u.squaredNorm() * mesh.cell_area(), 1.0, 1e-10);
    EXPECT_GT(p.u.maxCoeff(), -p.u.minCoeff() - 1e-14);
  }
  EXPECT_LE(linalg::SparseMatrix(K - linalg::SparseMatrix(K.transpose())).norm(), 1e-12 * K.norm());
}

TEST(CrossSection, DiscGroundState) {
  const double j01 = oracle::first_j0_zero();
  std::vector<double> err;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const auto mesh = CrossSectionMesh::build(ShapeSpec::disc(1.0), h);
    const auto spec = dirichlet_eigenpairs(mesh, 1);
    err.push_back(std::abs(spec.pairs[0].lam - j01 * j01));
  }
  EXPECT_LE(err.back() / (j01 * j01), 1e-3);
  EXPECT_GT(err[1] / err[2], 2.5);
}

TEST(CrossSection, RadialModeHasNoAngularEnergy) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::disc(1.0), 1.0 / 64);
  const auto spec = dirichlet_eigenpairs(mesh, 1);
  EXPECT_LE(std::abs(twist_coefficient(mesh, spec.pairs[0])), 1e-6);
}

TEST(CrossSection, TwistCoefficientOfRectangle) {
  const double a = kPi, b = kPi / std::sqrt(2.0);
  const double ref = oracle::rectangle_c0(a, b);
  std::vector<double> err;
  for (int m : {24, 48, 96}) {
    const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(a, b), kPi / m);
    auto spec = dirichlet_eigenpairs(mesh, 1);
    const double c = twist_coefficient(mesh, spec.pairs[0]);
    EXPECT_GT(c, 0.0);
    spec.pairs[0].u = -spec.pairs[0].u;
    EXPECT_EQ(twist_coefficient(mesh, spec.pairs[0]), c);
    err.push_back(std::abs(c - ref));
  }
  EXPECT_LE(err.back() / ref, 2e-3);
  EXPECT_GT(err[1] / err[2], 3.0);
}

TEST(CrossSection, RotationGeneratorIsAntisymmetric) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::disc(1.0), 0.1);
  const auto R = mesh.rotation_generator();
  EXPECT_EQ(linalg::SparseMatrix(R + linalg::SparseMatrix(R.transpose())).norm(), 0.0);
}

TEST(CrossSection, SquareDegeneracyIsFlagged) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(kPi, kPi), kPi / 32);
  const auto spec = dirichlet_eigenpairs(mesh, 3);
  EXPECT_TRUE(spec.is_simple(0));
  EXPECT_FALSE(spec.is_simple(1));
  EXPECT_FALSE(spec.is_simple(2));
  try {
    spec.require_simple(1);
    FAIL() << "degenerate mode accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSpectrum);
  }
}

TEST(CrossSection, ZeroXiRecoversUnweightedSpectrum) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(kPi, kPi / std::sqrt(2.0)), kPi / 24);
  const auto spec = dirichlet_eigenpairs(mesh, 3);
  for (int n = 0; n < 3; ++n)
    EXPECT_NEAR(constrained_weighted_eigenvalue(mesh, Vec2::Zero(), n, spec.pairs), spec.pairs[n].lam,
                1e-9 * spec.pairs[n].lam);
}

TEST(CrossSection, WeightMustStayPositive) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::disc(1.0), 0.1);
  const auto spec = dirichlet_eigenpairs(mesh, 1);
  EXPECT_THROW(constrained_weighted_eigenvalue(mesh, Vec2(1.5, 0.0), 0, spec.pairs), Error);
}

TEST(CrossSection, GroundCurvatureCoefficient) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(kPi, kPi / std::sqrt(2.0)), kPi / 32);
  const auto spec = dirichlet_eigenpairs(mesh, 3);
  for (const Vec2 dir : {Vec2(1, 0), Vec2(0, 1)}) {
    const auto fit = curvature_coefficient(mesh, 0, spec.pairs, dir, {0.02, 0.04, 0.06});
    EXPECT_NEAR(fit.coefficient, -0.25, 0.0125);
    EXPECT_LE(fit.max_odd_part, 1e-2);
  }
}

TEST(CrossSection, ShapeParsing) {
  EXPECT_EQ(ShapeSpec::parse("rectangle 3 2").kind, ShapeSpec::Kind::Rectangle);
  EXPECT_EQ(ShapeSpec::parse("disc 1").r, 1.0);
  EXPECT_THROW(ShapeSpec::parse("triangle 1"), Error);
  EXPECT_THROW(ShapeSpec::parse("disc -1"), Error);
}

TEST(CrossSection, MaskSquareMatchesRectangle) {
  std::vector<std::vector<int>> rows(7, std::vector<int>(7, 1));
  const auto mask = CrossSectionMesh::build(ShapeSpec::from_mask(rows), 0.5);
  const auto spec = dirichlet_eigenpairs(mask, 1);
  const auto ref = oracle::discrete_rectangle_eigs(4.0, 4.0, 8, 8, 1);
  EXPECT_NEAR(spec.pairs[0].lam, ref[0], 1e-10);
}

TEST(CrossSection, EigenCsvHasHeader) {
  const auto mesh = CrossSectionMesh::build(ShapeSpec::rectangle(2, 1), 0.25);
  std::ostringstream os;
  write_eigen_csv(os, mesh, dirichlet_eigenpairs(mesh, 2));
  EXPECT_EQ(os.str().rfind("index,lambda,C_n\n", 0), 0u);
}
