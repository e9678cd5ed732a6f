#include "oracles.hpp"

#include <qtube/error.hpp>
#include <qtube/geometry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace qtube;

namespace {

// Frenet frame of constant (kappa, tau): the triad rotates rigidly about the
// Darboux vector tau T0 + kappa B0 at rate sqrt(kappa^2 + tau^2).
Mat3 rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double max_frame_error(const FrameField& f, const CurveSpec& c, double kappa, double tau) {
  const Vec3 omega = tau * Vec3::UnitX() + kappa * Vec3::UnitZ();
  const double rate = omega.norm();
  double err = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Mat3 R = rotation(omega, rate * (c.s()[i] - c.s_min()));
    err = std::max({err, (f.T[i] - R * Vec3::UnitX()).norm(), (f.N[i] - R * Vec3::UnitY()).norm(),
                    (f.B[i] - R * Vec3::UnitZ()).norm()});
  }
  return err;
}

}  // namespace

TEST(Frame, StraightCurveKeepsInitialTriad) {
  const auto c = CurveSpec::straight(3.0, 30);
  const auto f = build_frame(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(f.T[i], Vec3::UnitX());
    EXPECT_EQ(f.N[i], Vec3::UnitY());
    EXPECT_EQ(f.B[i], Vec3::UnitZ());
  }
}

TEST(Frame, UnitCircle) {
  const int n = static_cast<int>(std::round(oracle::pi / 1e-3));
  const auto c = CurveSpec::circular_arc(oracle::pi, 1.0, n);
  const auto f = build_frame(c);
  double err = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double s = c.s()[i];
    err = std::max(err, (f.T[i] - Vec3(std::cos(s), std::sin(s), 0.0)).norm());
  }
  EXPECT_LE(err, 1e-8);
  EXPECT_LE(max_frame_error(f, c, 1.0, 0.0), 1e-8);
}

TEST(Frame, HelixMatchesRigidRotation) {
  const auto c = CurveSpec::helix(5.0, 1.0, 1.0, 5000);
  const auto f = build_frame(c);
  EXPECT_LE(max_frame_error(f, c, 1.0, 1.0), 1e-6);
}

TEST(Frame, OrthonormalAndRightHanded) {
  const auto c = CurveSpec::bump_curvature(10.0, 1.5, 5.0, 2.0, 10000);
  const auto f = build_frame(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(f.T[i].dot(f.N[i]), 0.0, 1e-10);
    EXPECT_NEAR(f.T[i].dot(f.B[i]), 0.0, 1e-10);
    EXPECT_NEAR(f.N[i].dot(f.B[i]), 0.0, 1e-10);
    EXPECT_NEAR(f.T[i].norm(), 1.0, 1e-10);
    EXPECT_LE((f.T[i].cross(f.N[i]) - f.B[i]).norm(), 1e-10);
  }
}

TEST(Curve, RejectsBadGrids) {
  EXPECT_THROW(CurveSpec::from_samples({0, 1, 3}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}), Error);
  EXPECT_THROW(CurveSpec::from_samples({0, 1, 2}, {0, NAN, 0}, {0, 0, 0}, {0, 0, 0}), Error);
}

TEST(Curve, DerivedAlphaDotIsExactForQuadratics) {
  std::vector<double> s, zero, alpha;
  for (int i = 0; i <= 20; ++i) {
    s.push_back(0.1 * i);
    zero.push_back(0.0);
    alpha.push_back(0.3 * s.back() * s.back() - s.back());
  }
  const auto c = CurveSpec::from_samples(s, zero, zero, alpha);
  EXPECT_TRUE(c.alpha_dot_derived());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(c.alpha_dot()[i], 0.6 * s[i] - 1.0, 1e-12);
}

TEST(Curve, TableRoundTrip) {
  const auto c = CurveSpec::helix(2.0, 0.7, 0.3, 40);
  std::stringstream ss;
  c.write(ss);
  const auto d = CurveSpec::from_stream(ss);
  ASSERT_EQ(d.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(d.s()[i], c.s()[i]);
    EXPECT_EQ(d.kappa()[i], c.kappa()[i]);
    EXPECT_EQ(d.tau()[i], c.tau()[i]);
    EXPECT_EQ(d.alpha_dot()[i], c.alpha_dot()[i]);
  }
}

TEST(Metric, BetaExamples) {
  const auto straight = CurveSpec::straight(1.0, 10);
  EXPECT_EQ(beta_weight(straight, 0.3, 0.5, Vec2(0.4, -0.2)), 1.0);
  const auto arc = CurveSpec::circular_arc(1.0, 1.0, 10);
  EXPECT_EQ(beta_weight(arc, 0.0, 0.5, Vec2(0.4, -0.2)), 1.0);
  EXPECT_NEAR(beta_weight(arc, 0.1, 0.5, Vec2(0.3, 0.0)), 0.97, 1e-15);
}

TEST(Metric, StraightUntwistedIsDiagonal) {
  const auto c = CurveSpec::straight(1.0, 10);
  const auto m = metric_at(c, 0.1, 0.5, Vec2(0.2, 0.3));
  EXPECT_LE((m.G - Eigen::Vector3d(1, 0.01, 0.01).asDiagonal().toDenseMatrix()).norm(), 1e-15);
}

TEST(Metric, DeterminantAndJacobianIdentity) {
  const auto c = CurveSpec::helix(3.0, 0.8, 0.5, 60);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double eps : {0.2, 0.1, 0.05}) {
    for (int t = 0; t < 50; ++t) {
      const Vec2 y(u(rng), u(rng));
      const double s = 1.5 + 2.0 * u(rng);
      for (auto conv : {JacobianConvention::Derived, JacobianConvention::Flipped}) {
        const auto m = metric_at(c, eps, s, y, conv);
        const double ref = std::pow(eps, 4) * m.beta * m.beta;
        EXPECT_LE(std::abs(m.det_G - ref) / ref, 1e-12);
        EXPECT_LE((m.J * m.J.transpose() - m.G).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((m.G - m.G.transpose()).cwiseAbs().maxCoeff(), 0.0);
      }
    }
  }
}

TEST(Metric, DeterminantArithmetic) {
  const auto arc = CurveSpec::circular_arc(1.0, 1.0, 10);
  const auto m = metric_at(arc, 0.1, 0.5, Vec2(0.3, 0.0));
  EXPECT_NEAR(m.det_G, 9.409e-5, 1e-16);
}

TEST(Metric, TubeValidation) {
  const auto c = CurveSpec::bump_curvature(10.0, 2.0, 5.0, 2.0, 100);
  const auto ok = validate_tube(c, 0.1, 1.0);
  EXPECT_TRUE(ok.ok);
  EXPECT_NEAR(ok.min_beta, 0.8, 1e-12);
  EXPECT_NEAR(ok.s_at_min, 5.0, 1e-12);
  EXPECT_FALSE(validate_tube(c, 0.5, 1.0).ok);
}
