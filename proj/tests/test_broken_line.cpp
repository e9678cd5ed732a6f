#include "oracles.hpp"

#include <qtube/broken_line.hpp>
#include <qtube/error.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

using namespace qtube;

namespace {

const double kPi = oracle::pi;

std::function<double(double)> well(double depth) {
  return [depth](double s) { return std::abs(s) <= 1.0 ? -depth : 0.0; };
}

}  // namespace

TEST(BrokenLine, CellStepMatchesRk4) {
  for (double V : {-9.0, -0.3, 0.0, 1e-9, 4.0, 25.0}) {
    for (double h : {0.01, 0.3, -0.2}) {
      const auto got = zero_energy_step(V, h, 0.7, -1.3);
      const auto ref =
          oracle::rk4([V](double) { return V; }, 0.0, 0.0, h, 4000, 0.7, -1.3);
      EXPECT_NEAR(got[0], ref.y.real(), 1e-10 * (1 + std::abs(ref.y))) << V << ' ' << h;
      EXPECT_NEAR(got[1], ref.dy.real(), 1e-10 * (1 + std::abs(ref.dy))) << V << ' ' << h;
    }
  }
}

TEST(BrokenLine, FreeLineScattersTrivially) {
  StepPotential v{-1.0, 0.01, std::vector<double>(200, 0.0)};
  const auto s = scattering_1d(v, 0.7);
  EXPECT_LE(std::abs(s.r), 1e-14);
  EXPECT_LE(std::abs(s.t - 1.0), 1e-14);
}

TEST(BrokenLine, SquareWellScatteringMatchesOracle) {
  for (double depth : {1.0, kPi * kPi, 3.0}) {
    const auto v = StepPotential::square_well(depth, 1.0, 400);
    for (double k : {0.1, 1.0, 3.0}) {
      const auto s = scattering_1d(v, k);
      const auto [r, t] = oracle::scattering(well(depth), -1.0, 1.0, k, 20000);
      EXPECT_LE(std::abs(s.r - r), 1e-9) << depth << ' ' << k;
      EXPECT_LE(std::abs(s.t - t), 1e-9) << depth << ' ' << k;
    }
  }
}

TEST(BrokenLine, ScatteringIsUnitary) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    StepPotential v{-1.0, 2.0 / 300, {}};
    for (int c = 0; c < 300; ++c) v.values.push_back(u(rng));
    for (double k : {0.05, 0.5, 5.0}) {
      const auto s = scattering_1d(v, k);
      EXPECT_NEAR(std::norm(s.r) + std::norm(s.t), 1.0, 1e-8);
    }
  }
}

TEST(BrokenLine, ResonanceOfSquareWells) {
  EXPECT_FALSE(detect_resonance(StepPotential::square_well(1.0, 1.0, 2000)).resonant);
  for (int m = 1; m <= 3; ++m) {
    const auto st = detect_resonance(StepPotential::square_well(m * m * kPi * kPi / 4, 1.0, 2000));
    EXPECT_TRUE(st.resonant) << m;
    EXPECT_NEAR(st.left_value, 1.0, 1e-12);
    double sup = 0.0;
    for (double p : st.psi_nodes) sup = std::max(sup, std::abs(p));
    EXPECT_NEAR(sup, 1.0, 1e-12);
  }
}

TEST(BrokenLine, ResonanceIsScaleCovariant) {
  for (double depth : {1.0, kPi * kPi, kPi * kPi / 4}) {
    const auto v = StepPotential::square_well(depth, 1.0, 2000);
    const bool base = detect_resonance(v).resonant;
    for (double d : {0.5, 0.25}) EXPECT_EQ(detect_resonance(scale_potential(v, d).values).resonant, base);
  }
}

TEST(BrokenLine, ShootingSatisfiesTheCellEquation) {
  const auto v = StepPotential::square_well(kPi * kPi, 1.0, 500);
  const auto st = detect_resonance(v);
  // Exact cell propagation: re-stepping each cell from its left values reproduces the right ones.
  for (std::size_t c = 0; c < v.cells(); ++c) {
    const auto next = zero_energy_step(v.values[c], v.h, st.psi_nodes[c], st.dpsi_nodes[c]);
    EXPECT_NEAR(next[0], st.psi_nodes[c + 1], 1e-8);
    EXPECT_NEAR(next[1], st.dpsi_nodes[c + 1], 1e-8);
  }
}

TEST(BrokenLine, ResonantWellHasClosedFormCoupling) {
  // psi_r = cos(pi (s + 1)) on the pi^2 well gives c1 = -1 and c2 = 0.
  const auto v = StepPotential::square_well(kPi * kPi, 1.0, 2000);
  const auto vc = limit_operator(v, detect_resonance(v));
  ASSERT_EQ(vc.kind, VertexCondition::Kind::ScaledCoupling);
  EXPECT_EQ(vc.branch, MeanBranch::Nonzero);
  EXPECT_NEAR(vc.c1, -1.0, 1e-6);
  EXPECT_LE(std::abs(vc.c2), 1e-10 * v.l1_norm());
  const auto o = oracle::vertex_quadrature(well(kPi * kPi), -1.0, 1.0, 20000, false);
  EXPECT_NEAR(vc.c1, o.c1, 1e-6 * std::abs(o.c1));
}

TEST(BrokenLine, OddResonanceCouplesBothSides) {
  const auto v = StepPotential::square_well(kPi * kPi / 4, 1.0, 2000);
  const auto vc = limit_operator(v, detect_resonance(v));
  const auto o = oracle::vertex_quadrature(well(kPi * kPi / 4), -1.0, 1.0, 20000, false);
  EXPECT_NEAR(vc.c1, o.c1, 1e-5 * std::abs(o.c1) + 1e-9);
  EXPECT_NEAR(vc.c2, o.c2, 1e-5 * std::abs(o.c2));
}

TEST(BrokenLine, LimitOperatorBranches) {
  const auto plain = StepPotential::square_well(1.0, 1.0, 400);
  EXPECT_EQ(limit_operator(plain, detect_resonance(plain)).kind, VertexCondition::Kind::Dirichlet);
  StepPotential zero{-1.0, 0.01, std::vector<double>(200, 0.0)};
  EXPECT_EQ(limit_operator(zero, detect_resonance(zero)).kind, VertexCondition::Kind::Free);
  try {
    vertex_coefficients(zero, detect_resonance(zero));
    FAIL() << "expected free-line error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateFreeLine);
  }
  try {
    vertex_coefficients(plain, detect_resonance(plain));
    FAIL() << "expected contract violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ContractViolation);
  }
}

TEST(BrokenLine, LimitScatteringMatchesMatching) {
  VertexCondition vc;
  vc.kind = VertexCondition::Kind::ScaledCoupling;
  for (auto [c1, c2] : {std::pair{-1.0, 0.0}, std::pair{0.3, -0.8}, std::pair{-0.49, -0.51}}) {
    vc.c1 = c1;
    vc.c2 = c2;
    const double mu = (c1 - c2) / (c1 + c2);
    // psi(0+) = mu psi(0-), psi'(0+) = psi'(0-)/mu with e^{iks} + r e^{-iks} and t e^{iks}.
    Eigen::Matrix2cd A;
    Eigen::Vector2cd b;
    const std::complex<double> ik(0, 1);
    A << mu, -1.0, -ik / mu, -ik;
    b << -mu, -ik / mu;
    const Eigen::Vector2cd x = A.partialPivLu().solve(b);
    const auto s = limit_scattering(vc);
    EXPECT_LE(std::abs(s.r - x[0]), 1e-12);
    EXPECT_LE(std::abs(s.t - x[1]), 1e-12);
    EXPECT_NEAR(s.t.real(), 2.0 / (mu + 1.0 / mu), 1e-12);
  }
}

TEST(BrokenLine, ScalingPreservesBendAngle) {
  const auto c = CurveSpec::bump_curvature(2.0, 1.3, 1.0, 0.8, 200);
  const double theta = bend_angle(c);
  for (double d : {0.5, 0.1, 0.01}) EXPECT_NEAR(bend_angle(scale_curve(c, d)), theta, 1e-12);
}

TEST(BrokenLine, ScaledPotentialNeedsCompactSupport) {
  const auto wide = StepPotential::square_well(1.0, 2.0, 100);
  EXPECT_THROW(scale_potential(wide, 0.5), Error);
}

TEST(BrokenLine, DeltaStudyConverges) {
  const auto plain = StepPotential::square_well(1.0, 1.0, 2000);
  const auto st = delta_convergence_study(plain, {0.4, 0.2, 0.1}, {0.1});
  EXPECT_LT(st.max_deviation[1], st.max_deviation[0]);
  EXPECT_LT(st.max_deviation[2], st.max_deviation[1]);
  EXPECT_NEAR(st.fitted_rate, 1.0, 0.1);
  const auto res = StepPotential::square_well(kPi * kPi, 1.0, 2000);
  const auto sr = delta_convergence_study(res, {0.4, 0.2, 0.1}, {0.1});
  EXPECT_LE(std::abs(sr.rows.back().s.t - 1.0), 0.1);
}

TEST(BrokenLine, BalancedPotentialIsZeroMean) {
  const auto bp = resonant_balanced_potential(1.0, 0.2, 0.7, 2000);
  EXPECT_EQ(mean_branch(bp.V), MeanBranch::Zero);
  const auto st = detect_resonance(bp.V);
  ASSERT_TRUE(st.resonant);
  const auto vc = vertex_coefficients(bp.V, st);
  EXPECT_EQ(vc.branch, MeanBranch::Zero);
  // -c1 - c2 and -c1 + c2 are the asymptotic values of psi_r.
  EXPECT_NEAR(-vc.c1 - vc.c2, st.left_value, 1e-3);
  EXPECT_NEAR(-vc.c1 + vc.c2, st.right_value, 1e-3);
}
