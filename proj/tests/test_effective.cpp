#include "oracles.hpp"

#include <qtube/effective_operator.hpp>
#include <qtube/error.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace qtube;

TEST(Effective, HelixPotentialIsConstant) {
  const auto c = CurveSpec::helix(4.0, 0.6, 0.8, 40);
  const auto p = effective_potential(c, 0.3);
  for (double v : p.values) EXPECT_NEAR(v, 0.64 * 0.3 - 0.36 / 4, 1e-15);
}

TEST(Effective, GaugeOnlyTwistCombinationMatters) {
  const auto c = CurveSpec::twisted_straight(6.0, 1.2, 3.0, 1.5, 120);
  std::vector<double> tau(c.size()), ad(c.size()), alpha(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double g = std::sin(c.s()[i]);
    tau[i] = c.tau()[i] + g;
    ad[i] = c.alpha_dot()[i] + g;
    alpha[i] = c.alpha()[i] + 1.0 - std::cos(c.s()[i]);
  }
  const auto d = CurveSpec::from_samples(c.s(), c.kappa(), tau, alpha, ad);
  const auto pa = effective_potential(c, 0.7), pb = effective_potential(d, 0.7);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(pa.values[i], pb.values[i], 1e-14);
}

TEST(Effective, FreeSpectrumMatchesDiscreteSine) {
  const auto c = CurveSpec::straight(5.0, 200);
  const auto spec = schrodinger_eigen(effective_potential(c, 0.5), 4);
  const auto ref = oracle::discrete_free_1d(5.0, 199, 4);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(spec.mu(j), ref[j], 1e-10 * ref[j]);
}

TEST(Effective, EigenfunctionsOrthonormalWithAlternatingParity) {
  const auto c = CurveSpec::bump_curvature(10.0, 1.5, 5.0, 2.0, 400);
  const auto spec = schrodinger_eigen(effective_potential(c, 0.0), 3);
  const double h = spec.s[1] - spec.s[0];
  const Eigen::MatrixXd gram = spec.w.transpose() * spec.w * h;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::Index n = spec.w.rows();
  for (int j = 0; j < 3; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      EXPECT_NEAR(spec.w(i, j), sign * spec.w(n - 1 - i, j), 1e-6);
  }
}

TEST(Effective, CurvatureBumpBindsTwistDoesNot) {
  const auto bent = CurveSpec::bump_curvature(40.0, 1.0, 20.0, 2.0, 800);
  const auto b = bound_state_exists(effective_potential(bent, 0.0), 20.0);
  EXPECT_TRUE(b.exists);
  EXPECT_LT(b.lowest, 0.0);
  EXPECT_LE(b.lowest_2r, b.lowest);
  const auto twisted = CurveSpec::twisted_straight(40.0, 1.0, 20.0, 2.0, 800);
  EXPECT_FALSE(bound_state_exists(effective_potential(twisted, 0.5), 20.0).exists);
}

TEST(Effective, CoarseGridIsAResolutionError) {
  const auto c = CurveSpec::straight(5.0, 20);
  try {
    schrodinger_eigen(effective_potential(c, 0.0), 12);
    FAIL() << "expected a resolution error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Resolution);
  }
}

TEST(Effective, PotentialCsvRoundTrip) {
  const auto c = CurveSpec::bump_curvature(4.0, 1.0, 2.0, 1.0, 50);
  const auto p = effective_potential(c, 0.2);
  std::stringstream ss;
  write_potential_csv(ss, p);
  const auto q = read_potential_csv(ss);
  ASSERT_EQ(q.values.size(), p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    EXPECT_EQ(q.s[i], p.s[i]);
    EXPECT_EQ(q.values[i], p.values[i]);
  }
}

TEST(Effective, ExtensionPadsWithZeros) {
  const auto p = potential_from_samples({0.0, 0.5, 1.0}, {0.0, -1.0, 0.0});
  const auto e = extend_potential(p, -1.0, 2.0);
  EXPECT_NEAR(e.s.front(), -1.0, 1e-12);
  EXPECT_NEAR(e.s.back(), 2.0, 1e-12);
  double sum = 0.0;
  for (double v : e.values) sum += v;
  EXPECT_EQ(sum, -1.0);
}
