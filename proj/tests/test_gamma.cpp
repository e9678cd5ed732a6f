#include "oracles.hpp"

#include <qtube/error.hpp>
#include <qtube/gamma_forms.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qtube;

namespace {

const std::vector<double> kEps = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double lo, double hi) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = g(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ();
  Eigen::VectorXd d(n);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : d) x = u(rng);
  return Q * d.asDiagonal() * Q.transpose();
}

}  // namespace

TEST(Gamma, ClosedFormMinimumMatchesCoordinateDescent) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(2, 50);
  std::normal_distribution<double> g;
  for (int inst = 0; inst < 100; ++inst) {
    const int n = dim(rng);
    const Eigen::MatrixXd T = random_spd(n, rng, 0.1, 5.0);
    Eigen::VectorXd eta(n);
    for (auto& x : eta) x = g(rng);
    const auto m = min_perturbed(T, 1.0, eta);
    const Eigen::MatrixXd A = T + Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd z = oracle::coordinate_descent(A, eta);
    const double value = z.dot(A * z) + eta.dot(z);
    EXPECT_NEAR(m.value, value, 1e-8 * std::max(1.0, std::abs(value))) << inst;
    EXPECT_LE((m.minimizer - z).norm(), 1e-8 * std::max(1.0, z.norm())) << inst;
  }
}

TEST(Gamma, MinimumNeedsPositiveDefiniteShift) {
  const Eigen::MatrixXd T = -2.0 * Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(min_perturbed(T, 1.0, Eigen::VectorXd::Ones(3)), Error);
}

TEST(Gamma, FamiliesValidate) {
  for (const char* f : {"perturbation", "penalization", "oscillation"}) {
    const auto seq = make_family(f, 20, kEps, 9);
    EXPECT_NO_THROW(seq.validate()) << f;
    EXPECT_EQ(seq.forms.size(), kEps.size());
  }
  EXPECT_THROW(make_family("nonsense", 20, kEps, 9), Error);
}

TEST(Gamma, ReportsAgreeAndClassify) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto samples = sample_vectors(30, 10, seed);
    const auto p = check_equivalence_iv_v(make_family("perturbation", 30, kEps, seed), 1.0, samples, 1e-2);
    EXPECT_TRUE(p.agree && p.minima_converge);
    const auto q = check_equivalence_iv_v(make_family("penalization", 30, kEps, seed), 1.0, samples, 1e-2);
    EXPECT_TRUE(q.agree && q.resolvents_converge);
    const auto o = check_equivalence_iv_v(make_family("oscillation", 30, kEps, seed), 1.0, samples, 1e-2);
    EXPECT_TRUE(o.agree);
    EXPECT_FALSE(o.minima_converge);
  }
}

TEST(Gamma, PenalizedResolventReachesProjectedLimit) {
  const auto seq = penalization_family(12, kEps, 4);
  const Eigen::MatrixXd R = seq.limit_resolvent(1.0);
  const Eigen::MatrixXd Rk =
      (seq.forms.back() + Eigen::MatrixXd::Identity(12, 12)).inverse();
  EXPECT_LE((R - Rk).norm(), 1e-4);
  EXPECT_LE((R - seq.P0 * R * seq.P0).norm(), 1e-12);
}

TEST(Gamma, MinimizerIdentity) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  for (int inst = 0; inst < 20; ++inst) {
    const auto seq = penalization_family(16, kEps, static_cast<std::uint64_t>(inst) + 100);
    Eigen::VectorXd eta(16);
    for (auto& x : eta) x = g(rng);
    const auto id = minimizer_identity(seq.limit, seq.P0, eta);
    EXPECT_FALSE(id.unbounded);
    EXPECT_LE(id.residual, 1e-10);
    // Direct minimization of z^T T z - 2 eta^T z over ran P0.
    const Eigen::MatrixXd Q = seq.range_basis();
    const Eigen::MatrixXd A = Q.transpose() * seq.limit * Q;
    const Eigen::VectorXd y = oracle::coordinate_descent(A, -2.0 * Q.transpose() * eta);
    EXPECT_LE((Q * y - id.minimizer).norm(), 1e-8 * std::max(1.0, y.norm()));
  }
}

TEST(Gamma, MinimizerIdentityDetectsUnboundedness) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(3, 3);
  T(0, 0) = 1.0;
  T(1, 1) = 2.0;
  const auto id = minimizer_identity(T, Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1, 1, 1));
  EXPECT_TRUE(id.unbounded);
  const auto ok = minimizer_identity(T, Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1, 1, 0));
  EXPECT_FALSE(ok.unbounded);
  EXPECT_LE(ok.residual, 1e-14);
}

TEST(Gamma, SupRepresentation) {
  const auto seq = penalization_family(10, kEps, 8);
  auto samples = sample_vectors(10, 40, 8);
  const Eigen::VectorXd zeta = seq.P0 * Eigen::VectorXd::LinSpaced(10, -1.0, 1.0);
  const auto without = sup_representation(seq.limit, seq.P0, zeta, samples);
  EXPECT_FALSE(without.infinite);
  EXPECT_GE(without.gap, -1e-10);
  samples.push_back(zeta);
  const auto with = sup_representation(seq.limit, seq.P0, zeta, samples);
  EXPECT_LE(std::abs(with.gap), 1e-12 * std::max(1.0, with.form_value));
  const Eigen::VectorXd outside = Eigen::VectorXd::LinSpaced(10, -1.0, 1.0);
  if ((outside - seq.P0 * outside).norm() > 1e-8)
    EXPECT_TRUE(sup_representation(seq.limit, seq.P0, outside, samples).infinite);
}

TEST(Gamma, MinimizersConverge) {
  const auto seq = perturbation_family(20, kEps, 3);
  const auto mc = minimizer_convergence(seq, 1.0, Eigen::VectorXd::Ones(20));
  for (std::size_t i = 1; i < mc.distance.size(); ++i) EXPECT_LT(mc.distance[i], mc.distance[i - 1]);
  EXPECT_NEAR(mc.rate, 1.0, 0.05);
}

TEST(Gamma, MonotonicityIsConsistent) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pen = check_monotone(penalization_family(20, kEps, seed), 1.0);
    EXPECT_TRUE(pen.consistent);
    for (bool b : pen.forms_ordered) EXPECT_TRUE(b);
    EXPECT_TRUE(check_monotone(oscillation_family(20, kEps, seed), 1.0).consistent);
  }
}

TEST(Gamma, MatrixOrderAndSlopes) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_TRUE(matrix_leq(I, 2 * I));
  EXPECT_FALSE(matrix_leq(2 * I, I));
  EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
}
