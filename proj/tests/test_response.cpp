#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bcm;

TEST(Response, LatticeIsEvenAndAlignedWithDelays) {
  const Problem& p = fixtures::maxwell().problem;
  EXPECT_EQ(p.lattice.steps % 2, 0);
  EXPECT_EQ(p.lattice.steps % p.config.delays, 0);
  EXPECT_LE(p.lattice.dt, p.config.courant * p.grid.min_spacing() * (1 + 1e-12));
  EXPECT_NEAR(p.lattice.dt * p.lattice.steps, p.config.T, 1e-14);
}

TEST(Response, OddContinuationRejectsOddStepCount) {
  EXPECT_THROW(odd_continuation(Vec::Ones(6)), ConfigError);
  EXPECT_NO_THROW(odd_continuation(Vec::Ones(5)));
}

TEST(Response, OddContinuationIsOddAboutT) {
  Vec f(5);
  f << 0.0, 1.0, 2.0, 3.0, 0.0;
  const Vec g = odd_continuation(f);
  ASSERT_EQ(g.size(), 9);
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(g[j], f[j]);
    EXPECT_EQ(g[8 - j], -f[j]);
  }
}

TEST(Response, AdjointMatchesTrapezoidPairing) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 1.0);
  TimeLattice lat{1.0, 8, 0.125};
  const Vec w1 = lat.weights(8), w2 = lat.weights(16);
  for (int t = 0; t < 50; ++t) {
    Vec f(9), g(17);
    for (auto& x : f) x = d(rng);
    for (auto& x : g) x = d(rng);
    const double lhs = (w2.array() * odd_continuation(f).array() * g.array()).sum();
    const double rhs = (w1.array() * f.array() * odd_continuation_adjoint(g).col(0).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-13);
  }
}

TEST(Response, ControlsVanishAtBothEnds) {
  const ControlBasis& b = fixtures::maxwell().problem.basis;
  ASSERT_GT(b.size(), 0);
  for (const auto& c : b.controls) {
    EXPECT_EQ(c.temporal[0], 0.0);
    EXPECT_EQ(c.temporal[c.temporal.size() - 1], 0.0);
  }
  EXPECT_EQ(b.size(), 24 * b.delays);
}

TEST(Response, DelayedClassesNest) {
  const Problem& p = fixtures::maxwell().problem;
  for (const auto& sigma : p.family) {
    std::vector<int> prev;
    for (int k = 1; k <= p.basis.delays; ++k) {
      const auto cls = p.basis.delayed_class_index(sigma, k);
      EXPECT_TRUE(std::includes(cls.begin(), cls.end(), prev.begin(), prev.end()));
      EXPECT_EQ(cls, p.basis.delayed_class(sigma, p.basis.delay_grid[k - 1]));
      prev = cls;
    }
  }
  // A face carries its four quarters' controls; a quarter only its own.
  EXPECT_EQ(p.basis.delayed_class_index(p.family[0], p.basis.delays).size(),
            4u * p.basis.delays);
  EXPECT_EQ(p.basis.delayed_class_index(p.family[6], p.basis.delays).size(),
            1u * p.basis.delays);
}

TEST(Response, ControlGramIsPositiveDefinite) {
  const auto [lo, hi] = fixtures::maxwell().problem.basis.gram_extremes();
  EXPECT_GT(lo, 0.0);
  EXPECT_GE(hi, lo);
}

TEST(Response, ReciprocityMakesConnectingFormSymmetric) {
  for (const auto* s : {&fixtures::maxwell(), &fixtures::scalar()}) {
    const GramMatrix g = gram_matrix(s->data.response);
    EXPECT_LT(g.asymmetry, 1e-10);
    EXPECT_LE((g.entries - g.entries.transpose()).norm(), 1e-14 * g.entries.norm());
  }
}

TEST(Response, BlagoveshchenskiiAgainstOracleAtCoarseGrid) {
  // About 2.5% for both systems at 8^3.
  EXPECT_LT(blagoveshchenskii_error(fixtures::maxwell().problem, fixtures::maxwell().data), 0.05);
  EXPECT_LT(blagoveshchenskii_error(fixtures::scalar().problem, fixtures::scalar().data), 0.05);
}

TEST(Response, CorruptedResponseBreaksConsistency) {
  const auto& s = fixtures::maxwell();
  ForwardData bad = s.data;
  bad.response.entries *= 1.5;
  EXPECT_GT(blagoveshchenskii_error(s.problem, bad), 0.2);
}

TEST(Response, StronglyAsymmetricInputIsAStageError) {
  ResponseMatrix r{Mat::Zero(3, 3)};
  r.entries(0, 1) = 1.0;
  EXPECT_THROW(gram_matrix(r), StageError);
}

TEST(Response, AssemblyIsDeterministicAcrossThreadCounts) {
  const auto& s = fixtures::maxwell();
  AssembleOptions opt;
  opt.threads = 3;
  const ForwardData again = assemble_response(s.problem.sys, s.problem.basis, opt);
  EXPECT_EQ(again.response.entries, s.data.response.entries);
  EXPECT_EQ(again.oracle.snapshots, s.data.oracle.snapshots);
}

TEST(Response, SqrtOperatorSquaresToClampedForm) {
  const auto& s = fixtures::maxwell();
  const GramMatrix g = gram_matrix(s.data.response);
  const ModelOperator w = sqrt_operator(g, s.problem.basis.gram);
  EXPECT_LE((w.matrix - w.matrix.transpose()).norm(), 1e-14 * w.matrix.norm());
  const Vec lam = Eigen::SelfAdjointEigenSolver<Mat>(w.matrix).eigenvalues();
  EXPECT_GE(lam.minCoeff(), -1e-12 * lam.maxCoeff());
  // In orthonormal control coordinates |W|^2 = L^-1 C L^-T.
  const Mat& l = w.gram_factor;
  EXPECT_LE((l * l.transpose() - s.problem.basis.gram).norm(),
            1e-12 * s.problem.basis.gram.norm());
  const Mat ct = l.triangularView<Eigen::Lower>().solve(
      l.triangularView<Eigen::Lower>().solve(g.entries).transpose());
  EXPECT_EQ(w.clamped, 0);
  EXPECT_LE((w.matrix * w.matrix - ct).norm(), 1e-10 * ct.norm());
}

TEST(Response, SqrtOperatorClampsNegativeDirections) {
  Mat c = Mat::Zero(2, 2);
  c(0, 0) = 4.0;
  c(1, 1) = -1e-3;
  const ModelOperator w = sqrt_operator({c, true, 0.0}, Mat::Identity(2, 2));
  EXPECT_EQ(w.clamped, 1);
  EXPECT_NEAR(w.matrix(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(w.matrix(1, 1), 0.0, 1e-14);
}
