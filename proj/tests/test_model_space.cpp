#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace bcm;

namespace {

struct Model {
  ModelOperator w;
  OperatorFamily family;
  std::vector<SubspaceChain> chains;
};

const Model& model() {
  static const Model m = [] {
    const auto& s = fixtures::maxwell();
    Model out;
    out.w = sqrt_operator(gram_matrix(s.data.response), s.problem.basis.gram);
    out.family = model_eikonals(s.problem, out.w, s.problem.config.eps_rank, &out.chains);
    return out;
  }();
  return m;
}

const OracleSpace& oracle() {
  static const OracleSpace o = oracle_space(fixtures::maxwell().problem.sys,
                                            fixtures::maxwell().data.oracle, 1e-6);
  return o;
}

}  // namespace

TEST(ModelSpace, ChainsAreNestedAndOrthonormal) {
  for (const auto& chain : model().chains) {
    ASSERT_EQ(chain.ranks.size(), chain.delays.size());
    for (std::size_t k = 1; k < chain.ranks.size(); ++k)
      EXPECT_GE(chain.ranks[k], chain.ranks[k - 1]);
    const Mat q = chain.columns;
    EXPECT_LE((q.transpose() * q - Mat::Identity(q.cols(), q.cols())).norm(), 1e-10);
    for (int k = 1; k < static_cast<int>(chain.ranks.size()); ++k) {
      const Mat a = projection_index(chain, k).matrix, b = projection_index(chain, k + 1).matrix;
      EXPECT_LE((b * a - a).norm(), 1e-10);
    }
  }
}

TEST(ModelSpace, ProjectionsAreOrthogonalProjectors) {
  const SubspaceChain& chain = model().chains[0];
  for (double s : {0.0, 0.1, 0.2, 0.3}) {
    const Mat p = projection(chain, s).matrix;
    EXPECT_LE((p * p - p).norm(), 1e-10);
    EXPECT_LE((p - p.transpose()).norm(), 1e-14);
  }
  EXPECT_EQ(projection(chain, 0.0).matrix.norm(), 0.0);
  EXPECT_EQ(projection(chain, 1.0).matrix, projection_index(chain, chain.ranks.size()).matrix);
}

TEST(ModelSpace, EikonalSpectraLieInZeroT) {
  const double T = fixtures::maxwell().problem.config.T;
  for (const Mat& a : model().family.members) {
    const Vec lam = sorted_spectrum(a);
    EXPECT_GE(lam.minCoeff(), -1e-6 * T);
    EXPECT_LE(lam.maxCoeff(), T + 1e-6 * T);
  }
}

TEST(ModelSpace, FullRankAtFirstDelayGivesTTimesIdentity) {
  // All projections equal to the identity: I = T Id.
  const auto& b = fixtures::maxwell().problem.basis;
  SubspaceChain chain;
  chain.delays = b.delay_grid;
  chain.columns = Mat::Identity(5, 5);
  chain.ranks.assign(chain.delays.size(), 5);
  const EikonalOperator e = eikonal(chain);
  EXPECT_LE((e.matrix - b.lattice.T * Mat::Identity(5, 5)).norm(), 1e-14);
}

TEST(ModelSpace, ModelAndOracleEikonalsAreUnitarilyEquivalent) {
  const auto& s = fixtures::maxwell();
  for (std::size_t i = 0; i < s.problem.family.size(); ++i) {
    const Vec a = sorted_spectrum(model().family.members[i]);
    const Vec b = sorted_spectrum(oracle_eikonal(oracle(), s.problem.basis, s.problem.family[i],
                                                 s.problem.config.eps_rank).matrix);
    EXPECT_LE(spectrum_distance(a, b), 0.05) << s.problem.family[i].id;
  }
}

TEST(ModelSpace, OracleBasisIsMassOrthonormal) {
  const OracleSpace& o = oracle();
  ASSERT_GE(o.rank(), 3);
  const Mat g = o.basis.transpose() * o.mass.asDiagonal() * o.basis;
  EXPECT_LE((g - Mat::Identity(o.rank(), o.rank())).norm(), 1e-10);
}

TEST(ModelSpace, MultiplicationProjectionExamples) {
  const auto& grid = fixtures::maxwell().problem.grid;
  const OracleSpace& o = oracle();
  const Eigen::Index r = o.rank();
  EXPECT_EQ(mult_project(grid, o, Vec::Zero(grid.num_nodes())).norm(), 0.0);
  EXPECT_LE((mult_project(grid, o, Vec::Ones(grid.num_nodes())) - Mat::Identity(r, r)).norm(),
            1e-10);
  const Vec f = eikonal_function(grid, face_patch(grid, 2), 0.3).values;
  const Mat e = mult_project(grid, o, f);
  const double op = sorted_spectrum(e).cwiseAbs().maxCoeff();
  EXPECT_LE(op, f.cwiseAbs().maxCoeff() + 1e-8);
}

TEST(ModelSpace, TooPoorSnapshotSpaceIsAStageError) {
  const auto& s = fixtures::maxwell();
  OracleFields o = s.data.oracle;
  o.snapshots = o.snapshots.leftCols(2).eval();
  EXPECT_THROW(oracle_space(s.problem.sys, o, 1e-6), StageError);
}

TEST(ModelSpace, EikonalsAreScaleInvariantInTheData) {
  const auto& s = fixtures::maxwell();
  ResponseMatrix scaled = s.data.response;
  scaled.entries *= 4.0;  // doubling every control amplitude
  const ModelOperator w2 = sqrt_operator(gram_matrix(scaled), s.problem.basis.gram);
  const OperatorFamily f2 = model_eikonals(s.problem, w2, s.problem.config.eps_rank);
  for (int i = 0; i < f2.size(); ++i)
    EXPECT_LE((f2.members[i] - model().family.members[i]).norm(), 1e-8);
}

TEST(ModelSpace, SpectrumHelpers) {
  Mat a = Mat::Zero(3, 3);
  a.diagonal() << 1.0, 3.0, 2.0;
  const Vec s = sorted_spectrum(a, 5);
  ASSERT_EQ(s.size(), 5);
  EXPECT_EQ(s[0], 3.0);
  EXPECT_EQ(s[2], 1.0);
  EXPECT_EQ(s[4], 0.0);
  EXPECT_EQ(spectrum_distance(s, s), 0.0);
  Vec b(2);
  b << 3.0, 2.0;
  EXPECT_NEAR(spectrum_distance(b, s), 1.0 / std::sqrt(14.0), 1e-15);
}

TEST(ModelSpace, QuantileDistanceComparesSpectralDistributions) {
  Vec a(3), b(6);
  a << 3.0, 2.0, 1.0;
  b << 3.0, 3.0, 2.0, 2.0, 1.0, 1.0;
  EXPECT_NEAR(quantile_distance(a, b), 0.0, 1e-15);
  EXPECT_NEAR(quantile_distance(a, a), 0.0, 1e-15);
  Vec c(3);
  c << 3.0, 2.0, 0.0;
  EXPECT_NEAR(quantile_distance(c, a), spectrum_distance(c, a), 1e-15);
  // Quadrature nodes T - k ds against the halved step.
  Vec k8(8), k16(16);
  for (int k = 0; k < 8; ++k) k8[k] = 0.4 - 0.05 * k;
  for (int k = 0; k < 16; ++k) k16[k] = 0.4 - 0.025 * k;
  EXPECT_LT(quantile_distance(k8, k16), 0.1);
  EXPECT_GT(spectrum_distance(k8, k16), 0.4);
}
