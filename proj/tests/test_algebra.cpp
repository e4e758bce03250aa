#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bcm;

namespace {

Mat random_orthogonal(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = d(rng);
  return Eigen::HouseholderQR<Mat>(a).householderQ();
}

Mat random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = d(rng);
  return 0.5 * (a + a.transpose());
}

OperatorFamily commuting_family(int n, int m, std::uint64_t seed) {
  const Mat q = random_orthogonal(n, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  OperatorFamily f;
  for (int k = 0; k < m; ++k) {
    Vec d(n);
    for (auto& x : d) x = u(rng);
    f.members.push_back(q * d.asDiagonal() * q.transpose());
    f.members.back() = 0.5 * (f.members.back() + f.members.back().transpose()).eval();
    f.labels.push_back("a" + std::to_string(k));
  }
  return f;
}

}  // namespace

TEST(Algebra, DiagonalFamilyHasZeroCommutators) {
  OperatorFamily f;
  for (int k = 0; k < 3; ++k) f.members.push_back(Vec::LinSpaced(6, k, k + 5).asDiagonal());
  const CommutatorProfile p = commutator_profile(f);
  EXPECT_EQ(p.max_normalized(), 0.0);
  EXPECT_EQ(p.pairs.size(), 3u);
}

TEST(Algebra, SelfCommutatorIsZero) {
  std::mt19937_64 rng(2);
  OperatorFamily f;
  const Mat a = random_symmetric(7, rng);
  f.members = {a, a};
  EXPECT_EQ(commutator_profile(f).max_normalized(), 0.0);
}

TEST(Algebra, ValidateRejectsRaggedAndAsymmetric) {
  OperatorFamily f;
  f.members = {Mat::Identity(3, 3), Mat::Identity(4, 4)};
  EXPECT_THROW(f.validate(), ShapeError);
  Mat a = Mat::Identity(3, 3);
  a(0, 1) = 1.0;
  f.members = {a};
  EXPECT_THROW(f.validate(), ShapeError);
}

TEST(Algebra, ClosureDegreeOneAddsIdentity) {
  std::mt19937_64 rng(4);
  OperatorFamily f;
  f.members = {random_symmetric(5, rng), random_symmetric(5, rng)};
  const OperatorFamily c = algebra_closure(f, 1);
  ASSERT_EQ(c.size(), 3);
  EXPECT_EQ(c.members[0], Mat::Identity(5, 5));
}

TEST(Algebra, ClosureOfSingleMemberCommutes) {
  std::mt19937_64 rng(6);
  OperatorFamily f;
  f.members = {0.3 * random_symmetric(6, rng)};
  const OperatorFamily c = algebra_closure(f, 4);
  EXPECT_EQ(c.size(), 5);
  EXPECT_LE(commutator_profile(c, false).max_normalized(), 1e-10);
}

TEST(Algebra, ClosureOfCommutingFamilyCommutes) {
  const OperatorFamily c = algebra_closure(commuting_family(6, 3, 9), 2);
  EXPECT_LE(commutator_profile(c, false).max_normalized(), 1e-10);
}

TEST(Algebra, ClosureGuardsAgainstBlowup) {
  OperatorFamily f;
  for (int k = 0; k < 30; ++k) f.members.push_back(Mat::Identity(2, 2));
  EXPECT_THROW(algebra_closure(f, 3), ConfigError);
  EXPECT_THROW(algebra_closure(f, 0), ConfigError);
}

TEST(Algebra, JointDiagonalizationOfDiagonalFamily) {
  OperatorFamily f;
  f.members = {Vec::LinSpaced(5, 1, 5).asDiagonal(), Vec::LinSpaced(5, 5, 1).asDiagonal()};
  const JointDiagonalization jd = joint_diagonalize(f);
  EXPECT_EQ(jd.basis, Mat::Identity(5, 5));
  EXPECT_EQ(jd.residual, 0.0);
  EXPECT_TRUE(jd.converged);
}

TEST(Algebra, CommutingPairMatchesSimultaneousEigendecomposition) {
  const OperatorFamily f = commuting_family(10, 2, 21);
  const JointDiagonalization jd = joint_diagonalize(f, 1e-14, 200, false);
  EXPECT_LE(jd.residual, 1e-10);
  Eigen::SelfAdjointEigenSolver<Mat> es(f.members[0] + M_PI * f.members[1]);
  const Mat v = es.eigenvectors();
  std::vector<std::pair<double, double>> ref, got;
  for (int i = 0; i < 10; ++i) {
    ref.emplace_back(v.col(i).dot(f.members[0] * v.col(i)), v.col(i).dot(f.members[1] * v.col(i)));
    got.emplace_back(jd.diagonals(i, 0), jd.diagonals(i, 1));
  }
  std::sort(ref.begin(), ref.end());
  std::sort(got.begin(), got.end());
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(ref[i].first, got[i].first, 1e-8);
    EXPECT_NEAR(ref[i].second, got[i].second, 1e-8);
  }
}

TEST(Algebra, WarmStartIsExactForCommutingFamilies) {
  const OperatorFamily f = commuting_family(20, 4, 33);
  const JointDiagonalization jd = joint_diagonalize(f, 1e-12, 200, true);
  EXPECT_LE(jd.residual, 1e-10);
}

TEST(Algebra, SweepEnergyNeverIncreasesAndBasisStaysOrthogonal) {
  std::mt19937_64 rng(8);
  OperatorFamily f;
  for (int k = 0; k < 4; ++k) f.members.push_back(random_symmetric(12, rng));
  for (bool warm : {false, true}) {
    const JointDiagonalization jd = joint_diagonalize(f, 1e-14, 50, warm);
    ASSERT_GE(jd.energy.size(), 2u);
    for (std::size_t s = 1; s < jd.energy.size(); ++s)
      EXPECT_LE(jd.energy[s], jd.energy[s - 1] * (1 + 1e-12));
    EXPECT_LE((jd.basis.transpose() * jd.basis - Mat::Identity(12, 12)).norm(), 1e-10);
    for (int k = 0; k < f.size(); ++k)
      EXPECT_LE(((jd.basis.transpose() * f.members[k] * jd.basis).diagonal() - jd.diagonals.col(k))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-10);
  }
}

TEST(Algebra, MultiplicationOperatorsRecoverTheTupleSet) {
  // Multiplication by truncated face distances, hidden in a random basis.
  const MetricGrid g({6, 6, 6}, {1.0 / 6, 1.0 / 6, 1.0 / 6});
  const double T = 0.25, h = g.max_spacing();
  std::vector<BoundaryPatch> faces;
  for (int s = 0; s < 6; ++s) faces.push_back(face_patch(g, s));
  const EmbeddingImage truth = ground_truth_embedding(g, faces, T);
  const int n = static_cast<int>(truth.points.rows());
  const Mat q = random_orthogonal(n, 44);
  OperatorFamily f;
  for (int k = 0; k < 6; ++k) {
    Mat a = q * truth.points.col(k).asDiagonal() * q.transpose();
    f.members.push_back(0.5 * (a + a.transpose()));
    f.labels.push_back(faces[k].id);
  }
  const SpectrumCloud cloud = spectrum_cloud(f, T, 1e-12, 50, true);
  EXPECT_LE(hausdorff(cloud.points, truth.points).hausdorff, 2.0 * h);
}

TEST(Algebra, ZeroFamilyGivesCloudAtOrigin) {
  OperatorFamily f;
  f.members = {Mat::Zero(4, 4), Mat::Zero(4, 4)};
  const SpectrumCloud c = spectrum_cloud(f, 0.4);
  EXPECT_EQ(c.points.rows(), 4);
  EXPECT_EQ(c.points.norm(), 0.0);
  EXPECT_EQ(c.weights, Vec::Ones(4));
}

TEST(Algebra, PermutingMembersPermutesCoordinates) {
  std::mt19937_64 rng(10);
  OperatorFamily f, g;
  for (int k = 0; k < 3; ++k) f.members.push_back(0.1 * random_symmetric(8, rng));
  g.members = {f.members[2], f.members[0], f.members[1]};
  const SpectrumCloud a = spectrum_cloud(f, 1.0, 1e-10, 100, false);
  const SpectrumCloud b = spectrum_cloud(g, 1.0, 1e-10, 100, false);
  EXPECT_LE((a.points.col(2) - b.points.col(0)).norm(), 1e-9);
  EXPECT_LE((a.points.col(0) - b.points.col(1)).norm(), 1e-9);
  EXPECT_LE((a.points.col(1) - b.points.col(2)).norm(), 1e-9);
}

TEST(Algebra, CloudCoordinatesAreClamped) {
  OperatorFamily f;
  Mat a = Mat::Zero(2, 2);
  a.diagonal() << -0.5, 2.0;
  f.members = {a};
  const SpectrumCloud c = spectrum_cloud(f, 1.0);
  EXPECT_EQ(c.points(0, 0), 0.0);
  EXPECT_EQ(c.points(1, 0), 1.0);
}

TEST(Algebra, EmptyPatchHasZeroDefect) {
  const auto& s = fixtures::maxwell();
  const OracleSpace o = oracle_space(s.problem.sys, s.data.oracle, 1e-6);
  const DefectReport d = compact_defect(s.problem.sys, o, s.problem.basis, BoundaryPatch{}, 1e-6, 3, 1);
  EXPECT_EQ(d.singular_values.norm(), 0.0);
  EXPECT_EQ(d.k0, 0);
}

TEST(Algebra, DefectProfileAndQuadratureIdentity) {
  const auto& s = fixtures::maxwell();
  const OracleSpace o = oracle_space(s.problem.sys, s.data.oracle, 1e-6);
  const DefectReport d =
      compact_defect(s.problem.sys, o, s.problem.basis, face_patch(s.problem.grid, 4), 1e-6, 20, 3);
  ASSERT_GT(d.singular_values.size(), 0);
  for (Eigen::Index k = 1; k < d.singular_values.size(); ++k)
    EXPECT_LE(d.singular_values[k], d.singular_values[k - 1]);
  ASSERT_GE(d.k0, 1);
  for (Eigen::Index k = d.k0 - 1; k < d.singular_values.size(); ++k)
    EXPECT_LE(d.singular_values[k], 0.1 * d.singular_values[0]);
  // One delay step of Riemann-sum error per point at most.
  EXPECT_LE(d.identity_residual, 1.0);
  EXPECT_TRUE(std::isfinite(d.curl_ratio));
}
