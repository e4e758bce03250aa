#include "bcm/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bcm {

void OperatorFamily::validate() const {
  if (!labels.empty() && labels.size() != members.size())
    throw ShapeError("operator family: one label per member");
  for (const Mat& a : members) {
    if (a.rows() != a.cols() || a.rows() != dimension())
      throw ShapeError("operator family: members must be square of one size");
    const double scale = std::max(1.0, a.norm());
    if ((a - a.transpose()).norm() > 1e-12 * scale)
      throw ShapeError("operator family: member is not symmetric");
  }
}

namespace {

double spectral_norm_sym(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Singular values of an antisymmetric matrix: sqrt of the eigenvalues of -C^2.
Vec antisym_singular_values(const Mat& c) {
  if (c.size() == 0) return Vec();
  Mat s = -(c * c);
  s = 0.5 * (s + s.transpose());
  Vec lam = Eigen::SelfAdjointEigenSolver<Mat>(s, Eigen::EigenvaluesOnly).eigenvalues();
  for (auto& v : lam) v = std::sqrt(std::max(v, 0.0));
  std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
  return lam;
}

}  // namespace

double CommutatorProfile::max_normalized() const {
  double m = 0.0;
  for (auto [i, j] : pairs) m = std::max(m, normalized(i, j));
  return m;
}

double CommutatorProfile::mean_normalized() const {
  if (pairs.empty()) return 0.0;
  double s = 0.0;
  for (auto [i, j] : pairs) s += normalized(i, j);
  return s / static_cast<double>(pairs.size());
}

CommutatorProfile commutator_profile(const OperatorFamily& family, bool keep_singular_values) {
  family.validate();
  const int m = family.size();
  CommutatorProfile out;
  out.normalized = Mat::Zero(m, m);
  std::vector<double> norms(m);
  for (int i = 0; i < m; ++i) norms[i] = spectral_norm_sym(family.members[i]);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const Mat& a = family.members[i];
      const Mat& b = family.members[j];
      Mat c = a * b - b * a;
      Vec sv = antisym_singular_values(c);
      const double denom = norms[i] * norms[j];
      const double v = denom > 0.0 && sv.size() ? sv[0] / denom : 0.0;
      out.normalized(i, j) = out.normalized(j, i) = v;
      out.pairs.emplace_back(i, j);
      if (keep_singular_values) out.singular_values.push_back(std::move(sv));
    }
  return out;
}

// ---------------------------------------------------------------------------

DefectReport compact_defect(const WaveSystem& sys, const OracleSpace& space,
                            const ControlBasis& basis, const BoundaryPatch& sigma,
                            double eps_rank, int samples, std::uint64_t seed) {
  DefectReport rep;
  rep.patch_id = sigma.id;
  rep.samples = samples;
  const MetricGrid& grid = sys.grid();
  const double T = basis.lattice.T;
  const Eigen::Index r = space.rank();
  if (sigma.empty()) {
    rep.singular_values = Vec::Zero(r);
    rep.k0 = 0;
    return rep;
  }

  const SubspaceChain chain = oracle_chain(space, basis, sigma, eps_rank);
  const EikonalOperator eik = eikonal(chain);
  const ScalarField tau = geodesic_distance(grid, sigma);
  const Vec tilde = eikonal_from_distance(tau, T).values;
  Mat d = eik.matrix - mult_project(grid, space, tilde);
  d = 0.5 * (d + d.transpose());
  rep.singular_values = sorted_spectrum(d).cwiseAbs();
  std::sort(rep.singular_values.data(), rep.singular_values.data() + rep.singular_values.size(),
            std::greater<>());
  const Vec& sv = rep.singular_values;
  if (sv.size() == 0 || sv[0] == 0.0) {
    rep.k0 = 0;
  } else {
    // Descending, so s_k / s_1 <= 0.1 holds for every k past the last large one.
    rep.k0 = 1 + static_cast<int>((sv.array() > 0.1 * sv[0]).count());
  }

  // Distances and weights at the field placement.
  const Vec tau_dof = space.placement == Placement::Node
                          ? tau.values
                          : node_to(grid, space.placement, tau.values);
  Vec tilde_dof = (T - tau_dof.array()).max(0.0).matrix();
  std::vector<Vec> masks;
  for (double s : eik.nodes) masks.push_back((tau_dof.array() < s).cast<double>().matrix());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto mnorm = [&](const Vec& v) { return std::sqrt((v.array().square() * space.mass.array()).sum()); };
  const SpMat& k_op = sys.coupling();
  const Vec& mq = sys.secondary_mass();
  for (int t = 0; t < samples; ++t) {
    Vec a(r);
    for (Eigen::Index i = 0; i < r; ++i) a[i] = normal(rng);
    const Vec y = space.basis * a;
    Vec lhs = tilde_dof.cwiseProduct(y) - space.basis * (eik.matrix * a);
    Vec ku = Vec::Zero(y.size());
    for (std::size_t k = 0; k < masks.size(); ++k) {
      const Mat q = chain.basis(static_cast<int>(k) + 1);
      ku += eik.weights[k] * (masks[k].cwiseProduct(y) - space.basis * (q * (q.transpose() * a)));
    }
    const double ds = eik.weights.empty() ? T : *std::max_element(eik.weights.begin(), eik.weights.end());
    const double ny = mnorm(y);
    if (ny > 0.0) {
      rep.identity_residual = std::max(rep.identity_residual, mnorm(lhs - ku) / (ds * ny));
      const Vec cku = k_op * ku;
      const double nc = std::sqrt((cku.array().square() * mq.array()).sum());
      rep.curl_ratio = std::max(rep.curl_ratio, nc / ny);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

OperatorFamily algebra_closure(const OperatorFamily& family, int degree_max) {
  if (degree_max < 1) throw ConfigError("algebra_closure: degree_max must be >= 1");
  family.validate();
  const int m = family.size();
  double words = 0.0, p = 1.0;
  for (int l = 1; l <= degree_max; ++l) {
    p *= m;
    words += p;
  }
  if (words + 1 > 1e4)
    throw ConfigError("algebra_closure: " + std::to_string(static_cast<long long>(words)) +
                      " words exceed the 10^4 guard; use a smaller degree");
  OperatorFamily out;
  out.space = family.space;
  const Eigen::Index n = family.dimension();
  auto add = [&](Mat a, std::string label) {
    a = 0.5 * (a + a.transpose());
    const double na = a.norm();
    for (const Mat& b : out.members) {
      const double scale = std::max({na, b.norm(), 1.0});
      if ((a - b).norm() <= 1e-12 * scale) return;
    }
    out.members.push_back(std::move(a));
    out.labels.push_back(std::move(label));
  };
  add(Mat::Identity(n, n), "id");
  std::vector<std::pair<Mat, std::string>> level;
  for (int i = 0; i < m; ++i) level.emplace_back(family.members[i], family.label(i));
  for (auto& [a, l] : level) add(a, l);
  for (int d = 2; d <= degree_max; ++d) {
    std::vector<std::pair<Mat, std::string>> next;
    for (auto& [a, l] : level)
      for (int i = 0; i < m; ++i) {
        Mat w = a * family.members[i];
        std::string lw = l + "*" + family.label(i);
        add(w, lw);
        next.emplace_back(std::move(w), std::move(lw));
      }
    level = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double off_energy(const std::vector<Mat>& a) {
  double e = 0.0;
  for (const Mat& m : a) e += m.squaredNorm() - m.diagonal().squaredNorm();
  return e;
}

}  // namespace

JointDiagonalization joint_diagonalize(const OperatorFamily& family, double tol, int max_sweeps,
                                       bool warm_start) {
  if (!(tol > 0.0)) throw ConfigError("joint_diagonalize: tol must be positive");
  family.validate();
  const Eigen::Index n = family.dimension();
  const int m = family.size();
  JointDiagonalization jd;
  jd.basis = Mat::Identity(n, n);
  std::vector<Mat> a = family.members;
  double total = 0.0;
  for (const Mat& x : a) total += x.squaredNorm();
  if (warm_start && n > 0 && off_energy(a) >= tol * total) {
    // Eigenbasis of a generic combination: exact for commuting families.
    Mat mix = Mat::Zero(n, n);
    for (int k = 0; k < m; ++k) {
      const double nk = a[k].norm();
      if (nk > 0.0) mix += (1.0 / std::sqrt(2.0 + k)) / nk * a[k];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (mix + mix.transpose()));
    if (es.info() == Eigen::Success) {
      jd.basis = es.eigenvectors();
      for (Mat& x : a) {
        x = jd.basis.transpose() * x * jd.basis;
        x = 0.5 * (x + x.transpose());
      }
    }
  }
  double off = off_energy(a);
  jd.residual = total > 0.0 ? off / total : 0.0;
  jd.converged = jd.residual < tol;

  while (!jd.converged && jd.sweeps < max_sweeps) {
    for (Eigen::Index p = 0; p + 1 < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double g00 = 0.0, g01 = 0.0, g11 = 0.0;
        for (int k = 0; k < m; ++k) {
          const double h0 = a[k](p, p) - a[k](q, q);
          const double h1 = 2.0 * a[k](p, q);
          g00 += h0 * h0;
          g01 += h0 * h1;
          g11 += h1 * h1;
        }
        // Leading eigenvector of [[g00, g01], [g01, g11]] is (cos 2a, sin 2a).
        const double angle = 0.25 * std::atan2(2.0 * g01, g00 - g11);
        if (std::abs(angle) < 1e-14) continue;
        const double c = std::cos(angle), s = std::sin(angle);
        for (Mat& x : a) {
          const double app = x(p, p), aqq = x(q, q), apq = x(p, q);
          Vec cp = x.col(p);
          x.col(p) = c * cp + s * x.col(q);
          x.col(q) = -s * cp + c * x.col(q);
          x(p, p) = c * c * app + 2.0 * c * s * apq + s * s * aqq;
          x(q, q) = s * s * app - 2.0 * c * s * apq + c * c * aqq;
          x(p, q) = x(q, p) = (c * c - s * s) * apq + c * s * (aqq - app);
          x.row(p) = x.col(p).transpose();
          x.row(q) = x.col(q).transpose();
        }
        Vec vp = jd.basis.col(p), vq = jd.basis.col(q);
        jd.basis.col(p) = c * vp + s * vq;
        jd.basis.col(q) = -s * vp + c * vq;
      }
    ++jd.sweeps;
    const double next = off_energy(a);
    jd.energy.push_back(next);
    jd.residual = total > 0.0 ? next / total : 0.0;
    jd.converged = jd.residual < tol;
    const bool stalled = off - next <= 1e-12 * off;
    off = next;
    if (stalled) break;
  }
  jd.diagonals = Mat::Zero(n, m);
  for (int k = 0; k < m; ++k) jd.diagonals.col(k) = a[k].diagonal();
  return jd;
}

SpectrumCloud spectrum_cloud(const JointDiagonalization& jd, const OperatorFamily& family,
                             double T) {
  SpectrumCloud cloud;
  cloud.points = jd.diagonals.cwiseMax(0.0).cwiseMin(T);
  cloud.weights = Vec::Ones(cloud.points.rows());
  cloud.residual = jd.residual;
  cloud.converged = jd.converged;
  cloud.labels = family.labels;
  return cloud;
}

SpectrumCloud spectrum_cloud(const OperatorFamily& family, double T, double tol,
                             int max_sweeps, bool warm_start) {
  return spectrum_cloud(joint_diagonalize(family, tol, max_sweeps, warm_start), family, T);
}

}  // namespace bcm
