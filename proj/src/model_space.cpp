#include "bcm/model_space.hpp"

#include <algorithm>

namespace bcm {

Mat SubspaceChain::basis(int k) const {
  const int r = rank(k);
  return columns.leftCols(r);
}

namespace {

// Two passes of classical Gram-Schmidt against q.
void deflate(const Mat& q, Mat& y) {
  if (q.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) y -= q * (q.transpose() * y);
}

}  // namespace

SubspaceChain build_chain(const Mat& images, const ControlBasis& basis,
                          const BoundaryPatch& sigma, double eps_rank) {
  if (!(eps_rank > 0.0)) throw ConfigError("eps_rank must be positive");
  if (images.cols() != basis.size()) throw ShapeError("build_chain: one image per control");
  SubspaceChain chain;
  chain.patch = sigma;
  chain.delays = basis.delay_grid;
  chain.rank_threshold = eps_rank;
  chain.columns = Mat::Zero(images.rows(), 0);

  const std::vector<int> all = basis.delayed_class_index(sigma, basis.delays);
  double smax = 0.0;
  if (!all.empty()) {
    Mat y(images.rows(), static_cast<Eigen::Index>(all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) y.col(i) = images.col(all[i]);
    Eigen::BDCSVD<Mat> svd(y);
    smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  }

  for (int k = 1; k <= basis.delays; ++k) {
    std::vector<int> fresh;
    for (int c : all)
      if (basis.delay_index[c] == k) fresh.push_back(c);
    if (!fresh.empty() && smax > 0.0) {
      Mat y(images.rows(), static_cast<Eigen::Index>(fresh.size()));
      for (std::size_t i = 0; i < fresh.size(); ++i) y.col(i) = images.col(fresh[i]);
      deflate(chain.columns, y);
      Eigen::BDCSVD<Mat> svd(y, Eigen::ComputeThinU);
      const Vec& sv = svd.singularValues();
      int keep = 0;
      while (keep < sv.size() && sv[keep] >= eps_rank * smax) ++keep;
      if (keep > 0) {
        Mat u = svd.matrixU().leftCols(keep);
        deflate(chain.columns, u);
        for (int j = 0; j < keep; ++j) {
          if (j > 0) u.col(j) -= u.leftCols(j) * (u.leftCols(j).transpose() * u.col(j));
          u.col(j).normalize();
        }
        const Eigen::Index old = chain.columns.cols();
        chain.columns.conservativeResize(Eigen::NoChange, old + keep);
        chain.columns.rightCols(keep) = u;
      }
    }
    chain.ranks.push_back(static_cast<int>(chain.columns.cols()));
  }
  return chain;
}

Mat model_images(const ModelOperator& w) {
  return w.matrix * w.gram_factor.transpose();
}

SubspaceChain reachable_subspace(const ModelOperator& w, const ControlBasis& basis,
                                 const BoundaryPatch& sigma, double eps_rank) {
  return build_chain(model_images(w), basis, sigma, eps_rank);
}

ProjectionOperator projection_index(const SubspaceChain& chain, int k) {
  const Mat q = chain.basis(k);
  return {q * q.transpose()};
}

ProjectionOperator projection(const SubspaceChain& chain, double s) {
  int k = 0;
  for (std::size_t i = 0; i < chain.delays.size(); ++i)
    if (chain.delays[i] <= s * (1.0 + 1e-12)) k = static_cast<int>(i) + 1;
  if (s <= 0.0) k = 0;
  if (!chain.delays.empty() && s >= chain.delays.back()) k = static_cast<int>(chain.delays.size());
  return projection_index(chain, k);
}

EikonalOperator eikonal(const SubspaceChain& chain) {
  EikonalOperator out;
  out.patch_id = chain.patch.id;
  out.nodes = chain.delays;
  const Eigen::Index n = chain.dimension();
  out.matrix = Mat::Zero(n, n);
  double prev = 0.0;
  for (std::size_t k = 0; k < chain.delays.size(); ++k) {
    const double ds = chain.delays[k] - prev;
    prev = chain.delays[k];
    out.weights.push_back(ds);
    const Mat q = chain.basis(static_cast<int>(k) + 1);
    out.matrix.noalias() += ds * (q * q.transpose());
  }
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  return out;
}

// ---------------------------------------------------------------------------

OracleSpace oracle_space(const WaveSystem& sys, const OracleFields& oracle, double eps_rank) {
  OracleSpace space;
  space.placement = sys.primary_placement();
  space.mass = sys.primary_mass();
  if (oracle.snapshots.rows() != sys.primary_size())
    throw ShapeError("oracle_space: snapshots do not match the system");
  const Mat g = oracle_gram(sys, oracle);
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  if (es.info() != Eigen::Success) throw StageError("oracle_space", "eigensolver failed");
  const Vec lam = es.eigenvalues();
  const double lmax = lam.size() ? lam.maxCoeff() : 0.0;
  // Singular values of the snapshot matrix are sqrt(lambda).
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = lam.size() - 1; i >= 0; --i)
    if (lmax > 0.0 && lam[i] > 0.0 && std::sqrt(lam[i]) >= eps_rank * std::sqrt(lmax))
      keep.push_back(i);
  if (keep.size() < 3)
    throw StageError("oracle_space", "snapshot space has rank " + std::to_string(keep.size()) +
                                         " < 3; too poor to test");
  const Eigen::Index r = static_cast<Eigen::Index>(keep.size());
  Mat v(g.rows(), r);
  Vec root(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    v.col(j) = es.eigenvectors().col(keep[j]);
    root[j] = std::sqrt(lam[keep[j]]);
  }
  space.basis = oracle.snapshots * v * root.cwiseInverse().asDiagonal();
  // One refinement pass keeps the basis M-orthonormal to roundoff.
  Mat gram = space.basis.transpose() * space.mass.asDiagonal() * space.basis;
  Eigen::LLT<Mat> llt(gram);
  if (llt.info() == Eigen::Success)
    space.basis = llt.matrixU().solve(space.basis.transpose()).transpose();
  space.coords = space.basis.transpose() * space.mass.asDiagonal() * oracle.snapshots;
  return space;
}

SubspaceChain oracle_chain(const OracleSpace& space, const ControlBasis& basis,
                           const BoundaryPatch& sigma, double eps_rank) {
  return build_chain(space.coords, basis, sigma, eps_rank);
}

EikonalOperator oracle_eikonal(const OracleSpace& space, const ControlBasis& basis,
                               const BoundaryPatch& sigma, double eps_rank) {
  return eikonal(oracle_chain(space, basis, sigma, eps_rank));
}

Mat mult_project(const MetricGrid& grid, const OracleSpace& space, const Vec& node_function) {
  const Vec f = space.placement == Placement::Node ? node_function
                                                   : node_to(grid, space.placement, node_function);
  if (f.size() != space.basis.rows()) throw ShapeError("mult_project: function size mismatch");
  Mat out = space.basis.transpose() * (space.mass.cwiseProduct(f)).asDiagonal() * space.basis;
  return 0.5 * (out + out.transpose());
}

Vec sorted_spectrum(const Mat& sym, Eigen::Index length) {
  Vec lam = sym.size() ? Vec(Eigen::SelfAdjointEigenSolver<Mat>(sym, Eigen::EigenvaluesOnly)
                                 .eigenvalues())
                       : Vec();
  std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
  if (length < 0) return lam;
  Vec out = Vec::Zero(length);
  const Eigen::Index m = std::min(length, lam.size());
  out.head(m) = lam.head(m);
  return out;
}

double spectrum_distance(const Vec& a, const Vec& b) {
  const Eigen::Index n = std::max(a.size(), b.size());
  Vec pa = Vec::Zero(n), pb = Vec::Zero(n);
  pa.head(a.size()) = a;
  pb.head(b.size()) = b;
  const double nb = pb.norm();
  if (nb == 0.0) return pa.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (pa - pb).norm() / nb;
}

double quantile_distance(const Vec& a, const Vec& b) {
  if (a.size() == 0 || b.size() == 0) throw ShapeError("quantile_distance: empty spectrum");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double num = 0.0, den = 0.0, u = 0.0;
  Eigen::Index i = 0, j = 0;
  // Walk the merged breakpoints i/na and j/nb.
  while (i < a.size() && j < b.size()) {
    const double next = std::min((i + 1) / na, (j + 1) / nb);
    const double len = next - u;
    num += len * (a[i] - b[j]) * (a[i] - b[j]);
    den += len * b[j] * b[j];
    u = next;
    if ((i + 1) / na <= next) ++i;
    if ((j + 1) / nb <= next) ++j;
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace bcm
