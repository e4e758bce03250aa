#pragma once

// Nested reachable subspaces, their projections and operator eikonals
//   I[sigma] = int_0^T E_sigma^s ds,
// built once on the data side (from |W^T|) and once on the oracle side
// (from interior snapshots) so the two can be compared.

#include "bcm/response.hpp"

namespace bcm {

/// Orthonormal chain Q(s_1) c Q(s_2) c ... stored as one matrix whose first
/// ranks[k] columns span the subspace at delay s_{k+1}.
struct SubspaceChain {
  BoundaryPatch patch;
  std::vector<double> delays;
  Mat columns;
  std::vector<int> ranks;
  double rank_threshold = 1e-6;

  int dimension() const { return static_cast<int>(columns.rows()); }
  /// Basis at delay index k (1-based); k <= 0 gives an empty basis.
  Mat basis(int k) const;
  int rank(int k) const { return k <= 0 ? 0 : ranks[std::min<std::size_t>(k, ranks.size()) - 1]; }
};

/// Cumulative thresholded-SVD chain from per-control images. Column c of
/// `images` is the image of control c in some orthonormal coordinates.
/// The cutoff is eps_rank times the largest singular value of the whole
/// class at s = T.
SubspaceChain build_chain(const Mat& images, const ControlBasis& basis,
                          const BoundaryPatch& sigma, double eps_rank);

/// Images |W^T| L^T e_c of every control in model coordinates.
Mat model_images(const ModelOperator& w);

/// Data side: U_{sigma#}^s from |W^T|.
SubspaceChain reachable_subspace(const ModelOperator& w, const ControlBasis& basis,
                                 const BoundaryPatch& sigma, double eps_rank);

struct ProjectionOperator {
  Mat matrix;
};

/// E^s = Q Q^T; s <= 0 gives zero, s >= T gives the last step.
ProjectionOperator projection(const SubspaceChain& chain, double s);
ProjectionOperator projection_index(const SubspaceChain& chain, int k);

struct EikonalOperator {
  Mat matrix;
  std::string patch_id;
  std::vector<double> nodes;    // s_k
  std::vector<double> weights;  // Delta s
};

/// sum_k Delta s E^{s_k}: the nested chain is a right-continuous step
/// function, so on each cell (s_{k-1}, s_k] the projection equals E^{s_k}.
EikonalOperator eikonal(const SubspaceChain& chain);

/// Interior snapshot space: M-orthonormal basis of span{W^T f_c}.
struct OracleSpace {
  Placement placement = Placement::Edge;
  Vec mass;
  Mat basis;   // dofs x r, basis^T diag(mass) basis = Id
  Mat coords;  // r x n, snapshot of control c = basis * coords.col(c)
  int rank() const { return static_cast<int>(basis.cols()); }
};

/// Throws StageError when fewer than 3 directions survive eps_rank.
OracleSpace oracle_space(const WaveSystem& sys, const OracleFields& oracle, double eps_rank);

SubspaceChain oracle_chain(const OracleSpace& space, const ControlBasis& basis,
                           const BoundaryPatch& sigma, double eps_rank);
EikonalOperator oracle_eikonal(const OracleSpace& space, const ControlBasis& basis,
                               const BoundaryPatch& sigma, double eps_rank);

/// E^T[f] y = E^T(f y): pointwise multiplication by a node function
/// (averaged onto the field placement), then projection.
Mat mult_project(const MetricGrid& grid, const OracleSpace& space, const Vec& node_function);

/// Eigenvalues sorted descending, zero-padded to `length`.
Vec sorted_spectrum(const Mat& sym, Eigen::Index length = -1);
/// ||a - b|| / ||b|| after zero-padding to a common length.
double spectrum_distance(const Vec& a, const Vec& b);
/// Relative L2 distance between the normalized spectral quantile functions
/// of two descending spectra, which may have different lengths. Each
/// eigenvalue of a carries mass 1/a.size(). Equal lengths give
/// spectrum_distance.
double quantile_distance(const Vec& a, const Vec& b);

}  // namespace bcm
