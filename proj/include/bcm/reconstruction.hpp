#pragma once

// Ground-truth boundary-distance embedding of the layer Omega^T, Hausdorff
// comparison of tuple clouds, and the separation / density audits.

#include "bcm/manifold.hpp"

#include <cstdint>

namespace bcm {

struct EmbeddingImage {
  Mat points;              // count x m, coordinates max{T - dist(x, sigma_i), 0}
  std::vector<int> nodes;  // grid node per row
  Vec depth;               // dist(x, Gamma) per row
  double T = 0.0;
};

/// Distances to every patch, computed once and reused by the audits.
struct DistanceTable {
  std::vector<BoundaryPatch> patches;
  std::vector<Vec> to_patch;  // per patch, node field
  Vec to_boundary;            // dist(x, Gamma)
};

DistanceTable distance_table(const MetricGrid& grid, const std::vector<BoundaryPatch>& patches);

/// Throws ConfigError unless some node has dist(x, Gamma) >= T + h.
void check_layer_condition(const MetricGrid& grid, const Vec& to_boundary, double T);

EmbeddingImage ground_truth_embedding(const MetricGrid& grid,
                                      const std::vector<BoundaryPatch>& patches, double T);
EmbeddingImage ground_truth_embedding(const MetricGrid& grid, const DistanceTable& table,
                                      double T);

struct ComparisonReport {
  double hausdorff = 0.0;
  double forward = 0.0;   // sup_a inf_b |a - b|_inf
  double backward = 0.0;  // sup_b inf_a
  std::vector<double> forward_quantiles;   // 0.5, 0.9, 0.99, 1.0
  std::vector<double> backward_quantiles;
};

/// Exact l_inf Hausdorff distance between two row clouds. Brute force.
ComparisonReport hausdorff(const Mat& a, const Mat& b);

struct SeparationReport {
  int sampled = 0;
  int separated = 0;
  int excluded_near_cut = 0;  // candidate nodes dropped within 2h of the cut
  double fraction() const { return sampled ? static_cast<double>(separated) / sampled : 1.0; }
};

/// Random node pairs of Omega^T at distance >= 2h; a pair counts as
/// separated when some boundary node gamma gives coordinates
/// max{T - dist(., gamma), 0} differing by >= h/2.
SeparationReport separation_audit(const MetricGrid& grid, double T, int sample_count,
                                  std::uint64_t seed);
/// Deterministic check of one pair.
bool separated_pair(const MetricGrid& grid, double T, int x, int y);

struct DensityReport {
  bool injective = false;
  int colliding_pairs = 0;     // found before stopping (capped)
  std::pair<int, int> example{-1, -1};
  int minimal_family_size = 0;
  std::vector<std::string> minimal_family;
  int excluded_near_cut = 0;
};

/// Injectivity at resolution h of the tuple map of a patch family, plus the
/// family size left after greedy patch removal.
DensityReport density_audit(const std::vector<BoundaryPatch>& patches, const MetricGrid& grid,
                            double T, bool minimize = true);
DensityReport density_audit(const DistanceTable& table, const MetricGrid& grid, double T,
                            bool minimize = true);

}  // namespace bcm
