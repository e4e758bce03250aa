#include "bcm/reconstruction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace bcm {

DistanceTable distance_table(const MetricGrid& grid, const std::vector<BoundaryPatch>& patches) {
  DistanceTable t;
  t.patches = patches;
  for (const auto& p : patches) t.to_patch.push_back(geodesic_distance(grid, p).values);
  t.to_boundary = geodesic_distance(grid, whole_boundary(grid)).values;
  return t;
}

void check_layer_condition(const MetricGrid& grid, const Vec& to_boundary, double T) {
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  const double depth = to_boundary.size() ? to_boundary.maxCoeff() : 0.0;
  if (depth < T + grid.max_spacing())
    throw ConfigError("T = " + std::to_string(T) + " leaves no interior: max depth " +
                      std::to_string(depth) + " < T + h");
}

EmbeddingImage ground_truth_embedding(const MetricGrid& grid, const DistanceTable& table,
                                      double T) {
  check_layer_condition(grid, table.to_boundary, T);
  EmbeddingImage img;
  img.T = T;
  for (int n = 0; n < grid.num_nodes(); ++n)
    if (table.to_boundary[n] < T) img.nodes.push_back(n);
  const auto m = static_cast<Eigen::Index>(table.patches.size());
  img.points.resize(static_cast<Eigen::Index>(img.nodes.size()), m);
  img.depth.resize(static_cast<Eigen::Index>(img.nodes.size()));
  for (std::size_t r = 0; r < img.nodes.size(); ++r) {
    const int n = img.nodes[r];
    img.depth[r] = table.to_boundary[n];
    for (Eigen::Index i = 0; i < m; ++i)
      img.points(r, i) = std::max(T - table.to_patch[i][n], 0.0);
  }
  return img;
}

EmbeddingImage ground_truth_embedding(const MetricGrid& grid,
                                      const std::vector<BoundaryPatch>& patches, double T) {
  return ground_truth_embedding(grid, distance_table(grid, patches), T);
}

// ---------------------------------------------------------------------------

namespace {

// Nearest-neighbor l_inf distances from every row of a to the rows of b.
std::vector<double> directed(const Mat& a, const Mat& b) {
  std::vector<double> out(a.rows(), std::numeric_limits<double>::infinity());
  const Mat bt = b.transpose();  // contiguous rows of b
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vec x = a.row(i).transpose();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < bt.cols(); ++j) {
      double d = 0.0;
      for (Eigen::Index k = 0; k < x.size() && d < best; ++k)
        d = std::max(d, std::abs(x[k] - bt(k, j)));
      best = std::min(best, d);
    }
    out[i] = best;
  }
  return out;
}

std::vector<double> quantiles(std::vector<double> v) {
  if (v.empty()) return {0.0, 0.0, 0.0, 0.0};
  std::sort(v.begin(), v.end());
  std::vector<double> q;
  for (double p : {0.5, 0.9, 0.99, 1.0}) {
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())) - 1);
    q.push_back(v[std::min(idx, v.size() - 1)]);
  }
  return q;
}

}  // namespace

ComparisonReport hausdorff(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw ShapeError("hausdorff: tuple dimension mismatch");
  ComparisonReport r;
  if (a.rows() == 0 && b.rows() == 0) return r;
  if (a.rows() == 0 || b.rows() == 0) {
    r.hausdorff = r.forward = r.backward = std::numeric_limits<double>::infinity();
    return r;
  }
  auto f = directed(a, b);
  auto g = directed(b, a);
  r.forward = *std::max_element(f.begin(), f.end());
  r.backward = *std::max_element(g.begin(), g.end());
  r.hausdorff = std::max(r.forward, r.backward);
  r.forward_quantiles = quantiles(std::move(f));
  r.backward_quantiles = quantiles(std::move(g));
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> boundary_node_list(const MetricGrid& grid) {
  std::vector<int> out;
  for (int n = 0; n < grid.num_nodes(); ++n)
    if (grid.is_boundary_node(n)) out.push_back(n);
  return out;
}

bool separated(const Vec& dx, const Vec& dy, const std::vector<int>& gammas, double T,
               double gap) {
  for (int g : gammas)
    if (std::abs(std::max(T - dx[g], 0.0) - std::max(T - dy[g], 0.0)) >= gap) return true;
  return false;
}

}  // namespace

bool separated_pair(const MetricGrid& grid, double T, int x, int y) {
  const Vec dx = geodesic_from_nodes(grid, {x}).values;
  const Vec dy = geodesic_from_nodes(grid, {y}).values;
  return separated(dx, dy, boundary_node_list(grid), T, 0.5 * grid.max_spacing());
}

SeparationReport separation_audit(const MetricGrid& grid, double T, int sample_count,
                                  std::uint64_t seed) {
  SeparationReport rep;
  const double h = grid.max_spacing();
  const Vec depth = geodesic_distance(grid, whole_boundary(grid)).values;
  check_layer_condition(grid, depth, T);
  std::vector<int> candidates;
  for (int n = 0; n < grid.num_nodes(); ++n) {
    if (depth[n] >= T) continue;
    if (depth[n] > T - 2.0 * h) {
      ++rep.excluded_near_cut;
      continue;
    }
    candidates.push_back(n);
  }
  if (candidates.size() < 2) return rep;
  const std::vector<int> gammas = boundary_node_list(grid);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  long attempts = 0;
  const long max_attempts = 100L * std::max(sample_count, 1);
  while (rep.sampled < sample_count && attempts++ < max_attempts) {
    const int x = candidates[pick(rng)];
    const int y = candidates[pick(rng)];
    if (x == y) continue;
    const Vec dx = geodesic_from_nodes(grid, {x}).values;
    if (dx[y] < 2.0 * h) continue;
    const Vec dy = geodesic_from_nodes(grid, {y}).values;
    ++rep.sampled;
    if (separated(dx, dy, gammas, T, 0.5 * h)) ++rep.separated;
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct Collision {
  int count = 0;
  std::pair<int, int> example{-1, -1};
};

// Pairs of nodes >= 2h apart whose tuples agree to within h/2 in every
// coordinate. Candidate pairs come from a bucket grid over the three most
// spread-out coordinates.
Collision find_collisions(const MetricGrid& grid, const std::vector<int>& nodes,
                          const std::vector<const Vec*>& coords, double T, int cap) {
  Collision col;
  const double h = grid.max_spacing();
  const double gap = 0.5 * h;
  const std::size_t m = coords.size();
  if (nodes.size() < 2) return col;
  auto value = [&](std::size_t i, int n) { return std::max(T - (*coords[i])[n], 0.0); };

  if (m == 0) {
    // Every node maps to the empty tuple.
    for (std::size_t a = 0; a < nodes.size() && col.count < cap; ++a)
      for (std::size_t b = a + 1; b < nodes.size() && col.count < cap; ++b)
        if ((grid.node_position(nodes[a]) - grid.node_position(nodes[b])).norm() >=
            2.0 * h - 1e-12) {
          if (col.count == 0) col.example = {nodes[a], nodes[b]};
          ++col.count;
        }
    return col;
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> spread(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double lo = T, hi = 0.0;
    for (int n : nodes) {
      lo = std::min(lo, value(i, n));
      hi = std::max(hi, value(i, n));
    }
    spread[i] = hi - lo;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return spread[a] > spread[b]; });
  const std::size_t keys = std::min<std::size_t>(3, m);

  using Key = std::array<long, 3>;
  std::map<Key, std::vector<int>> buckets;
  auto key_of = [&](int n) {
    Key k{0, 0, 0};
    for (std::size_t i = 0; i < keys; ++i)
      k[i] = static_cast<long>(std::floor(value(order[i], n) / gap));
    return k;
  };
  for (int n : nodes) buckets[key_of(n)].push_back(n);

  for (int a : nodes) {
    const Key ka = key_of(a);
    const Eigen::Vector3d pa = grid.node_position(a);
    const int span0 = keys > 0 ? 1 : 0, span1 = keys > 1 ? 1 : 0, span2 = keys > 2 ? 1 : 0;
    for (int d0 = -span0; d0 <= span0; ++d0)
      for (int d1 = -span1; d1 <= span1; ++d1)
        for (int d2 = -span2; d2 <= span2; ++d2) {
          auto it = buckets.find({ka[0] + d0, ka[1] + d1, ka[2] + d2});
          if (it == buckets.end()) continue;
          for (int b : it->second) {
            if (b <= a) continue;
            if ((grid.node_position(b) - pa).norm() < 2.0 * h - 1e-12) continue;
            bool close = true;
            for (std::size_t i = 0; i < m && close; ++i)
              close = std::abs(value(i, a) - value(i, b)) < gap;
            if (!close) continue;
            if (col.count == 0) col.example = {a, b};
            if (++col.count >= cap) return col;
          }
        }
  }
  return col;
}

}  // namespace

DensityReport density_audit(const DistanceTable& table, const MetricGrid& grid, double T,
                            bool minimize) {
  DensityReport rep;
  const double h = grid.max_spacing();
  check_layer_condition(grid, table.to_boundary, T);
  std::vector<int> nodes;
  for (int n = 0; n < grid.num_nodes(); ++n) {
    if (table.to_boundary[n] >= T) continue;
    if (table.to_boundary[n] > T - 2.0 * h) {
      ++rep.excluded_near_cut;
      continue;
    }
    nodes.push_back(n);
  }
  std::vector<const Vec*> all;
  for (const auto& v : table.to_patch) all.push_back(&v);
  const int cap = 1000;
  Collision col = find_collisions(grid, nodes, all, T, cap);
  rep.injective = col.count == 0;
  rep.colliding_pairs = col.count;
  rep.example = col.example;

  std::vector<std::size_t> kept(table.patches.size());
  std::iota(kept.begin(), kept.end(), 0);
  if (minimize && rep.injective) {
    // Greedy removal, trying the most recently listed patches first.
    for (std::size_t r = table.patches.size(); r-- > 0;) {
      std::vector<std::size_t> trial;
      for (std::size_t i : kept)
        if (i != r) trial.push_back(i);
      std::vector<const Vec*> coords;
      for (std::size_t i : trial) coords.push_back(&table.to_patch[i]);
      if (find_collisions(grid, nodes, coords, T, 1).count == 0) kept = std::move(trial);
    }
  }
  rep.minimal_family_size = static_cast<int>(kept.size());
  for (std::size_t i : kept) rep.minimal_family.push_back(table.patches[i].id);
  return rep;
}

DensityReport density_audit(const std::vector<BoundaryPatch>& patches, const MetricGrid& grid,
                            double T, bool minimize) {
  return density_audit(distance_table(grid, patches), grid, T, minimize);
}

}  // namespace bcm
