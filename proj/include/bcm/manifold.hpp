#pragma once

// Metric-equipped box domain on a staggered grid.
//
// Degrees of freedom follow the usual Yee/cochain layout: scalars on nodes,
// 1-forms on edges, 2-forms on faces, densities on cells. Edge-placed vector
// fields store the covariant component along the edge; face-placed vector
// fields store the contravariant component normal to the face. With that
// convention curl and div are integer incidence matrices sandwiched between
// diagonal metric scalings, so div(curl .) and curl(grad .) vanish exactly.

#include "bcm/common.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bcm {

enum class Placement { Node, Edge, Face, Cell };

std::string to_string(Placement p);

/// Analytic metric family. All supported families are diagonal.
struct MetricSpec {
  std::string name = "identity";  // identity | conformal_sine | conformal_product | anisotropic_sine
  double amplitude = 0.0;
  int axis = 0;
  double frequency = 1.0;

  Eigen::Matrix3d evaluate(const Eigen::Vector3d& x) const;
  bool is_diagonal() const { return true; }
};

struct Index3 {
  int i = 0, j = 0, k = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

/// Location of an edge or face: axis direction plus lower-corner node.
struct StaggeredIndex {
  int dir = 0;
  Index3 at;
};

class MetricGrid {
 public:
  MetricGrid(std::array<int, 3> dims, std::array<double, 3> spacing,
             MetricSpec spec = {});

  const std::array<int, 3>& dims() const { return dims_; }
  const std::array<double, 3>& spacing() const { return h_; }
  const MetricSpec& metric_spec() const { return spec_; }
  double min_spacing() const;
  double max_spacing() const;
  Eigen::Vector3d extent() const;

  int num_nodes() const { return n_nodes_; }
  int num_edges() const { return edge_offset_[3]; }
  int num_faces() const { return face_offset_[3]; }
  int num_cells() const { return dims_[0] * dims_[1] * dims_[2]; }
  int size(Placement p) const;

  int node_index(int i, int j, int k) const {
    return i + (dims_[0] + 1) * (j + (dims_[1] + 1) * k);
  }
  int cell_index(int i, int j, int k) const {
    return i + dims_[0] * (j + dims_[1] * k);
  }
  int edge_index(int dir, int i, int j, int k) const;
  int face_index(int dir, int i, int j, int k) const;

  Index3 node_at(int node) const;
  StaggeredIndex edge_at(int edge) const;
  StaggeredIndex face_at(int face) const;
  Index3 cell_at(int cell) const;

  int edge_node(int edge, int end) const;  // end 0 = lower, 1 = upper

  Eigen::Vector3d node_position(int node) const;
  Eigen::Vector3d edge_midpoint(int edge) const;
  Eigen::Vector3d face_center(int face) const;
  Eigen::Vector3d cell_center(int cell) const;
  Eigen::Vector3d position(Placement p, int idx) const;

  const Eigen::Matrix3d& metric(int node) const { return metric_[node]; }
  /// Metric averaged onto an edge midpoint / face center / cell center.
  Eigen::Matrix3d edge_metric(int edge) const;
  Eigen::Matrix3d face_metric(int face) const;
  Eigen::Matrix3d cell_metric(int cell) const;

  bool is_boundary_node(int node) const;
  /// Edge lies inside the box surface (both endpoints on one boundary plane).
  bool is_boundary_edge(int edge) const { return boundary_edge_slot_[edge] >= 0; }
  bool is_boundary_face(int face) const;

  /// Tangential boundary edges, sorted by edge index.
  const std::vector<int>& boundary_edges() const { return boundary_edges_; }
  /// Slot of an edge in boundary_edges(), or -1.
  int boundary_slot(int edge) const { return boundary_edge_slot_[edge]; }
  /// Quadrature weight of each boundary edge for the surface pairing
  /// int_Gamma <f, f'> dGamma of covariant tangent fields.
  const Vec& boundary_edge_weight() const { return boundary_edge_weight_; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  const Vec& boundary_node_weight() const { return boundary_node_weight_; }
  int boundary_node_slot(int node) const { return boundary_node_slot_[node]; }

  // Integer incidence matrices.
  const SpMat& grad_incidence() const { return grad_inc_; }  // edges x nodes
  const SpMat& curl_incidence() const { return curl_inc_; }  // faces x edges
  const SpMat& div_incidence() const { return div_inc_; }    // cells x faces

  // Metric operators on proxy components.
  const SpMat& grad_op() const { return grad_op_; }  // node -> edge (covariant)
  const SpMat& curl_op() const { return curl_op_; }  // edge (cov) -> face (contra)
  const SpMat& div_op() const { return div_op_; }    // face (contra) -> cell

  // Diagonal Hodge masses: ||u||^2 = sum mass_i u_i^2.
  const Vec& node_mass() const { return node_mass_; }
  const Vec& edge_mass() const { return edge_mass_; }
  const Vec& face_mass() const { return face_mass_; }
  const Vec& cell_mass() const { return cell_mass_; }
  const Vec& mass(Placement p) const;

  double max_inverse_metric_eigenvalue() const { return max_inv_eig_; }

 private:
  void validate_metric();
  void build_operators();
  void build_boundary();

  std::array<int, 3> dims_;
  std::array<double, 3> h_;
  MetricSpec spec_;
  int n_nodes_ = 0;
  std::array<int, 4> edge_offset_{};
  std::array<int, 4> face_offset_{};
  std::vector<Eigen::Matrix3d> metric_;
  double max_inv_eig_ = 0.0;

  SpMat grad_inc_, curl_inc_, div_inc_;
  SpMat grad_op_, curl_op_, div_op_;
  Vec node_mass_, edge_mass_, face_mass_, cell_mass_;

  std::vector<int> boundary_edges_;
  std::vector<int> boundary_edge_slot_;
  Vec boundary_edge_weight_;
  std::vector<int> boundary_nodes_;
  std::vector<int> boundary_node_slot_;
  Vec boundary_node_weight_;
};

MetricGrid build_grid(std::array<int, 3> dims, std::array<double, 3> spacing,
                      const MetricSpec& spec);

// ---------------------------------------------------------------------------
// Boundary patches

/// Box side: 0:-x 1:+x 2:-y 3:+y 4:-z 5:+z.
struct BoundaryPatch {
  std::string id;
  std::vector<int> faces;  // global face indices, all on Gamma, sorted

  bool empty() const { return faces.empty(); }
};

int side_of_face(const MetricGrid& grid, int face);
/// Inward unit normal (metric length one) at a boundary face center,
/// as contravariant components.
Eigen::Vector3d inward_normal(const MetricGrid& grid, int face);

BoundaryPatch face_patch(const MetricGrid& grid, int side);
/// Quarter (qa, qb) of a side, split along its two tangential axes.
BoundaryPatch quarter_patch(const MetricGrid& grid, int side, int qa, int qb);
/// Tile (ta, tb) of a side cut into tiles x tiles pieces.
BoundaryPatch tile_patch(const MetricGrid& grid, int side, int ta, int tb, int tiles);
/// All tiles of all six sides; tiles == 2 yields the quarter patches.
std::vector<BoundaryPatch> tile_family(const MetricGrid& grid, int tiles);
BoundaryPatch whole_boundary(const MetricGrid& grid);
/// Six faces followed by four quarters per face.
std::vector<BoundaryPatch> default_patch_family(const MetricGrid& grid);
BoundaryPatch patch_union(std::string id, const std::vector<BoundaryPatch>& parts);

/// Tangential boundary edges touching any face of the patch (sorted).
std::vector<int> patch_edges(const MetricGrid& grid, const BoundaryPatch& patch);
/// Nodes of the closed patch faces (sorted).
std::vector<int> patch_nodes(const MetricGrid& grid, const BoundaryPatch& patch);

// ---------------------------------------------------------------------------
// Fields

struct ScalarField {
  Placement placement = Placement::Node;
  Vec values;
};

/// Edge: covariant component along the edge. Face: contravariant normal
/// component. Node: three contravariant components per node, interleaved.
struct VectorField {
  Placement placement = Placement::Edge;
  Vec values;
};

ScalarField sample_scalar(const MetricGrid& grid, Placement p,
                          const std::function<double(const Eigen::Vector3d&)>& fn);
/// fn returns contravariant components at a point.
VectorField sample_vector(const MetricGrid& grid, Placement p,
                          const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& fn);

VectorField curl(const MetricGrid& grid, const VectorField& field);
ScalarField div(const MetricGrid& grid, const VectorField& field);
VectorField grad(const MetricGrid& grid, const ScalarField& phi);
/// Face field -> edge field, the Hodge-adjoint of curl.
VectorField curl_dual(const MetricGrid& grid, const VectorField& field);
/// Edge field -> node scalar, minus the Hodge-adjoint of grad.
ScalarField div_dual(const MetricGrid& grid, const VectorField& field);

VectorField vector_product(const MetricGrid& grid, const VectorField& u,
                           const VectorField& v);
ScalarField metric_inner(const MetricGrid& grid, const VectorField& u,
                         const VectorField& v);

/// Hodge-weighted L2 inner product of two fields on the same placement.
double inner(const MetricGrid& grid, Placement p, const Vec& a, const Vec& b);

/// First-order collocation: each staggered value is attached to the node at
/// its lower corner. Returns a Node-placed vector field (edge/face input)
/// or scalar (cell input). Upper-boundary nodes get zero.
VectorField collocate_lower(const MetricGrid& grid, const VectorField& field);

/// Average a node scalar onto another placement.
Vec node_to(const MetricGrid& grid, Placement p, const Vec& node_values);

// ---------------------------------------------------------------------------
// Geodesics

enum class GeodesicMethod { Auto, FastMarching, Dijkstra };

ScalarField geodesic_distance(const MetricGrid& grid, const BoundaryPatch& patch,
                              GeodesicMethod method = GeodesicMethod::Auto);
/// Distance from an arbitrary set of seed nodes.
ScalarField geodesic_from_nodes(const MetricGrid& grid, const std::vector<int>& seeds,
                                GeodesicMethod method = GeodesicMethod::Auto);

/// max{T - dist(x, patch), 0} on nodes.
ScalarField eikonal_function(const MetricGrid& grid, const BoundaryPatch& patch,
                             double T);
ScalarField eikonal_from_distance(const ScalarField& distance, double T);

struct InfluenceMask {
  BoundaryPatch patch;
  double radius = 0.0;
  std::vector<std::uint8_t> indicator;  // per node

  int count() const;
  bool subset_of(const InfluenceMask& other) const;
};

InfluenceMask influence_mask(const MetricGrid& grid, const BoundaryPatch& patch,
                             double s);
InfluenceMask influence_mask_from_distance(const BoundaryPatch& patch,
                                           const ScalarField& distance, double s);

}  // namespace bcm
