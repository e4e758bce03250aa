#include "bcm/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace bcm {

namespace {

using Triplet = Eigen::Triplet<double>;

std::string node_name(const Index3& n) {
  std::ostringstream os;
  os << "(" << n.i << "," << n.j << "," << n.k << ")";
  return os.str();
}

int comp(const Index3& p, int axis) {
  return axis == 0 ? p.i : (axis == 1 ? p.j : p.k);
}

Index3 shifted(Index3 p, int axis, int by = 1) {
  if (axis == 0) p.i += by;
  else if (axis == 1) p.j += by;
  else p.k += by;
  return p;
}

}  // namespace

std::string to_string(Placement p) {
  switch (p) {
    case Placement::Node: return "node";
    case Placement::Edge: return "edge";
    case Placement::Face: return "face";
    case Placement::Cell: return "cell";
  }
  return "?";
}

Eigen::Matrix3d MetricSpec::evaluate(const Eigen::Vector3d& x) const {
  using std::numbers::pi;
  if (name == "identity") return Eigen::Matrix3d::Identity();
  if (name == "conformal_sine") {
    return (1.0 + amplitude * std::sin(pi * frequency * x[axis])) *
           Eigen::Matrix3d::Identity();
  }
  if (name == "conformal_product") {
    double s = std::sin(pi * frequency * x[0]) * std::sin(pi * frequency * x[1]) *
               std::sin(pi * frequency * x[2]);
    return (1.0 + amplitude * s) * Eigen::Matrix3d::Identity();
  }
  if (name == "anisotropic_sine") {
    Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
    g(axis, axis) = 1.0 + amplitude * std::sin(pi * frequency * x[axis]);
    return g;
  }
  throw ConfigError("unknown metric '" + name + "'");
}

// ---------------------------------------------------------------------------

MetricGrid::MetricGrid(std::array<int, 3> dims, std::array<double, 3> spacing,
                       MetricSpec spec)
    : dims_(dims), h_(spacing), spec_(std::move(spec)) {
  for (int d = 0; d < 3; ++d) {
    if (dims_[d] < 4) throw ConfigError("grid needs at least 4 cells per axis");
    if (!(h_[d] > 0.0) || !std::isfinite(h_[d]))
      throw ConfigError("grid spacing must be positive");
  }
  const int nx = dims_[0], ny = dims_[1], nz = dims_[2];
  n_nodes_ = (nx + 1) * (ny + 1) * (nz + 1);
  edge_offset_[0] = 0;
  edge_offset_[1] = nx * (ny + 1) * (nz + 1);
  edge_offset_[2] = edge_offset_[1] + (nx + 1) * ny * (nz + 1);
  edge_offset_[3] = edge_offset_[2] + (nx + 1) * (ny + 1) * nz;
  face_offset_[0] = 0;
  face_offset_[1] = (nx + 1) * ny * nz;
  face_offset_[2] = face_offset_[1] + nx * (ny + 1) * nz;
  face_offset_[3] = face_offset_[2] + nx * ny * (nz + 1);

  metric_.resize(n_nodes_);
  for (int n = 0; n < n_nodes_; ++n) metric_[n] = spec_.evaluate(node_position(n));
  validate_metric();
  build_operators();
  build_boundary();
}

void MetricGrid::validate_metric() {
  max_inv_eig_ = 0.0;
  for (int n = 0; n < n_nodes_; ++n) {
    const Eigen::Matrix3d& g = metric_[n];
    if (!g.allFinite() || (g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * g.norm())
      throw ConfigError("metric not symmetric at node " + node_name(node_at(n)));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("metric not positive definite at node " + node_name(node_at(n)));
    max_inv_eig_ = std::max(max_inv_eig_, 1.0 / es.eigenvalues().minCoeff());
  }
  for (int n = 0; n < n_nodes_; ++n) {
    Index3 p = node_at(n);
    for (int d = 0; d < 3; ++d) {
      if (comp(p, d) == dims_[d]) continue;
      Index3 q = shifted(p, d);
      const auto& a = metric_[n];
      const auto& b = metric_[node_index(q.i, q.j, q.k)];
      double rel = (a - b).norm() / std::min(a.norm(), b.norm());
      if (rel >= 0.5)
        throw ConfigError("metric varies by more than 50% between nodes " +
                          node_name(p) + " and " + node_name(q));
    }
  }
}

double MetricGrid::min_spacing() const { return std::min({h_[0], h_[1], h_[2]}); }
double MetricGrid::max_spacing() const { return std::max({h_[0], h_[1], h_[2]}); }
Eigen::Vector3d MetricGrid::extent() const {
  return {dims_[0] * h_[0], dims_[1] * h_[1], dims_[2] * h_[2]};
}

int MetricGrid::size(Placement p) const {
  switch (p) {
    case Placement::Node: return num_nodes();
    case Placement::Edge: return num_edges();
    case Placement::Face: return num_faces();
    case Placement::Cell: return num_cells();
  }
  return 0;
}

int MetricGrid::edge_index(int dir, int i, int j, int k) const {
  const int ex = dims_[0] + (dir == 0 ? 0 : 1);
  const int ey = dims_[1] + (dir == 1 ? 0 : 1);
  return edge_offset_[dir] + i + ex * (j + ey * k);
}

int MetricGrid::face_index(int dir, int i, int j, int k) const {
  const int ex = dims_[0] + (dir == 0 ? 1 : 0);
  const int ey = dims_[1] + (dir == 1 ? 1 : 0);
  return face_offset_[dir] + i + ex * (j + ey * k);
}

Index3 MetricGrid::node_at(int node) const {
  const int ex = dims_[0] + 1, ey = dims_[1] + 1;
  return {node % ex, (node / ex) % ey, node / (ex * ey)};
}

Index3 MetricGrid::cell_at(int cell) const {
  const int ex = dims_[0], ey = dims_[1];
  return {cell % ex, (cell / ex) % ey, cell / (ex * ey)};
}

StaggeredIndex MetricGrid::edge_at(int edge) const {
  int dir = edge < edge_offset_[1] ? 0 : (edge < edge_offset_[2] ? 1 : 2);
  int local = edge - edge_offset_[dir];
  const int ex = dims_[0] + (dir == 0 ? 0 : 1);
  const int ey = dims_[1] + (dir == 1 ? 0 : 1);
  return {dir, {local % ex, (local / ex) % ey, local / (ex * ey)}};
}

StaggeredIndex MetricGrid::face_at(int face) const {
  int dir = face < face_offset_[1] ? 0 : (face < face_offset_[2] ? 1 : 2);
  int local = face - face_offset_[dir];
  const int ex = dims_[0] + (dir == 0 ? 1 : 0);
  const int ey = dims_[1] + (dir == 1 ? 1 : 0);
  return {dir, {local % ex, (local / ex) % ey, local / (ex * ey)}};
}

int MetricGrid::edge_node(int edge, int end) const {
  auto e = edge_at(edge);
  Index3 p = end == 0 ? e.at : shifted(e.at, e.dir);
  return node_index(p.i, p.j, p.k);
}

Eigen::Vector3d MetricGrid::node_position(int node) const {
  Index3 p = node_at(node);
  return {p.i * h_[0], p.j * h_[1], p.k * h_[2]};
}

Eigen::Vector3d MetricGrid::edge_midpoint(int edge) const {
  auto e = edge_at(edge);
  Eigen::Vector3d x{e.at.i * h_[0], e.at.j * h_[1], e.at.k * h_[2]};
  x[e.dir] += 0.5 * h_[e.dir];
  return x;
}

Eigen::Vector3d MetricGrid::face_center(int face) const {
  auto f = face_at(face);
  Eigen::Vector3d x{f.at.i * h_[0], f.at.j * h_[1], f.at.k * h_[2]};
  for (int d = 0; d < 3; ++d)
    if (d != f.dir) x[d] += 0.5 * h_[d];
  return x;
}

Eigen::Vector3d MetricGrid::cell_center(int cell) const {
  Index3 c = cell_at(cell);
  return {(c.i + 0.5) * h_[0], (c.j + 0.5) * h_[1], (c.k + 0.5) * h_[2]};
}

Eigen::Vector3d MetricGrid::position(Placement p, int idx) const {
  switch (p) {
    case Placement::Node: return node_position(idx);
    case Placement::Edge: return edge_midpoint(idx);
    case Placement::Face: return face_center(idx);
    case Placement::Cell: return cell_center(idx);
  }
  return {};
}

Eigen::Matrix3d MetricGrid::edge_metric(int edge) const {
  return 0.5 * (metric_[edge_node(edge, 0)] + metric_[edge_node(edge, 1)]);
}

Eigen::Matrix3d MetricGrid::face_metric(int face) const {
  auto f = face_at(face);
  const int a = (f.dir + 1) % 3, b = (f.dir + 2) % 3;
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  for (int da = 0; da < 2; ++da)
    for (int db = 0; db < 2; ++db) {
      Index3 p = shifted(shifted(f.at, a, da), b, db);
      g += metric_[node_index(p.i, p.j, p.k)];
    }
  return 0.25 * g;
}

Eigen::Matrix3d MetricGrid::cell_metric(int cell) const {
  Index3 c = cell_at(cell);
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) g += metric_[node_index(c.i + di, c.j + dj, c.k + dk)];
  return 0.125 * g;
}

bool MetricGrid::is_boundary_node(int node) const {
  Index3 p = node_at(node);
  for (int d = 0; d < 3; ++d)
    if (comp(p, d) == 0 || comp(p, d) == dims_[d]) return true;
  return false;
}

bool MetricGrid::is_boundary_face(int face) const {
  auto f = face_at(face);
  int c = comp(f.at, f.dir);
  return c == 0 || c == dims_[f.dir];
}

const Vec& MetricGrid::mass(Placement p) const {
  switch (p) {
    case Placement::Node: return node_mass_;
    case Placement::Edge: return edge_mass_;
    case Placement::Face: return face_mass_;
    case Placement::Cell: return cell_mass_;
  }
  return node_mass_;
}

void MetricGrid::build_operators() {
  const double vol = h_[0] * h_[1] * h_[2];
  auto on_plane = [&](const Index3& p, int axis) {
    int c = comp(p, axis);
    return c == 0 || c == dims_[axis];
  };

  // grad incidence and operator
  {
    std::vector<Triplet> inc, op;
    inc.reserve(2 * num_edges());
    op.reserve(2 * num_edges());
    for (int e = 0; e < num_edges(); ++e) {
      int a = edge_node(e, 0), b = edge_node(e, 1);
      double inv_h = 1.0 / h_[edge_at(e).dir];
      inc.emplace_back(e, a, -1.0);
      inc.emplace_back(e, b, 1.0);
      op.emplace_back(e, a, -inv_h);
      op.emplace_back(e, b, inv_h);
    }
    grad_inc_.resize(num_edges(), num_nodes());
    grad_inc_.setFromTriplets(inc.begin(), inc.end());
    grad_op_.resize(num_edges(), num_nodes());
    grad_op_.setFromTriplets(op.begin(), op.end());
  }

  // curl incidence (right-handed circulation about the face normal)
  std::vector<double> face_sqrtg(num_faces());
  {
    std::vector<Triplet> inc, op;
    inc.reserve(4 * num_faces());
    op.reserve(4 * num_faces());
    for (int f = 0; f < num_faces(); ++f) {
      auto fi = face_at(f);
      const int d = fi.dir, a = (d + 1) % 3, b = (d + 2) % 3;
      const Index3 p = fi.at;
      const Index3 pa = shifted(p, a), pb = shifted(p, b);
      const int ea0 = edge_index(a, p.i, p.j, p.k);
      const int eb1 = edge_index(b, pa.i, pa.j, pa.k);
      const int ea1 = edge_index(a, pb.i, pb.j, pb.k);
      const int eb0 = edge_index(b, p.i, p.j, p.k);
      const double sg = std::sqrt(face_metric(f).determinant());
      face_sqrtg[f] = sg;
      const double scale = 1.0 / (sg * h_[a] * h_[b]);
      inc.emplace_back(f, ea0, 1.0);
      inc.emplace_back(f, eb1, 1.0);
      inc.emplace_back(f, ea1, -1.0);
      inc.emplace_back(f, eb0, -1.0);
      op.emplace_back(f, ea0, scale * h_[a]);
      op.emplace_back(f, eb1, scale * h_[b]);
      op.emplace_back(f, ea1, -scale * h_[a]);
      op.emplace_back(f, eb0, -scale * h_[b]);
    }
    curl_inc_.resize(num_faces(), num_edges());
    curl_inc_.setFromTriplets(inc.begin(), inc.end());
    curl_op_.resize(num_faces(), num_edges());
    curl_op_.setFromTriplets(op.begin(), op.end());
  }

  // div incidence (outward flux)
  {
    std::vector<Triplet> inc, op;
    inc.reserve(6 * num_cells());
    op.reserve(6 * num_cells());
    for (int c = 0; c < num_cells(); ++c) {
      Index3 p = cell_at(c);
      const double sg = std::sqrt(cell_metric(c).determinant());
      for (int d = 0; d < 3; ++d) {
        const int a = (d + 1) % 3, b = (d + 2) % 3;
        const double area = h_[a] * h_[b];
        Index3 q = shifted(p, d);
        int f0 = face_index(d, p.i, p.j, p.k);
        int f1 = face_index(d, q.i, q.j, q.k);
        inc.emplace_back(c, f0, -1.0);
        inc.emplace_back(c, f1, 1.0);
        op.emplace_back(c, f0, -face_sqrtg[f0] * area / (sg * vol));
        op.emplace_back(c, f1, face_sqrtg[f1] * area / (sg * vol));
      }
    }
    div_inc_.resize(num_cells(), num_faces());
    div_inc_.setFromTriplets(inc.begin(), inc.end());
    div_op_.resize(num_cells(), num_faces());
    div_op_.setFromTriplets(op.begin(), op.end());
  }

  // Hodge masses (diagonal; dual volumes halved on boundary planes)
  node_mass_.resize(num_nodes());
  for (int n = 0; n < num_nodes(); ++n) {
    Index3 p = node_at(n);
    double v = vol;
    for (int d = 0; d < 3; ++d)
      if (on_plane(p, d)) v *= 0.5;
    node_mass_[n] = std::sqrt(metric_[n].determinant()) * v;
  }
  edge_mass_.resize(num_edges());
  for (int e = 0; e < num_edges(); ++e) {
    auto ei = edge_at(e);
    double v = vol;
    for (int d = 0; d < 3; ++d)
      if (d != ei.dir && on_plane(ei.at, d)) v *= 0.5;
    Eigen::Matrix3d g = edge_metric(e);
    edge_mass_[e] = std::sqrt(g.determinant()) * g.inverse()(ei.dir, ei.dir) * v;
  }
  face_mass_.resize(num_faces());
  for (int f = 0; f < num_faces(); ++f) {
    auto fi = face_at(f);
    double v = vol;
    if (on_plane(fi.at, fi.dir)) v *= 0.5;
    face_mass_[f] = face_sqrtg[f] * face_metric(f)(fi.dir, fi.dir) * v;
  }
  cell_mass_.resize(num_cells());
  for (int c = 0; c < num_cells(); ++c)
    cell_mass_[c] = std::sqrt(cell_metric(c).determinant()) * vol;
}

void MetricGrid::build_boundary() {
  auto on_plane = [&](const Index3& p, int axis) {
    int c = comp(p, axis);
    return c == 0 || c == dims_[axis];
  };
  boundary_edge_slot_.assign(num_edges(), -1);
  std::vector<double> weights;
  for (int e = 0; e < num_edges(); ++e) {
    auto ei = edge_at(e);
    const int d = ei.dir;
    double w = 0.0;
    bool boundary = false;
    Eigen::Matrix3d g = edge_metric(e);
    double ginv_dd = g.inverse()(d, d);
    for (int a = 0; a < 3; ++a) {
      if (a == d || !on_plane(ei.at, a)) continue;
      boundary = true;
      const int t = 3 - a - d;  // other tangential axis of the plane
      double width = h_[t] * (on_plane(ei.at, t) ? 0.5 : 1.0);
      w += ginv_dd * std::sqrt(g(d, d) * g(t, t)) * h_[d] * width;
    }
    if (boundary) {
      boundary_edge_slot_[e] = static_cast<int>(boundary_edges_.size());
      boundary_edges_.push_back(e);
      weights.push_back(w);
    }
  }
  boundary_edge_weight_ = Eigen::Map<Vec>(weights.data(), weights.size());

  boundary_node_slot_.assign(num_nodes(), -1);
  std::vector<double> nweights;
  for (int n = 0; n < num_nodes(); ++n) {
    Index3 p = node_at(n);
    double w = 0.0;
    bool boundary = false;
    const auto& g = metric_[n];
    for (int a = 0; a < 3; ++a) {
      if (!on_plane(p, a)) continue;
      boundary = true;
      const int t1 = (a + 1) % 3, t2 = (a + 2) % 3;
      double area = h_[t1] * (on_plane(p, t1) ? 0.5 : 1.0) * h_[t2] *
                    (on_plane(p, t2) ? 0.5 : 1.0);
      w += std::sqrt(g(t1, t1) * g(t2, t2)) * area;
    }
    if (boundary) {
      boundary_node_slot_[n] = static_cast<int>(boundary_nodes_.size());
      boundary_nodes_.push_back(n);
      nweights.push_back(w);
    }
  }
  boundary_node_weight_ = Eigen::Map<Vec>(nweights.data(), nweights.size());
}

MetricGrid build_grid(std::array<int, 3> dims, std::array<double, 3> spacing,
                      const MetricSpec& spec) {
  return MetricGrid(dims, spacing, spec);
}

// ---------------------------------------------------------------------------
// Patches

int side_of_face(const MetricGrid& grid, int face) {
  auto f = grid.face_at(face);
  int c = comp(f.at, f.dir);
  if (c == 0) return 2 * f.dir;
  if (c == grid.dims()[f.dir]) return 2 * f.dir + 1;
  return -1;
}

Eigen::Vector3d inward_normal(const MetricGrid& grid, int face) {
  int side = side_of_face(grid, face);
  if (side < 0) throw ShapeError("face is not on the boundary");
  const int axis = side / 2;
  Eigen::Matrix3d ginv = grid.face_metric(face).inverse();
  // nu_contra = g^{-1} n_cov / |n_cov|, n_cov = +-e_axis
  Eigen::Vector3d ncov = Eigen::Vector3d::Zero();
  ncov[axis] = (side % 2 == 0) ? 1.0 : -1.0;
  Eigen::Vector3d nu = ginv * ncov;
  return nu / std::sqrt(ncov.dot(nu));
}

namespace {

const char* kSideNames[6] = {"xm", "xp", "ym", "yp", "zm", "zp"};

BoundaryPatch side_range(const MetricGrid& grid, int side, int a0, int a1, int b0,
                         int b1, std::string id) {
  const int axis = side / 2, a = (axis + 1) % 3, b = (axis + 2) % 3;
  const int plane = (side % 2 == 0) ? 0 : grid.dims()[axis];
  BoundaryPatch p;
  p.id = std::move(id);
  for (int ib = b0; ib < b1; ++ib)
    for (int ia = a0; ia < a1; ++ia) {
      int idx[3];
      idx[axis] = plane;
      idx[a] = ia;
      idx[b] = ib;
      p.faces.push_back(grid.face_index(axis, idx[0], idx[1], idx[2]));
    }
  std::sort(p.faces.begin(), p.faces.end());
  return p;
}

}  // namespace

BoundaryPatch face_patch(const MetricGrid& grid, int side) {
  if (side < 0 || side > 5) throw ConfigError("side must be in [0, 5]");
  const int axis = side / 2, a = (axis + 1) % 3, b = (axis + 2) % 3;
  return side_range(grid, side, 0, grid.dims()[a], 0, grid.dims()[b], kSideNames[side]);
}

BoundaryPatch quarter_patch(const MetricGrid& grid, int side, int qa, int qb) {
  if (side < 0 || side > 5) throw ConfigError("side must be in [0, 5]");
  const int axis = side / 2, a = (axis + 1) % 3, b = (axis + 2) % 3;
  const int na = grid.dims()[a], nb = grid.dims()[b];
  if (na % 2 || nb % 2) throw ConfigError("quarter patches need even grid dims");
  std::string id = std::string(kSideNames[side]) + ".q" + std::to_string(qa) +
                   std::to_string(qb);
  return side_range(grid, side, qa * na / 2, (qa + 1) * na / 2, qb * nb / 2,
                    (qb + 1) * nb / 2, std::move(id));
}

BoundaryPatch tile_patch(const MetricGrid& grid, int side, int ta, int tb, int tiles) {
  if (side < 0 || side > 5) throw ConfigError("side must be in [0, 5]");
  if (tiles < 1) throw ConfigError("tile count must be positive");
  const int axis = side / 2, a = (axis + 1) % 3, b = (axis + 2) % 3;
  const int na = grid.dims()[a], nb = grid.dims()[b];
  if (na % tiles || nb % tiles)
    throw ConfigError("grid dims must be divisible by the tile count " + std::to_string(tiles));
  if (ta < 0 || tb < 0 || ta >= tiles || tb >= tiles) throw ConfigError("tile index out of range");
  std::string id = std::string(kSideNames[side]) + ".t" + std::to_string(tiles) + "." +
                   std::to_string(ta) + "." + std::to_string(tb);
  return side_range(grid, side, ta * na / tiles, (ta + 1) * na / tiles, tb * nb / tiles,
                    (tb + 1) * nb / tiles, std::move(id));
}

std::vector<BoundaryPatch> tile_family(const MetricGrid& grid, int tiles) {
  std::vector<BoundaryPatch> out;
  for (int s = 0; s < 6; ++s)
    for (int tb = 0; tb < tiles; ++tb)
      for (int ta = 0; ta < tiles; ++ta)
        out.push_back(tiles == 2 ? quarter_patch(grid, s, ta, tb) : tile_patch(grid, s, ta, tb, tiles));
  return out;
}

BoundaryPatch whole_boundary(const MetricGrid& grid) {
  std::vector<BoundaryPatch> sides;
  for (int s = 0; s < 6; ++s) sides.push_back(face_patch(grid, s));
  return patch_union("boundary", sides);
}

std::vector<BoundaryPatch> default_patch_family(const MetricGrid& grid) {
  std::vector<BoundaryPatch> out;
  for (int s = 0; s < 6; ++s) out.push_back(face_patch(grid, s));
  for (int s = 0; s < 6; ++s)
    for (int qb = 0; qb < 2; ++qb)
      for (int qa = 0; qa < 2; ++qa) out.push_back(quarter_patch(grid, s, qa, qb));
  return out;
}

BoundaryPatch patch_union(std::string id, const std::vector<BoundaryPatch>& parts) {
  BoundaryPatch p;
  p.id = std::move(id);
  for (const auto& q : parts) p.faces.insert(p.faces.end(), q.faces.begin(), q.faces.end());
  std::sort(p.faces.begin(), p.faces.end());
  p.faces.erase(std::unique(p.faces.begin(), p.faces.end()), p.faces.end());
  return p;
}

std::vector<int> patch_edges(const MetricGrid& grid, const BoundaryPatch& patch) {
  const SpMat& C = grid.curl_incidence();
  std::vector<int> edges;
  for (int f : patch.faces)
    for (SpMat::InnerIterator it(C, f); it; ++it) edges.push_back(static_cast<int>(it.col()));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<int> patch_nodes(const MetricGrid& grid, const BoundaryPatch& patch) {
  std::vector<int> nodes;
  for (int e : patch_edges(grid, patch)) {
    nodes.push_back(grid.edge_node(e, 0));
    nodes.push_back(grid.edge_node(e, 1));
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

// ---------------------------------------------------------------------------
// Fields

namespace {

void require(const MetricGrid& grid, Placement want, const VectorField& f,
             const char* op) {
  if (f.placement != want)
    throw ShapeError(std::string(op) + ": expected " + to_string(want) +
                     " field, got " + to_string(f.placement));
  int n = grid.size(want) * (want == Placement::Node ? 3 : 1);
  if (f.values.size() != n) throw ShapeError(std::string(op) + ": field length mismatch");
}

void require(const MetricGrid& grid, Placement want, const ScalarField& f,
             const char* op) {
  if (f.placement != want)
    throw ShapeError(std::string(op) + ": expected " + to_string(want) +
                     " field, got " + to_string(f.placement));
  if (f.values.size() != grid.size(want))
    throw ShapeError(std::string(op) + ": field length mismatch");
}

}  // namespace

ScalarField sample_scalar(const MetricGrid& grid, Placement p,
                          const std::function<double(const Eigen::Vector3d&)>& fn) {
  ScalarField out{p, Vec(grid.size(p))};
  for (int i = 0; i < grid.size(p); ++i) out.values[i] = fn(grid.position(p, i));
  return out;
}

VectorField sample_vector(const MetricGrid& grid, Placement p,
                          const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& fn) {
  VectorField out{p, {}};
  switch (p) {
    case Placement::Node:
      out.values.resize(3 * grid.num_nodes());
      for (int n = 0; n < grid.num_nodes(); ++n)
        out.values.segment<3>(3 * n) = fn(grid.node_position(n));
      break;
    case Placement::Edge:
      out.values.resize(grid.num_edges());
      for (int e = 0; e < grid.num_edges(); ++e) {
        Eigen::Vector3d v = grid.edge_metric(e) * fn(grid.edge_midpoint(e));
        out.values[e] = v[grid.edge_at(e).dir];
      }
      break;
    case Placement::Face:
      out.values.resize(grid.num_faces());
      for (int f = 0; f < grid.num_faces(); ++f)
        out.values[f] = fn(grid.face_center(f))[grid.face_at(f).dir];
      break;
    case Placement::Cell:
      throw ShapeError("vector fields are not cell-placed");
  }
  return out;
}

VectorField curl(const MetricGrid& grid, const VectorField& field) {
  require(grid, Placement::Edge, field, "curl");
  return {Placement::Face, grid.curl_op() * field.values};
}

ScalarField div(const MetricGrid& grid, const VectorField& field) {
  require(grid, Placement::Face, field, "div");
  return {Placement::Cell, grid.div_op() * field.values};
}

VectorField grad(const MetricGrid& grid, const ScalarField& phi) {
  require(grid, Placement::Node, phi, "grad");
  return {Placement::Edge, grid.grad_op() * phi.values};
}

VectorField curl_dual(const MetricGrid& grid, const VectorField& field) {
  require(grid, Placement::Face, field, "curl_dual");
  Vec weighted = grid.face_mass().cwiseProduct(field.values);
  Vec out = grid.curl_op().transpose() * weighted;
  return {Placement::Edge, out.cwiseQuotient(grid.edge_mass())};
}

ScalarField div_dual(const MetricGrid& grid, const VectorField& field) {
  require(grid, Placement::Edge, field, "div_dual");
  Vec weighted = grid.edge_mass().cwiseProduct(field.values);
  Vec out = -(grid.grad_op().transpose() * weighted);
  return {Placement::Node, out.cwiseQuotient(grid.node_mass())};
}

VectorField vector_product(const MetricGrid& grid, const VectorField& u,
                           const VectorField& v) {
  require(grid, Placement::Node, u, "vector_product");
  require(grid, Placement::Node, v, "vector_product");
  VectorField out{Placement::Node, Vec(u.values.size())};
  for (int n = 0; n < grid.num_nodes(); ++n) {
    const Eigen::Matrix3d& g = grid.metric(n);
    Eigen::Vector3d a = g * u.values.segment<3>(3 * n);
    Eigen::Vector3d b = g * v.values.segment<3>(3 * n);
    out.values.segment<3>(3 * n) = a.cross(b) / std::sqrt(g.determinant());
  }
  return out;
}

ScalarField metric_inner(const MetricGrid& grid, const VectorField& u,
                         const VectorField& v) {
  require(grid, Placement::Node, u, "metric_inner");
  require(grid, Placement::Node, v, "metric_inner");
  ScalarField out{Placement::Node, Vec(grid.num_nodes())};
  for (int n = 0; n < grid.num_nodes(); ++n)
    out.values[n] = u.values.segment<3>(3 * n).dot(grid.metric(n) * v.values.segment<3>(3 * n));
  return out;
}

double inner(const MetricGrid& grid, Placement p, const Vec& a, const Vec& b) {
  const Vec& m = grid.mass(p);
  if (a.size() != m.size() || b.size() != m.size())
    throw ShapeError("inner: length mismatch for " + to_string(p) + " placement");
  return (a.array() * b.array() * m.array()).sum();
}

VectorField collocate_lower(const MetricGrid& grid, const VectorField& field) {
  VectorField out{Placement::Node, Vec::Zero(3 * grid.num_nodes())};
  if (field.placement == Placement::Edge) {
    require(grid, Placement::Edge, field, "collocate_lower");
    for (int e = 0; e < grid.num_edges(); ++e) {
      auto ei = grid.edge_at(e);
      int n = grid.node_index(ei.at.i, ei.at.j, ei.at.k);
      // covariant -> contravariant using the diagonal of the inverse metric
      out.values[3 * n + ei.dir] = grid.metric(n).inverse()(ei.dir, ei.dir) * field.values[e];
    }
  } else if (field.placement == Placement::Face) {
    require(grid, Placement::Face, field, "collocate_lower");
    for (int f = 0; f < grid.num_faces(); ++f) {
      auto fi = grid.face_at(f);
      int n = grid.node_index(fi.at.i, fi.at.j, fi.at.k);
      out.values[3 * n + fi.dir] = field.values[f];
    }
  } else {
    throw ShapeError("collocate_lower: edge or face field required");
  }
  return out;
}

Vec node_to(const MetricGrid& grid, Placement p, const Vec& node_values) {
  if (node_values.size() != grid.num_nodes()) throw ShapeError("node_to: length mismatch");
  Vec out(grid.size(p));
  switch (p) {
    case Placement::Node: return node_values;
    case Placement::Edge:
      for (int e = 0; e < grid.num_edges(); ++e)
        out[e] = 0.5 * (node_values[grid.edge_node(e, 0)] + node_values[grid.edge_node(e, 1)]);
      return out;
    case Placement::Face:
      for (int f = 0; f < grid.num_faces(); ++f) {
        auto fi = grid.face_at(f);
        const int a = (fi.dir + 1) % 3, b = (fi.dir + 2) % 3;
        double s = 0.0;
        for (int da = 0; da < 2; ++da)
          for (int db = 0; db < 2; ++db) {
            Index3 q = shifted(shifted(fi.at, a, da), b, db);
            s += node_values[grid.node_index(q.i, q.j, q.k)];
          }
        out[f] = 0.25 * s;
      }
      return out;
    case Placement::Cell:
      for (int c = 0; c < grid.num_cells(); ++c) {
        Index3 q = grid.cell_at(c);
        double s = 0.0;
        for (int dk = 0; dk < 2; ++dk)
          for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di)
              s += node_values[grid.node_index(q.i + di, q.j + dj, q.k + dk)];
        out[c] = 0.125 * s;
      }
      return out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geodesics

namespace {

using HeapItem = std::pair<double, int>;
using MinHeap = std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>>;

Vec fast_marching(const MetricGrid& grid, const std::vector<int>& seeds) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto& dims = grid.dims();
  const auto& h = grid.spacing();
  Vec tau = Vec::Constant(grid.num_nodes(), inf);
  std::vector<std::uint8_t> done(grid.num_nodes(), 0);
  MinHeap heap;
  for (int s : seeds) {
    tau[s] = 0.0;
    heap.emplace(0.0, s);
  }

  auto update = [&](int n) {
    Index3 p = grid.node_at(n);
    const Eigen::Matrix3d ginv = grid.metric(n).inverse();
    std::array<std::pair<double, double>, 3> terms;  // (neighbor value, coefficient)
    int m = 0;
    for (int d = 0; d < 3; ++d) {
      double best = inf;
      for (int by : {-1, 1}) {
        int c = comp(p, d) + by;
        if (c < 0 || c > dims[d]) continue;
        Index3 q = shifted(p, d, by);
        int nq = grid.node_index(q.i, q.j, q.k);
        if (done[nq]) best = std::min(best, tau[nq]);
      }
      if (best < inf) terms[m++] = {best, ginv(d, d) / (h[d] * h[d])};
    }
    std::sort(terms.begin(), terms.begin() + m);
    double value = inf;
    double sc = 0.0, sca = 0.0, sca2 = 0.0;
    for (int r = 0; r < m; ++r) {
      sc += terms[r].second;
      sca += terms[r].second * terms[r].first;
      sca2 += terms[r].second * terms[r].first * terms[r].first;
      double disc = sca * sca - sc * (sca2 - 1.0);
      if (disc < 0.0) break;
      double t = (sca + std::sqrt(disc)) / sc;
      if (r + 1 < m && t > terms[r + 1].first) {
        value = t;
        continue;
      }
      value = t;
      break;
    }
    if (value < tau[n]) {
      tau[n] = value;
      heap.emplace(value, n);
    }
  };

  while (!heap.empty()) {
    auto [t, n] = heap.top();
    heap.pop();
    if (done[n] || t > tau[n]) continue;
    done[n] = 1;
    Index3 p = grid.node_at(n);
    for (int d = 0; d < 3; ++d)
      for (int by : {-1, 1}) {
        int c = comp(p, d) + by;
        if (c < 0 || c > dims[d]) continue;
        Index3 q = shifted(p, d, by);
        int nq = grid.node_index(q.i, q.j, q.k);
        if (!done[nq]) update(nq);
      }
  }
  return tau;
}

Vec dijkstra26(const MetricGrid& grid, const std::vector<int>& seeds) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto& dims = grid.dims();
  const auto& h = grid.spacing();
  Vec tau = Vec::Constant(grid.num_nodes(), inf);
  MinHeap heap;
  for (int s : seeds) {
    tau[s] = 0.0;
    heap.emplace(0.0, s);
  }
  while (!heap.empty()) {
    auto [t, n] = heap.top();
    heap.pop();
    if (t > tau[n]) continue;
    Index3 p = grid.node_at(n);
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (!di && !dj && !dk) continue;
          Index3 q{p.i + di, p.j + dj, p.k + dk};
          if (q.i < 0 || q.j < 0 || q.k < 0 || q.i > dims[0] || q.j > dims[1] ||
              q.k > dims[2])
            continue;
          int nq = grid.node_index(q.i, q.j, q.k);
          Eigen::Vector3d dx{di * h[0], dj * h[1], dk * h[2]};
          Eigen::Matrix3d g = 0.5 * (grid.metric(n) + grid.metric(nq));
          double cand = t + std::sqrt(dx.dot(g * dx));
          if (cand < tau[nq]) {
            tau[nq] = cand;
            heap.emplace(cand, nq);
          }
        }
  }
  return tau;
}

}  // namespace

ScalarField geodesic_distance(const MetricGrid& grid, const BoundaryPatch& patch,
                              GeodesicMethod method) {
  if (patch.empty()) throw ConfigError("geodesic_distance: empty patch '" + patch.id + "'");
  return geodesic_from_nodes(grid, patch_nodes(grid, patch), method);
}

ScalarField geodesic_from_nodes(const MetricGrid& grid, const std::vector<int>& seeds,
                                GeodesicMethod method) {
  if (seeds.empty()) throw ConfigError("geodesic distance needs at least one seed node");
  if (method == GeodesicMethod::Auto)
    method = grid.metric_spec().is_diagonal() ? GeodesicMethod::FastMarching
                                              : GeodesicMethod::Dijkstra;
  Vec tau = method == GeodesicMethod::FastMarching ? fast_marching(grid, seeds)
                                                   : dijkstra26(grid, seeds);
  return {Placement::Node, std::move(tau)};
}

ScalarField eikonal_from_distance(const ScalarField& distance, double T) {
  if (!(T > 0.0)) throw ConfigError("eikonal: T must be positive");
  ScalarField out{distance.placement, distance.values};
  for (auto& v : out.values) v = std::max(T - v, 0.0);
  return out;
}

ScalarField eikonal_function(const MetricGrid& grid, const BoundaryPatch& patch,
                             double T) {
  return eikonal_from_distance(geodesic_distance(grid, patch), T);
}

int InfluenceMask::count() const {
  int c = 0;
  for (auto v : indicator) c += v;
  return c;
}

bool InfluenceMask::subset_of(const InfluenceMask& other) const {
  if (indicator.size() != other.indicator.size()) return false;
  for (std::size_t i = 0; i < indicator.size(); ++i)
    if (indicator[i] && !other.indicator[i]) return false;
  return true;
}

InfluenceMask influence_mask_from_distance(const BoundaryPatch& patch,
                                           const ScalarField& distance, double s) {
  InfluenceMask m{patch, s, std::vector<std::uint8_t>(distance.values.size(), 0)};
  if (s <= 0.0) return m;
  for (Eigen::Index i = 0; i < distance.values.size(); ++i)
    m.indicator[i] = distance.values[i] < s ? 1 : 0;
  return m;
}

InfluenceMask influence_mask(const MetricGrid& grid, const BoundaryPatch& patch,
                             double s) {
  if (s <= 0.0)
    return {patch, s, std::vector<std::uint8_t>(grid.num_nodes(), 0)};
  return influence_mask_from_distance(patch, geodesic_distance(grid, patch), s);
}

}  // namespace bcm
