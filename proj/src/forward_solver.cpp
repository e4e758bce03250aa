#include "bcm/forward_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bcm {

std::string to_string(WaveMode m) { return m == WaveMode::Maxwell ? "maxwell" : "scalar"; }

WaveMode wave_mode_from_string(const std::string& s) {
  if (s == "maxwell") return WaveMode::Maxwell;
  if (s == "scalar") return WaveMode::Scalar;
  throw ConfigError("unknown mode '" + s + "' (expected maxwell or scalar)");
}

WaveSystem::WaveSystem(const MetricGrid& grid, WaveMode mode) : grid_(&grid), mode_(mode) {
  if (mode == WaveMode::Maxwell) {
    k_ = grid.curl_op();
    mp_ = grid.edge_mass();
    mq_ = grid.face_mass();
    bdofs_ = grid.boundary_edges();
    bweight_ = grid.boundary_edge_weight();
  } else {
    k_ = grid.grad_op();
    mp_ = grid.node_mass();
    mq_ = grid.edge_mass();
    bdofs_ = grid.boundary_nodes();
    bweight_ = grid.boundary_node_weight();
  }
  inv_mp_ = mp_.cwiseInverse();
  kt_mq_ = SpMat(k_.transpose()) * mq_.asDiagonal();
  bslot_.assign(mp_.size(), -1);
  for (std::size_t s = 0; s < bdofs_.size(); ++s) bslot_[bdofs_[s]] = static_cast<int>(s);

  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t s = 0; s < bdofs_.size(); ++s) {
    const int dof = bdofs_[s];
    for (SpMat::InnerIterator it(kt_mq_, dof); it; ++it)
      trips.emplace_back(static_cast<int>(s), static_cast<int>(it.col()),
                         -it.value() / bweight_[s]);
  }
  trace_op_.resize(static_cast<Eigen::Index>(bdofs_.size()), mq_.size());
  trace_op_.setFromTriplets(trips.begin(), trips.end());
}

Placement WaveSystem::primary_placement() const {
  return mode_ == WaveMode::Maxwell ? Placement::Edge : Placement::Node;
}

Placement WaveSystem::secondary_placement() const {
  return mode_ == WaveMode::Maxwell ? Placement::Face : Placement::Edge;
}

double WaveSystem::cfl_limit() const {
  return grid_->min_spacing() / std::sqrt(3.0 * grid_->max_inverse_metric_eigenvalue());
}

Vec WaveSystem::adjoint_apply(const Vec& q) const {
  return inv_mp_.cwiseProduct(kt_mq_ * q);
}

WaveState zero_state(const WaveSystem& sys, double dt) {
  return {Vec::Zero(sys.primary_size()), Vec::Zero(sys.secondary_size()), 0, dt};
}

void check_cfl(const WaveSystem& sys, double dt, double cfl_factor) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const double limit = cfl_factor * sys.cfl_limit();
  if (dt > limit)
    throw ConfigError("time step " + std::to_string(dt) + " violates CFL bound " +
                      std::to_string(limit));
}

void step(const WaveSystem& sys, WaveState& state, const ControlSignal* control) {
  const double dt = state.dt;
  state.q.noalias() -= dt * (sys.coupling() * state.p);
  state.p += dt * sys.adjoint_apply(state.q);
  for (int dof : sys.boundary_dofs()) state.p[dof] = 0.0;
  ++state.step;
  if (control) {
    const double a = control->amplitude(state.step);
    if (a != 0.0)
      for (std::size_t i = 0; i < control->dofs.size(); ++i)
        state.p[control->dofs[i]] = a * control->spatial[static_cast<Eigen::Index>(i)];
  }
  if (!state.p.allFinite())
    throw InstabilityError("non-finite field at step " + std::to_string(state.step),
                           state.step);
}

double energy(const WaveSystem& sys, const WaveState& state) {
  Vec q_next = state.q - state.dt * (sys.coupling() * state.p);
  double ep = (state.p.array().square() * sys.primary_mass().array()).sum();
  double eq = (state.q.array() * q_next.array() * sys.secondary_mass().array()).sum();
  return 0.5 * (ep + eq);
}

SolveResult solve(const WaveSystem& sys, const ControlSignal& control, long steps,
                  const SolveOptions& options) {
  check_cfl(sys, control.dt, options.cfl_factor);
  for (int dof : control.dofs)
    if (sys.boundary_slot(dof) < 0)
      throw ConfigError("control acts on an interior dof " + std::to_string(dof));
  if (control.spatial.size() != static_cast<Eigen::Index>(control.dofs.size()))
    throw ShapeError("control spatial profile length mismatch");

  SolveResult out;
  WaveState state = zero_state(sys, control.dt);
  // Initial boundary value (normally zero: controls vanish near t = 0).
  if (const double a = control.amplitude(0); a != 0.0)
    for (std::size_t i = 0; i < control.dofs.size(); ++i)
      state.p[control.dofs[i]] = a * control.spatial[static_cast<Eigen::Index>(i)];
  if (options.observer) options.observer(state);

  Mat half;  // r^{n+1/2}, n = 0..steps
  if (options.record_trace) half.resize(steps + 1, sys.num_boundary_dofs());
  for (long n = 0; n < steps; ++n) {
    try {
      step(sys, state, &control);
    } catch (const InstabilityError& e) {
      throw InstabilityError(std::string(e.what()) + " (control " +
                                 std::to_string(control.tag) + ")",
                             e.step());
    }
    if (options.record_trace) half.row(n) = sys.trace(state.q).transpose();
    if (options.observer) options.observer(state);
  }
  if (options.record_trace) {
    Vec q_last = state.q - state.dt * (sys.coupling() * state.p);
    half.row(steps) = sys.trace(q_last).transpose();
    out.trace.resize(steps + 1, sys.num_boundary_dofs());
    out.trace.row(0) = 0.5 * half.row(0);
    for (long n = 1; n <= steps; ++n) out.trace.row(n) = 0.5 * (half.row(n - 1) + half.row(n));
  }
  out.final_state = std::move(state);
  return out;
}

SolveResult solve_wave(const WaveSystem& sys, const ControlSignal& control, long steps,
                       const SolveOptions& options) {
  if (sys.mode() != WaveMode::Scalar) throw ConfigError("solve_wave needs a scalar system");
  return solve(sys, control, steps, options);
}

Mat response_trace(const WaveSystem& sys, const ControlSignal& control, long steps,
                   double cfl_factor) {
  SolveOptions opt;
  opt.record_trace = true;
  opt.cfl_factor = cfl_factor;
  return solve(sys, control, steps, opt).trace;
}

// ---------------------------------------------------------------------------

double poly_bump(double t, double a, double b, int order) {
  if (!(t > a) || !(t < b)) return 0.0;
  const double x = (2.0 * t - a - b) / (b - a);
  return std::pow(1.0 - x * x, order);
}

Vec sample_bump(double a, double b, int order, double dt, long steps) {
  Vec out(steps + 1);
  for (long n = 0; n <= steps; ++n) out[n] = poly_bump(dt * static_cast<double>(n), a, b, order);
  return out;
}

Polarization polarization_from_string(const std::string& s) {
  if (s == "a") return Polarization::AxisA;
  if (s == "b") return Polarization::AxisB;
  if (s == "diag") return Polarization::Diagonal;
  if (s == "anti") return Polarization::AntiDiagonal;
  throw ConfigError("unknown polarization '" + s + "' (a, b, diag, anti)");
}

std::string to_string(Polarization p) {
  switch (p) {
    case Polarization::AxisA: return "a";
    case Polarization::AxisB: return "b";
    case Polarization::Diagonal: return "diag";
    case Polarization::AntiDiagonal: return "anti";
  }
  return "?";
}

std::pair<std::vector<int>, Vec> spatial_profile(const WaveSystem& sys,
                                                 const BoundaryPatch& patch,
                                                 Polarization pol, int order) {
  const MetricGrid& grid = sys.grid();
  if (patch.empty()) throw ConfigError("spatial_profile: empty patch");
  const int side = side_of_face(grid, patch.faces.front());
  for (int f : patch.faces)
    if (side_of_face(grid, f) != side)
      throw ConfigError("spatial_profile: patch '" + patch.id + "' spans several sides");
  const int axis = side / 2, a = (axis + 1) % 3, b = (axis + 2) % 3;

  double lo[3] = {std::numeric_limits<double>::max(), 0, 0};
  double hi[3] = {std::numeric_limits<double>::lowest(), 0, 0};
  lo[1] = lo[2] = lo[0];
  hi[1] = hi[2] = hi[0];
  for (int f : patch.faces) {
    Eigen::Vector3d c = grid.face_center(f);
    for (int d : {a, b}) {
      lo[d] = std::min(lo[d], c[d] - 0.5 * grid.spacing()[d]);
      hi[d] = std::max(hi[d], c[d] + 0.5 * grid.spacing()[d]);
    }
  }
  auto psi = [&](const Eigen::Vector3d& x) {
    double v = 1.0;
    for (int d : {a, b}) {
      double s = (2.0 * x[d] - lo[d] - hi[d]) / (hi[d] - lo[d]);
      if (std::abs(s) >= 1.0) return 0.0;
      v *= std::pow(1.0 - s * s, order);
    }
    return v;
  };

  std::vector<int> dofs;
  std::vector<double> vals;
  if (sys.mode() == WaveMode::Scalar) {
    for (int n : patch_nodes(grid, patch)) {
      double v = psi(grid.node_position(n));
      if (v != 0.0) {
        dofs.push_back(n);
        vals.push_back(v);
      }
    }
  } else {
    Eigen::Vector3d dir = Eigen::Vector3d::Zero();
    switch (pol) {
      case Polarization::AxisA: dir[a] = 1.0; break;
      case Polarization::AxisB: dir[b] = 1.0; break;
      case Polarization::Diagonal: dir[a] = dir[b] = std::sqrt(0.5); break;
      case Polarization::AntiDiagonal:
        dir[a] = std::sqrt(0.5);
        dir[b] = -std::sqrt(0.5);
        break;
    }
    for (int e : patch_edges(grid, patch)) {
      const Eigen::Vector3d x = grid.edge_midpoint(e);
      const double v = psi(x);
      if (v == 0.0) continue;
      Eigen::Vector3d cov = grid.edge_metric(e) * (v * dir);
      const double c = cov[grid.edge_at(e).dir];
      if (c != 0.0) {
        dofs.push_back(e);
        vals.push_back(c);
      }
    }
  }
  return {dofs, Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()))};
}

}  // namespace bcm
