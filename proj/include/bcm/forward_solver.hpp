#pragma once

// Leapfrog time stepping for the boundary-controlled Maxwell system
//   e_t = curl h,  h_t = -curl e,  e_tangential|_Gamma = f,
// and for the scalar baseline u_tt = Laplace_g u with Dirichlet control,
// written in first-order form u_t = div v, v_t = grad u.
//
// Both share one staggered structure: a boundary-controlled primary field p
// (edges or nodes) and a secondary field q (faces or edges) coupled through
// a sparse operator K and its Hodge adjoint:
//   q^{n+1/2} = q^{n-1/2} - dt K p^n
//   p^{n+1}   = p^n + dt Mp^{-1} K^T Mq q^{n+1/2}       (interior dofs)
//   p^{n+1}   = f(t_{n+1})                                (boundary dofs)
// For Maxwell p = e, q = h, K = curl. For the scalar wave p = u, q = -v,
// K = grad.

#include "bcm/manifold.hpp"

#include <functional>
#include <optional>

namespace bcm {

enum class WaveMode { Maxwell, Scalar };

std::string to_string(WaveMode m);
WaveMode wave_mode_from_string(const std::string& s);

class WaveSystem {
 public:
  WaveSystem(const MetricGrid& grid, WaveMode mode);

  const MetricGrid& grid() const { return *grid_; }
  WaveMode mode() const { return mode_; }
  Placement primary_placement() const;
  Placement secondary_placement() const;

  int primary_size() const { return static_cast<int>(mp_.size()); }
  int secondary_size() const { return static_cast<int>(mq_.size()); }
  const SpMat& coupling() const { return k_; }
  const Vec& primary_mass() const { return mp_; }
  const Vec& secondary_mass() const { return mq_; }

  /// Controlled boundary dofs of the primary field (sorted), their surface
  /// quadrature weights, and the slot of a dof in that list (-1 if interior).
  const std::vector<int>& boundary_dofs() const { return bdofs_; }
  const Vec& boundary_weight() const { return bweight_; }
  int boundary_slot(int dof) const { return bslot_[dof]; }
  int num_boundary_dofs() const { return static_cast<int>(bdofs_.size()); }

  /// Largest stable step: min(h) / sqrt(3 lambda_max(g^{-1})).
  double cfl_limit() const;

  /// Boundary trace -(K^T Mq q)_B / w_B. For Maxwell this is -nu x h along
  /// each boundary edge, taken from the first interior face layer.
  Vec trace(const Vec& q) const { return trace_op_ * q; }

  /// Hodge-adjoint update direction Mp^{-1} K^T Mq q.
  Vec adjoint_apply(const Vec& q) const;

 private:
  const MetricGrid* grid_;
  WaveMode mode_;
  SpMat k_;
  SpMat kt_mq_;
  Vec mp_, mq_, inv_mp_;
  std::vector<int> bdofs_;
  std::vector<int> bslot_;
  Vec bweight_;
  SpMat trace_op_;
};

/// Boundary control f(x, t) = spatial(x) * temporal(t) on a set of
/// primary boundary dofs. temporal is sampled on the lattice t_n = n dt.
struct ControlSignal {
  BoundaryPatch patch;
  std::vector<int> dofs;  // primary-field boundary dofs (sorted)
  Vec spatial;            // one value per dof
  Vec temporal;           // samples at n = 0..temporal.size()-1
  double dt = 0.0;
  double delay = 0.0;     // support in (T - delay, T]; 0 means unset
  int tag = -1;           // index inside its basis, or -1

  double amplitude(long step) const {
    return step >= 0 && step < temporal.size() ? temporal[step] : 0.0;
  }
  double horizon() const { return dt * static_cast<double>(temporal.size() - 1); }
};

/// State at integer step n: p^n and q^{n-1/2}.
struct WaveState {
  Vec p;
  Vec q;
  long step = 0;
  double dt = 0.0;
  double time() const { return dt * static_cast<double>(step); }
};
using MaxwellState = WaveState;

WaveState zero_state(const WaveSystem& sys, double dt);

/// Throws ConfigError when dt exceeds cfl_factor * cfl_limit().
void check_cfl(const WaveSystem& sys, double dt, double cfl_factor = 0.9);

/// One leapfrog step with the control value at t_{n+1} written into the
/// boundary dofs. A null control holds all boundary dofs at zero.
void step(const WaveSystem& sys, WaveState& state, const ControlSignal* control);

/// 1/2 (||p^n||^2 + (q^{n-1/2}, q^{n+1/2})), the quadratic form leapfrog
/// conserves exactly when the boundary is held at zero.
double energy(const WaveSystem& sys, const WaveState& state);

struct SolveOptions {
  bool record_trace = false;
  double cfl_factor = 0.9;
  /// Called after every step (and once for the initial state).
  std::function<void(const WaveState&)> observer;
};

struct SolveResult {
  WaveState final_state;
  /// rows: t_n, n = 0..steps; cols: boundary dofs. Empty unless requested.
  /// Integer-time values are the average of the two adjacent half steps.
  Mat trace;
};

/// Zero initial data, `steps` leapfrog steps of size control.dt.
SolveResult solve(const WaveSystem& sys, const ControlSignal& control, long steps,
                  const SolveOptions& options = {});

/// Convenience for the scalar baseline; same as solve() on a Scalar system.
SolveResult solve_wave(const WaveSystem& sys, const ControlSignal& control, long steps,
                       const SolveOptions& options = {});

/// Boundary record of the response to control over `steps` steps.
Mat response_trace(const WaveSystem& sys, const ControlSignal& control, long steps,
                   double cfl_factor = 0.9);

// ---------------------------------------------------------------------------
// Control shapes

/// C^{order-1} polynomial bump (1 - x^2)^order on the open window (a, b).
double poly_bump(double t, double a, double b, int order);

/// Samples of poly_bump on t_n = n dt, n = 0..steps.
Vec sample_bump(double a, double b, int order, double dt, long steps);

enum class Polarization { AxisA, AxisB, Diagonal, AntiDiagonal };
Polarization polarization_from_string(const std::string& s);
std::string to_string(Polarization p);

/// Smooth tangential profile vanishing on the patch perimeter. The patch
/// must lie on a single side of the box. For a Scalar system the
/// polarization is ignored and the profile lives on boundary nodes.
std::pair<std::vector<int>, Vec> spatial_profile(const WaveSystem& sys,
                                                 const BoundaryPatch& patch,
                                                 Polarization pol, int order);

/// Interior snapshot e(., T) (or u(., T)) per basis control.
struct OracleFields {
  Mat snapshots;             // primary dofs x controls
  std::vector<int> control;  // tag of the producing control per column
  std::vector<std::string> patch_ids;
  std::vector<double> delays;
};

}  // namespace bcm
