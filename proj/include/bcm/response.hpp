#pragma once

// Discretized response operator R^{2T} and the data-side identities built on
// it: odd continuation S^T, the connecting form c^T[f, f'] =
// 1/2 ((S^T)^* R^{2T} S^T f, f'), its Gram matrix, and |W^T|.

#include "bcm/forward_solver.hpp"

#include <string>
#include <vector>

namespace bcm {

/// Uniform time lattice t_n = n dt on [0, T] with an even number of steps
/// that is also a multiple of the delay count.
struct TimeLattice {
  double T = 0.0;
  long steps = 0;  // per T
  double dt = 0.0;

  /// Trapezoid weights on [0, horizon_steps * dt].
  Vec weights(long horizon_steps) const;
};

/// Coarsest admissible lattice with dt <= courant * min(h) and
/// dt <= cfl_factor * cfl_limit. Refining the grid at fixed courant halves dt.
TimeLattice choose_lattice(const WaveSystem& sys, double T, int delays,
                           double cfl_factor, double courant);

/// S^T: f on [0, T] (steps+1 samples) -> [0, 2T] (2 steps + 1 samples).
/// Throws ConfigError for an odd step count.
Vec odd_continuation(const Vec& f);
/// Adjoint of odd_continuation for trapezoid quadrature on both lattices.
/// Acts row-wise on a (2N+1) x m record, returning (N+1) x m.
Mat odd_continuation_adjoint(const Mat& g);

struct BasisSpec {
  int delays = 8;                                // K
  std::vector<std::string> polarizations{"diag"};
  int time_order = 3;                            // C^2 temporal bumps
  int space_order = 2;
};

/// Controls f = profile(patch, polarization) x bump on the delay window
/// (T - s_k, T - s_{k-1}), s_k = k T / K. Every control vanishes at 0 and T.
struct ControlBasis {
  TimeLattice lattice;
  int delays = 0;
  std::vector<double> delay_grid;               // s_1..s_K
  std::vector<BoundaryPatch> supports;          // patches carrying controls
  std::vector<ControlSignal> controls;
  std::vector<int> support_index;               // per control
  std::vector<int> delay_index;                 // per control, 1..K
  std::vector<int> profile_index;               // per control
  int num_profiles = 0;
  Mat gram;                                     // (f_k, f_l)_{F^T}

  int size() const { return static_cast<int>(controls.size()); }
  /// Controls supported in sigma with delay <= s (sorted indices).
  std::vector<int> delayed_class(const BoundaryPatch& sigma, double s) const;
  /// Same, with delay index <= k.
  std::vector<int> delayed_class_index(const BoundaryPatch& sigma, int k) const;
  /// Smallest / largest eigenvalue of the Gram matrix.
  std::pair<double, double> gram_extremes() const;
};

ControlBasis build_basis(const WaveSystem& sys, const std::vector<BoundaryPatch>& supports,
                         const TimeLattice& lattice, const BasisSpec& spec);

/// Gram of arbitrary controls on one lattice in the F^T inner product.
Mat control_gram(const WaveSystem& sys, const std::vector<ControlSignal>& controls,
                 const Vec& time_weights);

struct ResponseMatrix {
  Mat entries;  // (R^{2T} S^T f_k, S^T f_l)_{F^{2T}}
};

struct ForwardData {
  ResponseMatrix response;
  OracleFields oracle;  // e(., T) per control, used only for verification
};

struct AssembleOptions {
  double cfl_factor = 0.9;
  int threads = 1;
  bool keep_snapshots = true;
};

/// One 2T solve per control with S^T f_k; row k from the recorded trace.
ForwardData assemble_response(const WaveSystem& sys, const ControlBasis& basis,
                              const AssembleOptions& options = {});

/// (S^T)^* applied to a single recorded trace, paired with every control.
Vec response_row(const WaveSystem& sys, const ControlBasis& basis, const Mat& trace);

double connecting_form(const ResponseMatrix& resp, int k, int l);

struct GramMatrix {
  Mat entries;            // symmetrized c^T[f_k, f_l]
  bool symmetrized = true;
  double asymmetry = 0.0; // ||C - C^T||_F / ||C||_F before averaging
};

/// Throws StageError when the asymmetry exceeds 20%.
GramMatrix gram_matrix(const ResponseMatrix& resp);

/// Oracle counterpart: (W^T f_k, W^T f_l) from interior snapshots.
Mat oracle_gram(const WaveSystem& sys, const OracleFields& oracle);

/// |W^T| in orthonormal coordinates of span{f_k}: x_hat = L^T x with
/// basis Gram = L L^T. Symmetric PSD.
struct ModelOperator {
  Mat matrix;
  Mat gram_factor;         // L (lower Cholesky factor of the basis Gram)
  int clamped = 0;         // eigenvalues clamped to zero
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

/// Generalized eigenproblem C v = lambda G v, clamp negatives, take roots.
ModelOperator sqrt_operator(const GramMatrix& C, const Mat& basis_gram);

}  // namespace bcm
