#pragma once

// Finite-dimensional algebra diagnostics for eikonal families: commutator
// and compact-defect profiles, generated-family closure, and joint
// approximate diagonalization turning the family into a point cloud.

#include "bcm/model_space.hpp"

#include <cstdint>

namespace bcm {

struct OperatorFamily {
  std::vector<Mat> members;
  std::vector<std::string> labels;
  std::string space = "model";  // or "oracle"

  int size() const { return static_cast<int>(members.size()); }
  /// labels[i], or "a<i>" for unlabeled families.
  std::string label(int i) const {
    return i < static_cast<int>(labels.size()) ? labels[i] : "a" + std::to_string(i);
  }
  Eigen::Index dimension() const { return members.empty() ? 0 : members.front().rows(); }
  /// Throws ShapeError on ragged or non-symmetric (1e-12) members, or when
  /// labels are given but not one per member.
  void validate() const;
};

struct CommutatorProfile {
  Mat normalized;  // ||[A_i, A_j]||_2 / (||A_i|| ||A_j||)
  std::vector<std::pair<int, int>> pairs;
  std::vector<Vec> singular_values;  // per pair (i < j), descending
  double max_normalized() const;
  double mean_normalized() const;
};

CommutatorProfile commutator_profile(const OperatorFamily& family, bool keep_singular_values = true);

struct DefectReport {
  std::string patch_id;
  Vec singular_values;   // of I[sigma] - E[tau~[sigma]], descending
  int k0 = -1;           // first index with s_k / s_1 <= 0.1 for all later k
  double identity_residual = 0.0;   // max over samples of residual / (ds ||y||)
  double curl_ratio = 0.0;          // max ||curl K_sigma^T u|| / ||u||
  int samples = 0;
};

/// Oracle-side defect D = I^T[sigma] - E^T[tau~^T[sigma]] and the
/// quadrature identity (tau~ - I) y = sum ds (X^{s_k} - E^{s_k}) y on
/// `samples` random oracle fields.
DefectReport compact_defect(const WaveSystem& sys, const OracleSpace& space,
                            const ControlBasis& basis, const BoundaryPatch& sigma,
                            double eps_rank, int samples, std::uint64_t seed);

/// All symmetrized words of length <= degree_max plus the identity,
/// de-duplicated by relative Frobenius distance 1e-12.
OperatorFamily algebra_closure(const OperatorFamily& family, int degree_max);

struct JointDiagonalization {
  Mat basis;                    // orthogonal, columns = common eigenvectors
  Mat diagonals;                // dim x m: member i diagonal in column i
  double residual = 0.0;        // off-diagonal energy / total energy
  bool converged = false;
  int sweeps = 0;
  std::vector<double> energy;   // off-diagonal energy after each sweep
};

/// Cardoso-Souloumiac Jacobi sweeps. Stops when the relative off-diagonal
/// energy drops below tol, when a sweep no longer changes the energy, or after
/// max_sweeps. warm_start begins from the eigenbasis of a generic linear
/// combination of the members.
JointDiagonalization joint_diagonalize(const OperatorFamily& family, double tol = 1e-6,
                                       int max_sweeps = 200, bool warm_start = false);

struct SpectrumCloud {
  Mat points;     // count x m
  Vec weights;
  double residual = 0.0;
  bool converged = false;
  std::vector<std::string> labels;
};

/// Joint diagonalization, coordinates clamped to [0, T].
SpectrumCloud spectrum_cloud(const OperatorFamily& family, double T, double tol = 1e-6,
                             int max_sweeps = 200, bool warm_start = false);
SpectrumCloud spectrum_cloud(const JointDiagonalization& jd, const OperatorFamily& family,
                             double T);

}  // namespace bcm
