#pragma once

// Stage drivers behind the command line. Each stage has a pure in-memory
// form and a file form that reads and writes one output directory.
//
// Reconstruction only ever receives the response matrix plus the control
// basis (boundary-side information); snapshot data is reachable only from
// the forward and verify stages.

#include "bcm/algebra.hpp"
#include "bcm/config.hpp"
#include "bcm/reconstruction.hpp"

#include <memory>

namespace bcm {

/// Grid, wave system, lattice, control basis and eikonal patch family for
/// one configuration. Pinned in memory: the system refers to the grid.
class Problem {
 public:
  explicit Problem(const RunConfig& config);
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  RunConfig config;
  std::string hash;
  MetricGrid grid;
  WaveSystem sys;
  TimeLattice lattice;
  ControlBasis basis;
  std::vector<BoundaryPatch> family;  // eikonal / ground-truth patches
};

BasisSpec basis_spec(const RunConfig& c);

// -- forward ----------------------------------------------------------------

ForwardData forward(const Problem& p);
/// Writes response.bcm, snapshots.bcm, manifest.json.
ForwardData run_forward(const Problem& p, const std::string& dir);

// -- reconstruct -------------------------------------------------------------

struct Reconstruction {
  GramMatrix gram;
  ModelOperator w;
  std::vector<SubspaceChain> chains;
  OperatorFamily family;
  JointDiagonalization jd;
  SpectrumCloud cloud;
};

/// R^{2T} => |W| => reachable chains => eikonals => joint diagonalization.
Reconstruction reconstruct(const Problem& p, const ResponseMatrix& response, double eps_rank,
                           bool diagonalize = true);
/// Model eikonal family only, no diagonalization.
OperatorFamily model_eikonals(const Problem& p, const ModelOperator& w, double eps_rank,
                              std::vector<SubspaceChain>* chains = nullptr);

/// Reads response.bcm (config hash must match); writes cloud.csv, cloud.bcm,
/// model_operator.bcm, eikonals.bcm, reconstruct.json.
Reconstruction run_reconstruct(const Problem& p, const std::string& dir);

ResponseMatrix load_response(const Problem& p, const std::string& dir);
OracleFields load_snapshots(const Problem& p, const std::string& dir);

// -- verify ------------------------------------------------------------------

struct Criterion {
  std::string name;
  bool pass = false;
  nlohmann::json measured;
};

struct VerifyReport {
  std::vector<Criterion> criteria;
  nlohmann::json details;
  bool all_pass() const;
  nlohmann::json to_json() const;
};

/// Every oracle-side audit for one configuration.
VerifyReport verify(const Problem& p, const ForwardData& data, const Reconstruction& rec);
/// Reads forward and reconstruct outputs; writes report.json,
/// ground_truth.csv, commutators.csv, defects.csv.
VerifyReport run_verify(const Problem& p, const std::string& dir);

/// Blagoveshchenskii relative Frobenius error of the data-side Gram.
double blagoveshchenskii_error(const Problem& p, const ForwardData& data);

/// max |div e| over interior nodes of each snapshot, divided by max|e| / h.
double solenoidality(const Problem& p, const OracleFields& oracle);

// -- oracle utilities ---------------------------------------------------------

/// Writes distances.csv (node i,j,k + one column per patch + boundary) and
/// ground_truth.csv in the cloud schema.
void run_oracle(const Problem& p, const std::string& dir);

std::vector<std::string> cloud_columns(const std::vector<std::string>& labels);
Mat cloud_rows(const Mat& points, const Vec& weights, double residual);

}  // namespace bcm
