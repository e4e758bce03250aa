#pragma once

// Run configuration: one JSON document, every default written back out so
// manifests are self-describing.

#include "bcm/response.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace bcm {

struct RunConfig {
  std::array<int, 3> dims{16, 16, 16};
  std::array<double, 3> extent{1.0, 1.0, 1.0};
  MetricSpec metric;
  std::string mode = "maxwell";

  double T = 0.4;
  int delays = 8;
  /// Control supports: each side cut into control_tiles x control_tiles.
  int control_tiles = 2;
  std::vector<std::string> polarizations{"diag"};
  int time_order = 3;
  int space_order = 2;
  /// Patch family used for eikonals and ground truth: "default" (6 faces +
  /// 4 quarters per face) or "faces".
  std::string patch_family = "default";

  double cfl_factor = 0.9;
  double courant = 0.2;
  double eps_rank = 1e-6;
  double jd_tol = 1e-6;
  int jd_max_sweeps = 200;
  bool jd_warm_start = true;

  // verify
  int separation_samples = 500;
  int defect_samples = 20;
  std::vector<double> eps_sweep{1e-4, 1e-6, 1e-8};
  double blagoveshchenskii_tol = 0.05;
  double hausdorff_factor = 3.0;  // in units of h

  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  std::array<double, 3> spacing() const;
  double h() const;  // max spacing
};

RunConfig config_from_json(const nlohmann::json& j);
/// Full document including defaults.
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::string& path);

/// Checks tolerances, sizes and the even-steps requirement. Throws ConfigError.
void validate_config(const RunConfig& c);

/// FNV-1a 64 of the canonical JSON of every field that affects results
/// (output_dir and threads excluded), as 16 hex digits.
std::string config_hash(const RunConfig& c);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace bcm
