#include "bcm/config.hpp"

#include <cstdio>
#include <fstream>

namespace bcm {

using nlohmann::json;

std::array<double, 3> RunConfig::spacing() const {
  return {extent[0] / dims[0], extent[1] / dims[1], extent[2] / dims[2]};
}

double RunConfig::h() const {
  auto s = spacing();
  return std::max({s[0], s[1], s[2]});
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const char* kKnownKeys[] = {"dims", "extent", "metric", "mode", "T", "delays", "control_tiles",
                            "polarizations", "time_order", "space_order", "patch_family",
                            "cfl_factor", "courant", "eps_rank", "jd_tol", "jd_max_sweeps",
                            "jd_warm_start", "separation_samples", "defect_samples",
                            "eps_sweep", "blagoveshchenskii_tol", "hausdorff_factor",
                            "output_dir", "seed", "threads"};

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown config key '" + it.key() + "'");
  }
  RunConfig c;
  read(j, "dims", c.dims);
  read(j, "extent", c.extent);
  if (j.contains("metric")) {
    const json& m = j.at("metric");
    if (!m.is_object()) throw ConfigError("config key 'metric' must be an object");
    read(m, "name", c.metric.name);
    read(m, "amplitude", c.metric.amplitude);
    read(m, "axis", c.metric.axis);
    read(m, "frequency", c.metric.frequency);
  }
  read(j, "mode", c.mode);
  read(j, "T", c.T);
  read(j, "delays", c.delays);
  read(j, "control_tiles", c.control_tiles);
  read(j, "polarizations", c.polarizations);
  read(j, "time_order", c.time_order);
  read(j, "space_order", c.space_order);
  read(j, "patch_family", c.patch_family);
  read(j, "cfl_factor", c.cfl_factor);
  read(j, "courant", c.courant);
  read(j, "eps_rank", c.eps_rank);
  read(j, "jd_tol", c.jd_tol);
  read(j, "jd_max_sweeps", c.jd_max_sweeps);
  read(j, "jd_warm_start", c.jd_warm_start);
  read(j, "separation_samples", c.separation_samples);
  read(j, "defect_samples", c.defect_samples);
  read(j, "eps_sweep", c.eps_sweep);
  read(j, "blagoveshchenskii_tol", c.blagoveshchenskii_tol);
  read(j, "hausdorff_factor", c.hausdorff_factor);
  read(j, "output_dir", c.output_dir);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  validate_config(c);
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["dims"] = c.dims;
  j["extent"] = c.extent;
  j["metric"] = {{"name", c.metric.name},
                 {"amplitude", c.metric.amplitude},
                 {"axis", c.metric.axis},
                 {"frequency", c.metric.frequency}};
  j["mode"] = c.mode;
  j["T"] = c.T;
  j["delays"] = c.delays;
  j["control_tiles"] = c.control_tiles;
  j["polarizations"] = c.polarizations;
  j["time_order"] = c.time_order;
  j["space_order"] = c.space_order;
  j["patch_family"] = c.patch_family;
  j["cfl_factor"] = c.cfl_factor;
  j["courant"] = c.courant;
  j["eps_rank"] = c.eps_rank;
  j["jd_tol"] = c.jd_tol;
  j["jd_max_sweeps"] = c.jd_max_sweeps;
  j["jd_warm_start"] = c.jd_warm_start;
  j["separation_samples"] = c.separation_samples;
  j["defect_samples"] = c.defect_samples;
  j["eps_sweep"] = c.eps_sweep;
  j["blagoveshchenskii_tol"] = c.blagoveshchenskii_tol;
  j["hausdorff_factor"] = c.hausdorff_factor;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const RunConfig& c) {
  for (int d : c.dims)
    if (d < 4) throw ConfigError("dims must be >= 4 per axis");
  for (double e : c.extent)
    if (!(e > 0.0)) throw ConfigError("extent must be positive");
  if (c.mode != "maxwell" && c.mode != "scalar")
    throw ConfigError("mode must be 'maxwell' or 'scalar'");
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  if (c.delays < 1) throw ConfigError("delays must be >= 1");
  if (c.control_tiles < 1) throw ConfigError("control_tiles must be >= 1");
  for (int d : c.dims)
    if (d % c.control_tiles || d % 2)
      throw ConfigError("dims must be even and divisible by control_tiles");
  if (c.control_tiles % 2)
    throw ConfigError("control_tiles must be even so control supports nest in quarter patches");
  if (c.polarizations.empty()) throw ConfigError("polarizations must not be empty");
  for (const auto& p : c.polarizations) polarization_from_string(p);
  if (c.time_order < 1 || c.space_order < 1) throw ConfigError("bump orders must be >= 1");
  if (c.patch_family != "default" && c.patch_family != "faces")
    throw ConfigError("patch_family must be 'default' or 'faces'");
  if (!(c.cfl_factor > 0.0) || c.cfl_factor > 1.0)
    throw ConfigError("cfl_factor must lie in (0, 1]");
  if (!(c.courant > 0.0)) throw ConfigError("courant must be positive");
  if (!(c.eps_rank > 0.0) || !(c.jd_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (c.jd_max_sweeps < 0) throw ConfigError("jd_max_sweeps must be >= 0");
  if (c.separation_samples < 0 || c.defect_samples < 0)
    throw ConfigError("sample counts must be >= 0");
  for (double e : c.eps_sweep)
    if (!(e > 0.0)) throw ConfigError("eps_sweep entries must be positive");
  if (!(c.blagoveshchenskii_tol > 0.0) || !(c.hausdorff_factor > 0.0))
    throw ConfigError("acceptance tolerances must be positive");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace bcm
