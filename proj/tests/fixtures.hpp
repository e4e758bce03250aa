#pragma once

// Small shared problems, built once per test binary.

#include "bcm/pipeline.hpp"

namespace fixtures {

inline bcm::RunConfig small_config(const std::string& mode = "maxwell") {
  bcm::RunConfig c;
  c.dims = {8, 8, 8};
  c.T = 0.3;
  c.delays = 4;
  c.mode = mode;
  c.separation_samples = 50;
  c.defect_samples = 5;
  return c;
}

struct Small {
  bcm::Problem problem;
  bcm::ForwardData data;
  explicit Small(const bcm::RunConfig& c) : problem(c), data(bcm::forward(problem)) {}
};

inline const Small& maxwell() {
  static const Small s(small_config());
  return s;
}

inline const Small& scalar() {
  static const Small s(small_config("scalar"));
  return s;
}

}  // namespace fixtures
