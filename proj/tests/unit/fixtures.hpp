#pragma once

#include <string>

#include "pftopo/io.hpp"

namespace fixtures {

inline std::string scenario(const std::string& name) {
  return std::string(PFTOPO_SOURCE_DIR) + "/scenarios/" + name + ".json";
}

inline std::string scratch(const std::string& name) {
  return std::string(PFTOPO_BINARY_DIR) + "/" + name;
}

// Single unit square under uniaxial strain: every node fixed in y, left edge
// fixed in x, right edge pulled in x.
inline std::string single_element(double stretch, int steps, double psi_c,
                                  const std::string& extra_material = "") {
  return R"({
    "mesh": {"dimension": 2, "counts": [1, 1], "extents": [1.0, 1.0]},
    "material": {"K": 1.0, "mu": 1.0)" + extra_material + R"(},
    "fracture": {"psi_c": )" + std::to_string(psi_c) + R"(, "l_f": 0.5, "eta_f": 1e-6},
    "regions": {
      "all": {"min": [0.0, 0.0], "max": [1.0, 1.0]},
      "left": {"min": [0.0, 0.0], "max": [0.0, 1.0]},
      "right": {"min": [1.0, 0.0], "max": [1.0, 1.0]}
    },
    "loading": {
      "dirichlet": [
        {"region": "all", "component": 1},
        {"region": "left", "component": 0},
        {"region": "right", "component": 0, "increment": )" + std::to_string(stretch) + R"(}
      ],
      "load_region": "right",
      "steps": )" + std::to_string(steps) + R"(,
      "tau_f": 1e-4
    }
  })";
}

// Small three-point bend with a brittle material.
inline std::string small_bend(int steps, double increment, const std::string& extra = "") {
  return R"({
    "mesh": {"dimension": 2, "counts": [10, 4], "extents": [5.0, 2.0]},
    "material": {"K": 17.3, "mu": 8.0},
    "fracture": {"psi_c": 5e-4, "l_f": 0.5, "eta_f": 1e-4},
    "topology": {"tau_Phi": 0.25, "target_volume": 0.6, "formulation": 2)" + extra + R"(},
    "regions": {
      "left": {"min": [0.0, 0.0], "max": [0.0, 0.0]},
      "right": {"min": [5.0, 0.0], "max": [5.0, 0.0]},
      "load": {"min": [2.0, 2.0], "max": [3.0, 2.0]}
    },
    "loading": {
      "dirichlet": [
        {"region": "left", "component": 0},
        {"region": "left", "component": 1},
        {"region": "right", "component": 1},
        {"region": "load", "component": 1, "increment": )" + std::to_string(increment) + R"(}
      ],
      "load_region": "load",
      "steps": )" + std::to_string(steps) + R"(,
      "tau_f": 1e-4
    }
  })";
}

}  // namespace fixtures
