#pragma once

#include <string>

#include "stmc/hydro/network.hpp"

namespace stmc::hydro {

// JSON network description:
// {
//   "name": "...",
//   "constants": {"w": 10.5088, "roughness_c": 130.0, "beta": 1.85, "gamma": 4.87},
//   "reservoir_head_m": 100.0,
//   "nodes": [{"id": 0, "kind": "reservoir"},
//             {"id": 2, "kind": "demand", "demand_m3h": 890.0}, ...],
//   "pipes": [{"id": 1, "from": 0, "to": 2, "length_m": 100.0, "diameter_m": 1.016}, ...],
//   "loops": [[{"pipe": 5, "dir": 1}, ...], ...]
// }
// Demands are stored in m^3/h as tabulated; the solver works in m^3/s.
NetworkSpec load_network(const std::string& path);
NetworkSpec parse_network(const std::string& json_text);

}  // namespace stmc::hydro
