#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "trafficnet/simulator.hpp"

namespace trafficnet {

// Five-freeway urban benchmark with 91 cells. Cell number n (1-based, as on the map) lives at index n - 1.
struct Benchmark {
  Network net;
  TurningMatrix R;
  Eigen::VectorXd lambda;           // veh/min, nonzero only on on-ramps
  std::vector<std::string> role;    // mainline, intersection, ramp-segment, on-ramp, off-ramp
};

Benchmark generate_la_benchmark();

constexpr int la_cell(int number) { return number - 1; }

// The bottleneck cell downstream of the 57-84-58 ramp triple.
inline constexpr int kLaBottleneck = la_cell(27);

// Speed drop 65 -> 4 mph at t = 0 (capacity about 10 veh/min).
Incident la_speed_incident();
// Capacity drop to 8 veh/min at t = 0, realized through the free-flow speed.
Incident la_capacity_incident();

}  // namespace trafficnet
