#pragma once

#include <iosfwd>
#include <vector>

#include "trafficnet/flows.hpp"

namespace trafficnet {

// Piecewise-constant control schedule: segment k holds on [times[k], times[k+1]).
class ControlSignals {
 public:
  ControlSignals() = default;
  static ControlSignals constant(Controls c);

  void append(double t, Controls c);
  // Identity controls before the first breakpoint.
  const Controls& at(double t) const;

  bool empty() const { return times_.empty(); }
  int size() const { return static_cast<int>(times_.size()); }
  double time(int k) const { return times_[static_cast<std::size_t>(k)]; }
  const Controls& segment(int k) const { return segments_[static_cast<std::size_t>(k)]; }

  // Appends `other` with its times shifted by `offset`.
  void splice(const ControlSignals& other, double offset);

 private:
  std::vector<double> times_;
  std::vector<Controls> segments_;
  Controls identity_;
};

// Rows `t,kind,cell_i,cell_j,value` with kind in {alpha, beta, R}; unbounded beta prints as inf.
void write_csv(std::ostream& os, const Network& net, const ControlSignals& signals);
ControlSignals read_control_csv(std::istream& is, const Network& net);

// Case I admissibility: alpha_i R_ij <= R^u_ij + tol on every pair.
double case1_excess(const Network& net, const TurningMatrix& R_u, const Controls& c);

}  // namespace trafficnet
