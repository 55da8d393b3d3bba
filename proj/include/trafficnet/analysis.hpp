#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trafficnet/simulator.hpp"

namespace trafficnet {

struct FreeFlowEquilibrium {
  Eigen::VectorXd f;                  // (I - R^T)^{-1} lambda
  Eigen::VectorXd rho;                // d_i^{-1}(f_i)
  bool feasible = true;               // f_i < C_i everywhere
  std::vector<int> over_capacity;
  double residual = 0.0;              // ||(I - R^T) f - lambda||_inf
};

// Throws TopologyError when I - R^T is singular.
FreeFlowEquilibrium free_flow_equilibrium(const Network& net, const TurningMatrix& R, const Eigen::VectorXd& lambda);

struct JacobianReport {
  Eigen::MatrixXd J;                  // J(j, e) = dg_j / drho_e
  bool metzler = false;
  bool column_sums_ok = false;        // <= 0, and < 0 on off-ramp columns
  double spectral_abscissa = 0.0;
  bool stable = false;
};

JacobianReport jacobian_free_flow_stable(const Network& net, const TurningMatrix& R, const Eigen::VectorXd& rho_star,
                                         const Controls& controls = Controls::none());

struct DualEdge {
  int from = 0;
  int to = 0;
  bool via_inflow = false;
  bool via_outflow = false;
  bool indeterminate = false;
  friend bool operator==(const DualEdge&, const DualEdge&) = default;
};

struct DualGraph {
  int num_cells = 0;
  std::vector<DualEdge> edges;        // sorted by (from, to)

  bool has_indeterminate() const;
  bool has_edge(int from, int to) const;
};

inline constexpr double kDualThreshold = 1e-7;

DualGraph dual_graph(const Network& net, const Policy& policy, const TurningMatrix& R, const Eigen::VectorXd& rho,
                     const Controls& controls, const Eigen::VectorXd& lambda, double step_scale = 1e-4);

// One `i -> j` line per determinate edge.
void write_dot(std::ostream& os, const DualGraph& graph);

struct RootedReport {
  bool rooted = false;
  bool inconclusive = false;          // indeterminate edges were ignored
  std::vector<std::vector<int>> layers;  // layers[0] = off-ramps, layers[r] reach layers[r-1]
  std::vector<int> unreached;
};

RootedReport is_rooted(const DualGraph& graph, const std::vector<int>& off_ramps);

enum class Regime { FreeFlow, Congested };
const char* to_string(Regime r);

struct EquilibriumOptions {
  double dt = 1.0 / 6.0;
  double tol = 1e-8;                  // on ||g||_inf * dt
  double max_time = 48 * 60.0;
  double window = 30.0;               // divergence window, minutes
};

struct EquilibriumReport {
  bool converged = false;
  bool divergent = false;
  std::string diagnosis;
  double time = 0.0;
  double residual = 0.0;              // ||g(rho*)||_inf
  Eigen::VectorXd rho;
  FlowMatrix flows;
  std::vector<Regime> regime;         // congested iff inflow is supply-limited
  std::vector<bool> outflow_free;     // f_ij = R_ij d_i on every outgoing pair
  RootedReport rooted;
  bool gas = false;

  std::vector<int> congested() const;
};

EquilibriumReport find_equilibrium_by_simulation(const Network& net, const Policy& policy, const TurningMatrix& R,
                                                 const Eigen::VectorXd& lambda,
                                                 const Controls& controls = Controls::none(),
                                                 const EquilibriumOptions& options = {});

// Regime and rootedness of an already known state.
void classify(const Network& net, const Policy& policy, const TurningMatrix& R, const Eigen::VectorXd& lambda,
              const Controls& controls, EquilibriumReport& report);

}  // namespace trafficnet
