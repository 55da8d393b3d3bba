#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trafficnet/analysis.hpp"
#include "trafficnet/lp.hpp"

namespace trafficnet {

// Linear cost sum_i eta_i x_i per sampled state.
struct Objective {
  Eigen::VectorXd eta;

  static Objective total_volume(const Network& net) { return {Eigen::VectorXd::Ones(net.num_cells())}; }
  // Maximize outflow: eta_e = -v_e / L_e on off-ramps, zero elsewhere.
  static Objective evacuation(const Network& net);
};

// Feasible-set LP over x per cell and y per consecutive pair.
struct EquilibriumLp {
  LinearProgram lp;
  std::vector<int> x;
  std::vector<int> y;
};

EquilibriumLp build_equilibrium_lp(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                   const Objective& objective);

// Adds y_ij = s_j(x_j) below diverges and y_ij = d_i(x_i) above merges for cells in `uncontrolled`.
EquilibriumLp build_partial_control_lp(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                       const Objective& objective, const std::vector<int>& uncontrolled);

struct Selection {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;                  // per cell
  Eigen::VectorXd y;                  // per pair
};

Selection solve_selection(const EquilibriumLp& built, const SolverOptions& options = {});

// Largest violation of the feasible-set constraints at (x, y).
double feasible_set_violation(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Turning and speed-limit controls. Refuses (x, y) outside the feasible set beyond `tol`.
Controls extract_controls_case1(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol = 1e-7);

// Speed-limit and supply controls on merge/diverge networks; R stays uncontrolled.
Controls extract_controls_case2(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol = 1e-7);

bool merge_diverge_only(const Network& net);

struct ControlledCheck {
  bool pass = false;
  double residual = 0.0;              // ||g(x*)||_inf under the controls
  int worst_cell = -1;
  RootedReport rooted;
};

ControlledCheck verify_controlled_equilibrium(const Network& net, const Policy& policy, const TurningMatrix& R_u,
                                              const Eigen::VectorXd& lambda, const Controls& controls,
                                              const Eigen::VectorXd& x, double tol = 1e-6);

// Off-ramp rows of the horizon program. Relaxed bounds x(k+1) above by the outflow dynamics, which a
// minimizing objective can exploit by dropping off-ramp volume; Exact pins it to the simulator's update.
enum class OffRampDynamics { Relaxed, Exact };

struct HorizonLp {
  LinearProgram lp;
  int steps = 0;                      // K = H / dt
  double dt = 0.0;
  int num_cells = 0;
  int num_pairs = 0;
  int x_base = 0;                     // x_i(k) for k = 0..K
  int y_base = 0;                     // y_p(k) for k = 0..K-1
  bool periodic = false;

  int x(int k, int i) const { return x_base + k * num_cells + i; }
  int y(int k, int p) const { return y_base + k * num_pairs + p; }
};

// Forward-difference horizon program from rho0 at t0. Periodic mode frees x(0) and adds x(K) = x(0).
HorizonLp build_horizon_lp(const Network& net, const TurningMatrix& R_u, const Inflows& inflows,
                           const Eigen::VectorXd& rho0, double t0, double H, double dt, const Objective& objective,
                           OffRampDynamics offramps = OffRampDynamics::Relaxed);
HorizonLp build_periodic_lp(const Network& net, const TurningMatrix& R_u, const Inflows& inflows, double T, double dt,
                            const Objective& objective, OffRampDynamics offramps = OffRampDynamics::Relaxed);


struct HorizonSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<Eigen::VectorXd> x;     // K + 1 states
  std::vector<Eigen::VectorXd> y;     // K flow vectors
  int iterations = 0;
};

HorizonSolution solve_horizon(const HorizonLp& built, const SolverOptions& options = {});

// Largest slack of the off-ramp rows at a horizon optimum, in veh/min; zero when every row is tight.
double offramp_slack(const Network& net, const HorizonLp& built, const HorizonSolution& sol);

// Time-varying turning and speed-limit controls on [t0 + k dt, t0 + (k+1) dt).
ControlSignals extract_trajectory_controls(const Network& net, const HorizonSolution& sol, double t0, double dt);

struct MpcResult {
  Trajectory trajectory;
  ControlSignals controls;
  int solves = 0;
  bool aborted = false;
  std::string diagnosis;
  double max_tracking_error = 0.0;    // simulated vs planned states at step boundaries
  double cumulative_cost = 0.0;       // sum_k sum_e rho_e(k) dt
};

struct MpcConfig {
  double H = 5.0;
  double dt = 1.0 / 6.0;
  double duration = 180.0;
  Policy policy;
  Objective objective;
  SolverOptions solver;
  OffRampDynamics offramps = OffRampDynamics::Relaxed;
};

MpcResult mpc_loop(const Network& net, const TurningMatrix& R_u, const Inflows& inflows, const Eigen::VectorXd& rho0,
                   const MpcConfig& config);

// Sum over recorded states of the total volume times dt, excluding the final state.
double cumulative_cost(const Trajectory& trajectory, double dt);

struct PeriodicSelection {
  HorizonSolution solution;
  ControlSignals controls;            // covers two periods
  double wrap_residual = 0.0;         // ||x(0) - x(T)||_1 at the LP optimum
  double two_period_residual = 0.0;   // ||x(T) - x(2T)||_1 in simulation from x*(0)
};

PeriodicSelection periodic_selection(const Network& net, const Policy& policy, const TurningMatrix& R_u,
                                     const Inflows& inflows, double T, double dt, const Objective& objective,
                                     const SolverOptions& options = {},
                                     OffRampDynamics offramps = OffRampDynamics::Relaxed);

}  // namespace trafficnet
