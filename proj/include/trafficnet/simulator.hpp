#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trafficnet/controls.hpp"

namespace trafficnet {

class IntegratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter change on one cell at a step boundary. Exactly one of the two fields is set.
struct Incident {
  double time = 0.0;                     // minutes
  int cell = 0;
  std::optional<double> v_mph;           // new free-flow speed
  std::optional<double> capacity;        // new capacity, veh/min, realized through the free-flow speed
  friend bool operator==(const Incident&, const Incident&) = default;
};

Network apply_incident(const Network& net, const Incident& incident);

// Free-flow speed giving capacity C under linear demand and affine supply without saturation.
double speed_for_capacity(const Cell& cell, double C);

double cfl_number(const Network& net, double dt);

struct SimConfig {
  double dt = 1.0 / 6.0;  // minutes
  double horizon = 0.0;   // minutes
  double t0 = 0.0;
  int record_stride = 1;
  bool record_flows = false;
  Policy policy;
  TurningMatrix R;
  Inflows inflows;
  ControlSignals controls;
  std::vector<Incident> incidents;
};

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;           // row per recorded time
  std::vector<FlowMatrix> flows;    // flows used to leave each recorded state, when requested
  double max_conservation_residual = 0.0;
  int guard_activations = 0;

  int size() const { return static_cast<int>(times.size()); }
  Eigen::VectorXd state(int k) const { return states.row(k).transpose(); }
  Eigen::VectorXd final_state() const { return state(size() - 1); }
  Eigen::VectorXd totals() const { return states.rowwise().sum(); }
};

struct StepResult {
  Eigen::VectorXd rho;
  FlowMatrix flows;                 // after the outflow guard
  double conservation_residual = 0.0;
  bool guarded = false;
};

// One Euler step. Throws IntegratorError if the update leaves S by more than 1e-9.
StepResult step(const Network& net, const Policy& policy, const TurningMatrix& R, const Eigen::VectorXd& rho,
                const Controls& controls, const Eigen::VectorXd& lambda, double dt);

Trajectory simulate(const Network& net, const SimConfig& config, const Eigen::VectorXd& rho0);

// Number of Euler steps covering `span`; rejects spans that are not a multiple of dt.
int step_count(double span, double dt);

std::vector<double> l1_distance_series(const Trajectory& a, const Trajectory& b);

struct PeriodicResult {
  std::optional<Eigen::VectorXd> state;   // fixed point of the period map
  int periods = 0;
  double last_change = 0.0;
  bool diverged = false;
  std::string diagnosis;
};

// Iterates the period map from zero. `period` <= 0 takes the period from the inflows;
// constant inflows use a ten-minute map.
PeriodicResult detect_periodic(const Network& net, const SimConfig& config, double period, double tol,
                               int max_periods = 10000);

void write_csv(std::ostream& os, const Trajectory& trajectory);

}  // namespace trafficnet
