#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trafficnet/benchmark.hpp"
#include "trafficnet/synthesis.hpp"

namespace trafficnet {

// Parse or reference failure, located by 1-based line and field (0 when not tied to one field).
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, int field, const std::string& message, const std::string& source = {});
  int line() const { return line_; }
  int field() const { return field_; }
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  int field_;
  std::string detail_;
};

enum class SynthesisKind { None, Case1, Case2, Mpc, Periodic };

struct SynthesisRequest {
  SynthesisKind kind = SynthesisKind::None;
  double horizon = 5.0;   // minutes, MPC
  double period = 0.0;    // minutes, periodic
  friend bool operator==(const SynthesisRequest&, const SynthesisRequest&) = default;
};

struct Scenario {
  std::string name = "scenario";
  Network net;            // as built, before incidents
  Policy policy;
  TurningMatrix R;
  Inflows inflows;
  ControlSignals controls;
  SynthesisRequest synthesis;
  double dt = 1.0 / 6.0;  // minutes
  double horizon = 180.0; // minutes
  double t0 = 0.0;
  Eigen::VectorXd rho0;
  Objective objective;
  std::vector<Incident> incidents;

  // The network with every incident at or before t0 applied.
  Network initial_network() const;
  // Incidents after t0 stay in the config so the simulator applies them on schedule.
  SimConfig sim_config() const;
  Eigen::VectorXd lambda(double t = 0.0) const { return inflows.at(net, t); }
};

// Line-oriented text format; see the README for the grammar.
Scenario load_scenario(std::istream& is);
Scenario load_scenario_file(const std::string& path);
void save_scenario(std::ostream& os, const Scenario& scenario);

// Field-by-field comparison. Unit conversions on load make exact equality too strict, so reals use `rel_tol`.
bool semantically_equal(const Scenario& a, const Scenario& b, double rel_tol = 1e-14, std::string* why = nullptr);

// Benchmark defaults: NonFIFO, 10 s steps, 3 h horizon, zero initial state, total-volume objective.
Scenario la_scenario();

// Lines `<cell> <eta>`; unlisted cells keep weight zero.
Objective read_objective_weights(std::istream& is, const Network& net);

Policy parse_policy(const std::string& name, double theta, const Network& net);

}  // namespace trafficnet
