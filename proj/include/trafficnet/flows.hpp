#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trafficnet/network.hpp"

namespace trafficnet {

enum class PolicyKind { LineCTM, FIFO, NonFIFO, Mixture, PriorityMerge };

struct Policy {
  PolicyKind kind = PolicyKind::NonFIFO;
  double theta = 0.0;             // Mixture only
  std::vector<double> priority;   // PriorityMerge: p_i per cell, read at its head merge node

  static Policy line() { return {PolicyKind::LineCTM, 0.0, {}}; }
  static Policy fifo() { return {PolicyKind::FIFO, 0.0, {}}; }
  static Policy non_fifo() { return {PolicyKind::NonFIFO, 0.0, {}}; }
  static Policy mixture(double theta) { return {PolicyKind::Mixture, theta, {}}; }
  static Policy priority_merge(std::vector<double> p) { return {PolicyKind::PriorityMerge, 0.0, std::move(p)}; }
  // Equal priorities at every two-input merge.
  static Policy priority_merge(const Network& net);

  // Policies satisfying the cross-derivative sign conditions.
  bool monotone() const {
    return kind == PolicyKind::NonFIFO || kind == PolicyKind::LineCTM || kind == PolicyKind::PriorityMerge ||
           (kind == PolicyKind::Mixture && theta == 0.0);
  }

  friend bool operator==(const Policy&, const Policy&) = default;
};

std::string to_string(const Policy& policy);

// Structural problems that make `policy` undefined on `net`.
std::vector<Violation> validate(const Network& net, const Policy& policy);

// Demand scaling alpha, supply caps beta and an optional turning override, at one instant.
struct Controls {
  Eigen::VectorXd alpha;             // empty means all ones
  std::vector<Limit> beta;           // empty means all unbounded
  std::optional<TurningMatrix> R;    // replaces the uncontrolled turning matrix when present

  static Controls none() { return {}; }
  double alpha_of(int i) const { return alpha.size() == 0 ? 1.0 : alpha[i]; }
  Limit beta_of(int i) const { return beta.empty() ? Limit::unbounded() : beta[static_cast<std::size_t>(i)]; }
  bool identity() const { return alpha.size() == 0 && beta.empty() && !R.has_value(); }

};

struct FlowMatrix {
  Eigen::VectorXd pair_flow;  // f_ij over network pairs
  Eigen::VectorXd inflow;     // f^in, lambda on on-ramps
  Eigen::VectorXd outflow;    // f^out, demand on off-ramps

  Eigen::VectorXd net_rate() const { return inflow - outflow; }
  double at(const Network& net, int i, int j) const;
};

// f_ij(rho, t) under `policy`. Throws TopologyError when the policy is undefined on a junction.
FlowMatrix compute_flows(const Network& net, const Policy& policy, const TurningMatrix& R, const Eigen::VectorXd& rho,
                         const Controls& controls, const Eigen::VectorXd& lambda);

// Proportional coefficient min{1, s_j / sum_k R_kj d_k} at every cell; 1 where nothing is demanded.
Eigen::VectorXd non_fifo_coefficients(const Network& net, const TurningMatrix& R, const Eigen::VectorXd& rho,
                                      const Controls& controls);

struct ConstraintReport {
  bool pass = true;
  std::vector<Violation> violations;
};

// Demand-fraction bound, supply bound, and the free-flow implication at `rho`.
ConstraintReport check_constraints(const Network& net, const FlowMatrix& flows, const Eigen::VectorXd& rho,
                                   const TurningMatrix& R, const Controls& controls = Controls::none(),
                                   double tol = 1e-9);

struct MonotonicityReport {
  bool pass = true;
  bool inconclusive = false;
  std::vector<Violation> violations;
  std::vector<std::string> kinks;
};

// Central differences of f^in_i, f^out_i in rho_j for j != i. Kinks inside the step are reported, not failed.
MonotonicityReport check_monotonicity(const Network& net, const Policy& policy, const TurningMatrix& R,
                                      const Eigen::VectorXd& rho, const Controls& controls,
                                      const Eigen::VectorXd& lambda, double tol = -1e-8);

inline double fd_step(double rho) { return 1e-4 * std::max(1.0, rho); }

}  // namespace trafficnet
