#include "trafficnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace trafficnet {

namespace {

constexpr double kStateTol = 1e-9;

void require_cfl(const Network& net, double dt) {
  const double c = cfl_number(net, dt);
  if (c > 1.0 + 1e-12) throw PreconditionError("CFL number " + std::to_string(c) + " exceeds 1");
}

}  // namespace

double speed_for_capacity(const Cell& cell, double C) {
  if (!cell.jam.bounded()) throw PreconditionError("capacity incident on a cell without jam volume");
  const double wb = cell.w * cell.jam.value() / cell.length;
  if (!(C > 0.0) || C >= wb) throw PreconditionError("capacity must lie in (0, w B / L) on " + cell.name);
  // C = v w (B/L) / (v + w)  solved for v.
  return C * cell.w / (wb - C);
}

Network apply_incident(const Network& net, const Incident& incident) {
  if (incident.cell < 0 || incident.cell >= net.num_cells())
    throw PreconditionError("incident on unknown cell " + std::to_string(incident.cell));
  if (incident.v_mph.has_value() == incident.capacity.has_value())
    throw PreconditionError("incident must set exactly one of speed and capacity");
  Cell c = net.cell(incident.cell);
  if (incident.v_mph) {
    if (!(*incident.v_mph > 0.0)) throw PreconditionError("incident speed must be positive");
    c.v = mph(*incident.v_mph);
  } else {
    c.v = speed_for_capacity(c, *incident.capacity);
  }
  return net.with_cell(incident.cell, std::move(c));
}

double cfl_number(const Network& net, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  double c = 0.0;
  for (const Cell& cell : net.cells()) c = std::max(c, cell.v * dt / cell.length);
  return c;
}

int step_count(double span, double dt) {
  if (!(dt > 0.0) || !(span >= 0.0)) throw PreconditionError("need dt > 0 and a nonnegative span");
  const double k = std::round(span / dt);
  if (std::abs(k * dt - span) > 1e-9 * std::max(1.0, span))
    throw PreconditionError("span is not a whole number of steps");
  return static_cast<int>(k);
}

StepResult step(const Network& net, const Policy& policy, const TurningMatrix& R, const Eigen::VectorXd& rho,
                const Controls& controls, const Eigen::VectorXd& lambda, double dt) {
  StepResult out;
  out.flows = compute_flows(net, policy, R, rho, controls, lambda);
  FlowMatrix& f = out.flows;
  const int n = net.num_cells();

  // Outflow guard: dt * f^out_i <= rho_i. Inactive under CFL <= 1 with linear demand.
  for (int i = 0; i < n; ++i) {
    const double leave = dt * f.outflow[i];
    if (leave <= rho[i] || leave <= 0.0) continue;
    const double scale = std::max(0.0, rho[i]) / leave;
    for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) {
      const double cut = f.pair_flow[p] * (1.0 - scale);
      f.pair_flow[p] -= cut;
      f.inflow[net.pair(p).to] -= cut;
    }
    f.outflow[i] *= scale;
    out.guarded = true;
  }

  out.rho = rho + dt * (f.inflow - f.outflow);
  for (int i = 0; i < n; ++i) {
    double& r = out.rho[i];
    const Limit& B = net.cell(i).jam;
    if (r < 0.0) {
      if (r < -kStateTol) throw IntegratorError("volume of " + net.cell(i).name + " fell below 0 by " + std::to_string(-r));
      r = 0.0;
    } else if (B.bounded() && r > B.value()) {
      if (r > B.value() + kStateTol)
        throw IntegratorError("volume of " + net.cell(i).name + " exceeded its jam volume by " +
                              std::to_string(r - B.value()));
      r = B.value();
    }
  }

  double ramps = 0.0;
  for (int i : net.on_ramps()) ramps += f.inflow[i];
  for (int i : net.off_ramps()) ramps -= f.outflow[i];
  out.conservation_residual = (out.rho - rho).sum() - dt * ramps;
  return out;
}

Trajectory simulate(const Network& net, const SimConfig& config, const Eigen::VectorXd& rho0) {
  if (rho0.size() != net.num_cells()) throw PreconditionError("initial state has the wrong size");
  if (!in_state_space(net, rho0, kStateTol)) throw PreconditionError("initial state outside S");
  if (config.record_stride < 1) throw PreconditionError("record stride must be at least 1");
  if (config.R.size() != net.num_pairs()) throw PreconditionError("turning matrix does not match the network");
  const int steps = step_count(config.horizon, config.dt);
  const double dt = config.dt;

  std::vector<Incident> pending = config.incidents;
  std::stable_sort(pending.begin(), pending.end(), [](const Incident& a, const Incident& b) { return a.time < b.time; });
  std::size_t next_incident = 0;
  Network cur = net;
  auto apply_due = [&](double t) {
    bool changed = false;
    while (next_incident < pending.size() && pending[next_incident].time <= t + 1e-9 * std::max(1.0, t)) {
      cur = apply_incident(cur, pending[next_incident++]);
      changed = true;
    }
    if (changed) require_cfl(cur, dt);
  };
  require_cfl(cur, dt);

  Trajectory traj;
  const int rows = steps / config.record_stride + 1 + (steps % config.record_stride ? 1 : 0);
  traj.states.resize(rows, net.num_cells());
  traj.times.reserve(static_cast<std::size_t>(rows));

  Eigen::VectorXd rho = rho0.cwiseMax(0.0);
  int row = 0;
  auto record = [&](double t, const Eigen::VectorXd& r) {
    traj.times.push_back(t);
    traj.states.row(row++) = r.transpose();
  };

  for (int k = 0; k < steps; ++k) {
    const double t = config.t0 + k * dt;
    apply_due(t);
    const Controls& u = config.controls.at(t);
    const Eigen::VectorXd lambda = config.inflows.at(cur, t);
    StepResult s = step(cur, config.policy, config.R, rho, u, lambda, dt);
    if (k % config.record_stride == 0) {
      record(t, rho);
      if (config.record_flows) traj.flows.push_back(s.flows);
    }
    traj.max_conservation_residual = std::max(traj.max_conservation_residual, std::abs(s.conservation_residual));
    traj.guard_activations += s.guarded ? 1 : 0;
    rho = std::move(s.rho);
  }
  const double t_end = config.t0 + steps * dt;
  apply_due(t_end);
  record(t_end, rho);
  if (config.record_flows)
    traj.flows.push_back(compute_flows(cur, config.policy, config.R, rho, config.controls.at(t_end),
                                       config.inflows.at(cur, t_end)));
  traj.states.conservativeResize(row, Eigen::NoChange);
  return traj;
}

std::vector<double> l1_distance_series(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size() || a.states.cols() != b.states.cols())
    throw PreconditionError("trajectories are on different grids");
  for (int k = 0; k < a.size(); ++k)
    if (std::abs(a.times[static_cast<std::size_t>(k)] - b.times[static_cast<std::size_t>(k)]) > 1e-9)
      throw PreconditionError("trajectories are on different grids");
  const Eigen::VectorXd d = (a.states - b.states).cwiseAbs().rowwise().sum();
  return {d.data(), d.data() + d.size()};
}

PeriodicResult detect_periodic(const Network& net, const SimConfig& config, double period, double tol,
                               int max_periods) {
  const double dt = config.dt;
  double T = period;
  if (!(T > 0.0)) {
    if (auto p = config.inflows.period())
      T = *p;
    else
      T = std::max(1, static_cast<int>(std::round(10.0 / dt))) * dt;
  }
  const int steps = step_count(T, dt);
  if (steps < 1) throw PreconditionError("period shorter than one step");
  for (const Incident& inc : config.incidents)
    if (inc.time > config.t0) throw PreconditionError("period map needs incidents at the start time");

  Network cur = net;
  for (const Incident& inc : config.incidents) cur = apply_incident(cur, inc);
  require_cfl(cur, dt);

  const double bound = 2.0 * total_jam(cur);
  PeriodicResult res;
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(net.num_cells());
  std::vector<double> totals{0.0};
  for (int p = 1; p <= max_periods; ++p) {
    Eigen::VectorXd next = rho;
    for (int k = 0; k < steps; ++k) {
      const double t = config.t0 + k * dt;
      next = step(cur, config.policy, config.R, next, config.controls.at(t), config.inflows.at(cur, t), dt).rho;
    }
    res.periods = p;
    res.last_change = (next - rho).lpNorm<1>();
    rho = std::move(next);
    if (res.last_change < tol) {
      res.state = rho;
      return res;
    }
    totals.push_back(rho.sum());
    // Linear growth beyond every bounded cell's capacity to store vehicles.
    const std::size_t m = totals.size();
    if (m > 4 && totals[m - 1] > bound) {
      const double d1 = totals[m - 1] - totals[m - 2];
      const double d3 = totals[m - 3] - totals[m - 4];
      if (d1 > 0 && totals[m - 2] > totals[m - 3] && d3 > 0 && d1 >= 0.5 * d3) {
        res.diverged = true;
        res.diagnosis = "no bounded periodic solution found: total volume keeps growing";
        return res;
      }
    }
  }
  res.diagnosis = "period map did not converge within the iteration cap";
  return res;
}

void write_csv(std::ostream& os, const Trajectory& trajectory) {
  const auto old = os.precision(17);
  os << 't';
  for (int i = 0; i < trajectory.states.cols(); ++i) os << ",cell_" << i;
  os << '\n';
  for (int k = 0; k < trajectory.size(); ++k) {
    os << trajectory.times[static_cast<std::size_t>(k)];
    for (int i = 0; i < trajectory.states.cols(); ++i) os << ',' << trajectory.states(k, i);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace trafficnet
