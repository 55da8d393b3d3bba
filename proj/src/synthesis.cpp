#include "trafficnet/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace trafficnet {

namespace {

double dslope(const Cell& c) { return c.v / c.length; }
double sslope(const Cell& c) { return c.w / c.length; }
double jam_or_inf(const Cell& c) { return c.jam.bounded() ? c.jam.value() : kLpInf; }

void require_size(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) throw PreconditionError(std::string(what) + " has the wrong size");
}

using Terms = std::vector<std::pair<int, double>>;

// Supply and demand-fraction rows of one snapshot (x, y), shared by the static and horizon programs.
void add_snapshot_bounds(LinearProgram& lp, const Network& net, const TurningMatrix& R_u,
                         const std::function<int(int)>& xv, const std::function<int(int)>& yv) {
  for (int j = 0; j < net.num_cells(); ++j) {
    const auto& into = net.pairs_into(j);
    const Cell& c = net.cell(j);
    if (into.empty()) continue;
    Terms t;
    for (int p : into) t.emplace_back(yv(p), 1.0);
    if (c.saturation.bounded()) lp.add_row(t, RowSense::Le, c.saturation.value(), "sat_" + c.name);
    if (c.jam.bounded()) {
      t.emplace_back(xv(j), sslope(c));
      lp.add_row(t, RowSense::Le, sslope(c) * c.jam.value(), "supply_" + c.name);
    }
  }
  for (int p = 0; p < net.num_pairs(); ++p) {
    const int i = net.pair(p).from;
    if (R_u[p] <= 0.0) {
      lp.set_bounds(yv(p), 0.0, 0.0);
      continue;
    }
    lp.add_row({{yv(p), 1.0}, {xv(i), -R_u[p] * dslope(net.cell(i))}}, RowSense::Le, 0.0, "demand_" + std::to_string(p));
  }
}

Terms out_terms(const Network& net, int i, const std::function<int(int)>& yv, double scale) {
  Terms t;
  for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) t.emplace_back(yv(p), scale);
  return t;
}

Terms in_terms(const Network& net, int j, const std::function<int(int)>& yv, double scale) {
  Terms t;
  for (int p : net.pairs_into(j)) t.emplace_back(yv(p), scale);
  return t;
}

Eigen::VectorXd clamp_to_S(const Network& net, Eigen::VectorXd x) {
  for (int i = 0; i < net.num_cells(); ++i) {
    x[i] = std::max(0.0, x[i]);
    if (net.cell(i).jam.bounded()) x[i] = std::min(x[i], net.cell(i).jam.value());
  }
  return x;
}

// Case I realization of one flow snapshot; `zero_row_uniform` selects the static fallback.
Controls case1_snapshot(const Network& net, const Eigen::VectorXd& x, const Eigen::VectorXd& y_raw,
                        bool zero_row_uniform) {
  const int n = net.num_cells();
  const Eigen::VectorXd y = y_raw.cwiseMax(0.0);
  Controls c;
  c.alpha = Eigen::VectorXd::Ones(n);
  c.R = TurningMatrix(net);
  for (int i = 0; i < n; ++i) {
    if (net.is_off_ramp(i)) continue;
    double out = 0.0;
    for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) out += y[p];
    const double d = dslope(net.cell(i)) * x[i];
    c.alpha[i] = x[i] > 1e-12 ? std::clamp(out / d, 0.0, 1.0) : 0.0;
    const int k = net.pairs_end(i) - net.pairs_begin(i);
    for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p)
      (*c.R)[p] = out > 0.0 ? y[p] / out : (zero_row_uniform ? 1.0 / k : 0.0);
  }
  return c;
}

}  // namespace

Objective Objective::evacuation(const Network& net) {
  Objective o{Eigen::VectorXd::Zero(net.num_cells())};
  for (int i : net.off_ramps()) o.eta[i] = -dslope(net.cell(i));
  return o;
}

EquilibriumLp build_equilibrium_lp(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                   const Objective& objective) {
  const int n = net.num_cells();
  require_size(lambda, n, "inflow vector");
  require_size(objective.eta, n, "objective");
  if (R_u.size() != net.num_pairs()) throw PreconditionError("turning matrix does not match the network");

  EquilibriumLp out;
  LinearProgram& lp = out.lp;
  for (int i = 0; i < n; ++i) out.x.push_back(lp.add_variable("x_" + net.cell(i).name, 0.0, jam_or_inf(net.cell(i)), objective.eta[i]));
  for (int p = 0; p < net.num_pairs(); ++p)
    out.y.push_back(lp.add_variable("y_" + net.cell(net.pair(p).from).name + "_" + net.cell(net.pair(p).to).name, 0.0,
                                    kLpInf));
  const auto xv = [&](int i) { return out.x[static_cast<std::size_t>(i)]; };
  const auto yv = [&](int p) { return out.y[static_cast<std::size_t>(p)]; };
  add_snapshot_bounds(lp, net, R_u, xv, yv);

  for (int j = 0; j < n; ++j) {
    const Cell& c = net.cell(j);
    if (net.is_on_ramp(j)) {
      lp.add_row(out_terms(net, j, yv, 1.0), RowSense::Eq, lambda[j], "inflow_" + c.name);
    } else if (net.is_off_ramp(j)) {
      Terms t = in_terms(net, j, yv, 1.0);
      t.emplace_back(xv(j), -dslope(c));
      lp.add_row(t, RowSense::Le, 0.0, "exit_" + c.name);
    } else {
      Terms t = in_terms(net, j, yv, 1.0);
      const Terms o = out_terms(net, j, yv, -1.0);
      t.insert(t.end(), o.begin(), o.end());
      lp.add_row(t, RowSense::Eq, 0.0, "balance_" + c.name);
    }
  }
  return out;
}

bool merge_diverge_only(const Network& net) {
  for (int v : net.junctions())
    if (!net.is_merge_node(v) && !net.is_diverge_node(v)) return false;
  return true;
}

EquilibriumLp build_partial_control_lp(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                       const Objective& objective, const std::vector<int>& uncontrolled) {
  if (!merge_diverge_only(net)) throw TopologyError("partial control needs a merge/diverge network");
  EquilibriumLp out = build_equilibrium_lp(net, R_u, lambda, objective);
  for (int j : uncontrolled) {
    if (j < 0 || j >= net.num_cells()) throw PreconditionError("uncontrolled cell out of range");
    const Cell& c = net.cell(j);
    const int tail = net.tail(j), head = net.head(j);
    if (tail != net.external() && net.is_diverge_node(tail)) {
      if (c.saturation.bounded() || !c.jam.bounded())
        throw PreconditionError("supply of uncontrolled cell " + c.name + " is not affine");
      const int p = net.pairs_into(j).front();
      out.lp.add_row({{out.y[static_cast<std::size_t>(p)], 1.0}, {out.x[static_cast<std::size_t>(j)], sslope(c)}},
                     RowSense::Eq, sslope(c) * c.jam.value(), "pinned_supply_" + c.name);
    }
    if (head != net.external() && net.is_merge_node(head)) {
      const int p = net.pairs_begin(j);
      out.lp.add_row({{out.y[static_cast<std::size_t>(p)], 1.0}, {out.x[static_cast<std::size_t>(j)], -dslope(c)}},
                     RowSense::Eq, 0.0, "pinned_demand_" + c.name);
    }
  }
  return out;
}

Selection solve_selection(const EquilibriumLp& built, const SolverOptions& options) {
  const LpSolution s = solve(built.lp, options);
  Selection sel;
  sel.status = s.status;
  if (s.status != LpStatus::Optimal) return sel;
  sel.objective = s.objective;
  sel.x.resize(static_cast<Eigen::Index>(built.x.size()));
  sel.y.resize(static_cast<Eigen::Index>(built.y.size()));
  for (std::size_t i = 0; i < built.x.size(); ++i) sel.x[static_cast<Eigen::Index>(i)] = s.x[built.x[i]];
  for (std::size_t p = 0; p < built.y.size(); ++p) sel.y[static_cast<Eigen::Index>(p)] = s.x[built.y[p]];
  return sel;
}

double feasible_set_violation(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double worst = 0.0;
  auto note = [&](double v) { worst = std::max(worst, v); };
  for (int i = 0; i < net.num_cells(); ++i) {
    note(-x[i]);
    if (net.cell(i).jam.bounded()) note(x[i] - net.cell(i).jam.value());
  }
  for (int p = 0; p < net.num_pairs(); ++p) {
    note(-y[p]);
    const int i = net.pair(p).from;
    note(y[p] - R_u[p] * demand(net.cell(i), x[i]));
  }
  for (int j = 0; j < net.num_cells(); ++j) {
    double in = 0.0, out = 0.0;
    for (int p : net.pairs_into(j)) in += y[p];
    for (int p = net.pairs_begin(j); p < net.pairs_end(j); ++p) out += y[p];
    const Limit s = supply(net.cell(j), x[j]);
    if (!net.pairs_into(j).empty() && s.bounded()) note(in - s.value());
    if (net.is_on_ramp(j))
      note(std::abs(out - lambda[j]));
    else if (net.is_off_ramp(j))
      note(in - demand(net.cell(j), x[j]));
    else
      note(std::abs(in - out));
  }
  return worst;
}

Controls extract_controls_case1(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol) {
  const double v = feasible_set_violation(net, R_u, lambda, x, y);
  if (v > tol) throw PreconditionError("point violates the feasible set by " + std::to_string(v));
  return case1_snapshot(net, x, y, /*zero_row_uniform=*/true);
}

Controls extract_controls_case2(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol) {
  if (!merge_diverge_only(net)) throw TopologyError("speed and supply control needs a merge/diverge network");
  const double viol = feasible_set_violation(net, R_u, lambda, x, y);
  if (viol > tol) throw PreconditionError("point violates the feasible set by " + std::to_string(viol));

  const int n = net.num_cells();
  Controls c;
  c.alpha = Eigen::VectorXd::Ones(n);
  c.beta.assign(static_cast<std::size_t>(n), Limit::unbounded());
  for (int i = 0; i < n; ++i) {
    const int head = net.head(i), tail = net.tail(i);
    if (!net.is_off_ramp(i) && net.is_merge_node(head)) {
      const int p = net.pairs_begin(i);
      c.alpha[i] = x[i] > 1e-12 ? std::clamp(std::max(0.0, y[p]) / (dslope(net.cell(i)) * x[i]), 0.0, 1.0) : 0.0;
    }
    if (!net.is_on_ramp(i) && net.is_diverge_node(tail))
      c.beta[static_cast<std::size_t>(i)] = Limit(std::max(0.0, y[net.pairs_into(i).front()]));
  }
  return c;
}

ControlledCheck verify_controlled_equilibrium(const Network& net, const Policy& policy, const TurningMatrix& R_u,
                                              const Eigen::VectorXd& lambda, const Controls& controls,
                                              const Eigen::VectorXd& x, double tol) {
  const Eigen::VectorXd xs = clamp_to_S(net, x);
  const FlowMatrix f = compute_flows(net, policy, R_u, xs, controls, lambda);
  const Eigen::VectorXd g = f.net_rate();
  ControlledCheck c;
  Eigen::Index worst = 0;
  c.residual = g.size() ? g.cwiseAbs().maxCoeff(&worst) : 0.0;
  c.worst_cell = static_cast<int>(worst);
  c.pass = c.residual <= tol;
  c.rooted = is_rooted(dual_graph(net, policy, R_u, xs, controls, lambda), net.off_ramps());
  return c;
}

namespace {

HorizonLp horizon_program(const Network& net, const TurningMatrix& R_u, const Inflows& inflows,
                          const Eigen::VectorXd* rho0, double t0, double H, double dt, const Objective& objective,
                          OffRampDynamics offramps) {
  const int n = net.num_cells(), P = net.num_pairs();
  require_size(objective.eta, n, "objective");
  if (R_u.size() != P) throw PreconditionError("turning matrix does not match the network");
  HorizonLp h;
  h.steps = step_count(H, dt);
  h.dt = dt;
  if (h.steps < 1) throw PreconditionError("horizon shorter than one step");
  h.num_cells = n;
  h.num_pairs = P;
  h.periodic = rho0 == nullptr;
  const int K = h.steps;
  LinearProgram& lp = h.lp;

  if (rho0) {
    require_size(*rho0, n, "initial state");
    if (!in_state_space(net, *rho0, 1e-9)) throw PreconditionError("initial state outside S");
  }
  h.x_base = 0;
  for (int k = 0; k <= K; ++k) {
    const bool charged = h.periodic ? k < K : true;
    for (int i = 0; i < n; ++i) {
      const std::string name = "x_" + net.cell(i).name + "_" + std::to_string(k);
      const double cost = charged ? dt * objective.eta[i] : 0.0;
      if (k == 0 && rho0) {
        const double r = std::clamp((*rho0)[i], 0.0, jam_or_inf(net.cell(i)));
        lp.add_variable(name, r, r, cost);
      } else {
        lp.add_variable(name, 0.0, jam_or_inf(net.cell(i)), cost);
      }
    }
  }
  h.y_base = lp.num_variables();
  for (int k = 0; k < K; ++k)
    for (int p = 0; p < P; ++p) lp.add_variable("y_" + std::to_string(p) + "_" + std::to_string(k), 0.0, kLpInf);

  for (int k = 0; k < K; ++k) {
    const auto xv = [&](int i) { return h.x(k, i); };
    const auto yv = [&](int p) { return h.y(k, p); };
    add_snapshot_bounds(lp, net, R_u, xv, yv);
    const Eigen::VectorXd lambda = inflows.at(net, t0 + k * dt);
    for (int j = 0; j < n; ++j) {
      Terms t{{h.x(k + 1, j), 1.0}, {h.x(k, j), -1.0}};
      const std::string tag = net.cell(j).name + "_" + std::to_string(k);
      if (net.is_on_ramp(j)) {
        const Terms o = out_terms(net, j, yv, dt);
        t.insert(t.end(), o.begin(), o.end());
        lp.add_row(t, RowSense::Eq, dt * lambda[j], "onramp_" + tag);
      } else if (net.is_off_ramp(j)) {
        const Terms in = in_terms(net, j, yv, -dt);
        t.insert(t.end(), in.begin(), in.end());
        t.emplace_back(h.x(k, j), dt * dslope(net.cell(j)));
        lp.add_row(t, offramps == OffRampDynamics::Exact ? RowSense::Eq : RowSense::Le, 0.0, "offramp_" + tag);
      } else {
        const Terms in = in_terms(net, j, yv, -dt), o = out_terms(net, j, yv, dt);
        t.insert(t.end(), in.begin(), in.end());
        t.insert(t.end(), o.begin(), o.end());
        lp.add_row(t, RowSense::Eq, 0.0, "dyn_" + tag);
      }
    }
  }
  if (h.periodic)
    for (int i = 0; i < n; ++i) lp.add_row({{h.x(K, i), 1.0}, {h.x(0, i), -1.0}}, RowSense::Eq, 0.0, "wrap_" + net.cell(i).name);
  return h;
}

}  // namespace

HorizonLp build_horizon_lp(const Network& net, const TurningMatrix& R_u, const Inflows& inflows,
                           const Eigen::VectorXd& rho0, double t0, double H, double dt, const Objective& objective,
                           OffRampDynamics offramps) {
  return horizon_program(net, R_u, inflows, &rho0, t0, H, dt, objective, offramps);
}

HorizonLp build_periodic_lp(const Network& net, const TurningMatrix& R_u, const Inflows& inflows, double T, double dt,
                            const Objective& objective, OffRampDynamics offramps) {
  return horizon_program(net, R_u, inflows, nullptr, 0.0, T, dt, objective, offramps);
}

double offramp_slack(const Network& net, const HorizonLp& h, const HorizonSolution& sol) {
  double worst = 0.0;
  for (int k = 0; k < h.steps; ++k)
    for (int j : net.off_ramps()) {
      double in = 0.0;
      for (int p : net.pairs_into(j)) in += sol.y[static_cast<std::size_t>(k)][p];
      const double out = sol.x[static_cast<std::size_t>(k)][j] * dslope(net.cell(j));
      const double rate = (sol.x[static_cast<std::size_t>(k) + 1][j] - sol.x[static_cast<std::size_t>(k)][j]) / h.dt;
      worst = std::max(worst, in - out - rate);
    }
  return worst;
}

HorizonSolution solve_horizon(const HorizonLp& h, const SolverOptions& options) {
  const LpSolution s = solve(h.lp, options);
  HorizonSolution out;
  out.status = s.status;
  out.iterations = s.iterations;
  if (s.status != LpStatus::Optimal) return out;
  out.objective = s.objective;
  for (int k = 0; k <= h.steps; ++k) out.x.push_back(s.x.segment(h.x(k, 0), h.num_cells));
  for (int k = 0; k < h.steps; ++k) out.y.push_back(s.x.segment(h.y(k, 0), h.num_pairs));
  return out;
}

ControlSignals extract_trajectory_controls(const Network& net, const HorizonSolution& sol, double t0, double dt) {
  ControlSignals cs;
  for (std::size_t k = 0; k < sol.y.size(); ++k)
    cs.append(t0 + static_cast<double>(k) * dt, case1_snapshot(net, sol.x[k], sol.y[k], /*zero_row_uniform=*/false));
  return cs;
}

double cumulative_cost(const Trajectory& trajectory, double dt) {
  if (trajectory.size() < 2) return 0.0;
  return trajectory.states.topRows(trajectory.size() - 1).sum() * dt;
}

MpcResult mpc_loop(const Network& net, const TurningMatrix& R_u, const Inflows& inflows, const Eigen::VectorXd& rho0,
                   const MpcConfig& cfg) {
  const int cycles = step_count(cfg.duration, cfg.H);
  const int K = step_count(cfg.H, cfg.dt);
  MpcResult res;
  res.trajectory.states.resize(cycles * K + 1, net.num_cells());
  Eigen::VectorXd rho = rho0;
  int row = 0;
  for (int c = 0; c < cycles; ++c) {
    const double t0 = c * cfg.H;
    const HorizonLp h = build_horizon_lp(net, R_u, inflows, rho, t0, cfg.H, cfg.dt, cfg.objective, cfg.offramps);
    const HorizonSolution sol = solve_horizon(h, cfg.solver);
    ++res.solves;
    if (sol.status != LpStatus::Optimal) {
      res.aborted = true;
      res.diagnosis = std::string("horizon program at t = ") + std::to_string(t0) + " is " + to_string(sol.status);
      break;
    }
    const ControlSignals u = extract_trajectory_controls(net, sol, t0, cfg.dt);
    res.controls.splice(u, 0.0);

    SimConfig sim;
    sim.dt = cfg.dt;
    sim.horizon = cfg.H;
    sim.t0 = t0;
    sim.policy = cfg.policy;
    sim.R = R_u;
    sim.inflows = inflows;
    sim.controls = u;
    const Trajectory piece = simulate(net, sim, rho);
    for (int k = 0; k < piece.size(); ++k)
      res.max_tracking_error =
          std::max(res.max_tracking_error, (piece.state(k) - sol.x[static_cast<std::size_t>(k)]).lpNorm<Eigen::Infinity>());
    for (int k = c == 0 ? 0 : 1; k < piece.size(); ++k) {
      res.trajectory.times.push_back(piece.times[static_cast<std::size_t>(k)]);
      res.trajectory.states.row(row++) = piece.states.row(k);
    }
    res.trajectory.max_conservation_residual =
        std::max(res.trajectory.max_conservation_residual, piece.max_conservation_residual);
    rho = piece.final_state();
  }
  res.trajectory.states.conservativeResize(row, Eigen::NoChange);
  res.cumulative_cost = cumulative_cost(res.trajectory, cfg.dt);
  return res;
}

PeriodicSelection periodic_selection(const Network& net, const Policy& policy, const TurningMatrix& R_u,
                                     const Inflows& inflows, double T, double dt, const Objective& objective,
                                     const SolverOptions& options, OffRampDynamics offramps) {
  PeriodicSelection out;
  const HorizonLp h = build_periodic_lp(net, R_u, inflows, T, dt, objective, offramps);
  out.solution = solve_horizon(h, options);
  if (out.solution.status != LpStatus::Optimal) return out;
  const auto& x = out.solution.x;
  out.wrap_residual = (x.front() - x.back()).lpNorm<1>();
  out.controls = extract_trajectory_controls(net, out.solution, 0.0, dt);
  out.controls.splice(extract_trajectory_controls(net, out.solution, T, dt), 0.0);

  SimConfig sim;
  sim.dt = dt;
  sim.horizon = 2 * T;
  sim.policy = policy;
  sim.R = R_u;
  sim.inflows = inflows;
  sim.controls = out.controls;
  const Trajectory tr = simulate(net, sim, clamp_to_S(net, x.front()));
  out.two_period_residual = (tr.state(h.steps) - tr.state(2 * h.steps)).lpNorm<1>();
  return out;
}

}  // namespace trafficnet
