#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "trafficnet/scenario.hpp"

namespace fs = std::filesystem;
using namespace trafficnet;

namespace {

struct Common {
  std::string scenario;
  std::string out = "out";
  double dt_sec = 0.0;
  double horizon = -1.0;
  std::string policy;
  double theta = -1.0;
  std::string objective;
};

void add_common(CLI::App* cmd, Common& c, bool needs_scenario = true, bool scalar_theta = true) {
  auto* s = cmd->add_option("--scenario", c.scenario, "scenario file");
  if (needs_scenario) s->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--dt", c.dt_sec, "step in seconds (overrides the scenario)");
  cmd->add_option("--horizon", c.horizon, "horizon in minutes (overrides the scenario)");
  cmd->add_option("--policy", c.policy, "line, fifo, nonfifo, mixture or priority");
  if (scalar_theta) cmd->add_option("--theta", c.theta, "mixture weight in [0, 1]");
  cmd->add_option("--objective", c.objective, "per-cell weights file");
}

Scenario load(const Common& c) {
  Scenario sc = load_scenario_file(c.scenario);
  if (c.dt_sec > 0.0) sc.dt = c.dt_sec / 60.0;
  if (c.horizon >= 0.0) sc.horizon = c.horizon;
  if (!c.policy.empty()) sc.policy = parse_policy(c.policy, c.theta < 0.0 ? 0.0 : c.theta, sc.net);
  else if (c.theta >= 0.0) sc.policy = Policy::mixture(c.theta);
  if (!c.objective.empty()) {
    std::ifstream in(c.objective);
    if (!in) throw std::runtime_error("cannot open objective file '" + c.objective + "'");
    sc.objective = read_objective_weights(in, sc.net);
  }
  return sc;
}

std::ofstream open_out(const Common& c, const std::string& file) {
  fs::create_directories(c.out);
  std::ofstream os(fs::path(c.out) / file);
  if (!os) throw std::runtime_error("cannot write " + (fs::path(c.out) / file).string());
  os.precision(17);
  return os;
}

void write_totals(std::ostream& os, const std::vector<std::string>& names, const std::vector<const Trajectory*>& runs) {
  os << 't';
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  std::size_t rows = 0;
  for (const Trajectory* r : runs) rows = std::max<std::size_t>(rows, static_cast<std::size_t>(r->size()));
  for (std::size_t k = 0; k < rows; ++k) {
    bool first = true;
    for (const Trajectory* r : runs) {
      if (first) os << (k < r->times.size() ? r->times[k] : 0.0);
      first = false;
      os << ',';
      if (static_cast<int>(k) < r->size()) os << r->states.row(static_cast<Eigen::Index>(k)).sum();
    }
    os << '\n';
  }
}

int threads_cap() {
  int cap = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("TRAFFICNET_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) cap = v;
  }
  return cap;
}

void print_violations(const std::vector<Violation>& vs) {
  for (const Violation& v : vs) std::cout << "  " << v.rule << " at " << v.where << (v.detail.empty() ? "" : ": " + v.detail) << '\n';
}

int cmd_validate(const Common& c) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  std::cout << sc.name << ": " << net.num_cells() << " cells, " << net.on_ramps().size() << " on-ramps, "
            << net.off_ramps().size() << " off-ramps, policy " << to_string(sc.policy) << '\n';
  const double cfl = cfl_number(net, sc.dt);
  std::cout << "CFL number at dt = " << sc.dt * 60.0 << " s: " << cfl << '\n';
  auto vs = validate(net, sc.R);
  const auto ps = validate(net, sc.policy);
  vs.insert(vs.end(), ps.begin(), ps.end());
  print_violations(vs);
  if (!vs.empty() || cfl > 1.0) {
    std::cout << "invalid\n";
    return 1;
  }
  std::cout << "valid\n";
  return 0;
}

int cmd_simulate(const Common& c) {
  const Scenario sc = load(c);
  const Trajectory tr = simulate(sc.initial_network(), sc.sim_config(), sc.rho0);
  auto traj = open_out(c, "trajectory.csv");
  write_csv(traj, tr);
  auto tot = open_out(c, "totals.csv");
  write_totals(tot, {"total"}, {&tr});
  auto rep = open_out(c, "conservation.txt");
  rep << "steps " << tr.size() - 1 << "\nmax_conservation_residual " << tr.max_conservation_residual
      << "\nguard_activations " << tr.guard_activations << "\nfinal_total " << tr.final_state().sum() << '\n';
  std::cout << "simulated " << tr.size() - 1 << " steps; final total " << tr.final_state().sum()
            << " veh; max conservation residual " << tr.max_conservation_residual << '\n';
  return 0;
}

int cmd_analyze(const Common& c) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  const Eigen::VectorXd lambda = sc.lambda(sc.t0);
  const FreeFlowEquilibrium ff = free_flow_equilibrium(net, sc.R, lambda);
  auto csv = open_out(c, "free_flow.csv");
  csv << "cell,name,f,rho,capacity,over_capacity\n";
  for (int i = 0; i < net.num_cells(); ++i) {
    const Limit C = capacity(net.cell(i));
    const bool over = std::find(ff.over_capacity.begin(), ff.over_capacity.end(), i) != ff.over_capacity.end();
    csv << i << ',' << net.cell(i).name << ',' << ff.f[i] << ',' << ff.rho[i] << ','
        << (C.bounded() ? std::to_string(C.value()) : "inf") << ',' << over << '\n';
  }
  std::cout << "free-flow equilibrium " << (ff.feasible ? "exists" : "violates capacity") << "; total "
            << ff.rho.sum() << " veh\n";
  for (int i : ff.over_capacity) std::cout << "  over capacity: " << net.cell(i).name << '\n';
  const JacobianReport jr = jacobian_free_flow_stable(net, sc.R, ff.rho, Controls::none());
  std::cout << "Jacobian: Metzler " << jr.metzler << ", column sums " << jr.column_sums_ok << ", spectral abscissa "
            << jr.spectral_abscissa << '\n';
  if (ff.feasible) {
    const DualGraph g = dual_graph(net, sc.policy, sc.R, ff.rho, Controls::none(), lambda);
    auto dot = open_out(c, "dual_graph.dot");
    dot << "digraph dual {\n";
    write_dot(dot, g);
    dot << "}\n";
    const RootedReport rr = is_rooted(g, net.off_ramps());
    std::cout << "dual graph at the free-flow equilibrium: " << (rr.rooted ? "rooted" : "not rooted")
              << (rr.inconclusive ? " (inconclusive edges)" : "") << '\n';
  }
  return 0;
}

void write_equilibrium(std::ostream& os, const Network& net, const EquilibriumReport& r) {
  os << "cell,name,rho,inflow,outflow,regime,outflow_free\n";
  for (int i = 0; i < net.num_cells(); ++i)
    os << i << ',' << net.cell(i).name << ',' << r.rho[i] << ',' << r.flows.inflow[i] << ',' << r.flows.outflow[i] << ','
       << to_string(r.regime[static_cast<std::size_t>(i)]) << ',' << r.outflow_free[static_cast<std::size_t>(i)] << '\n';
}

int cmd_equilibrium(const Common& c) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  EquilibriumOptions opt;
  opt.dt = sc.dt;
  const EquilibriumReport r = find_equilibrium_by_simulation(net, sc.policy, sc.R, sc.lambda(sc.t0), Controls::none(), opt);
  auto os = open_out(c, "equilibrium.csv");
  write_equilibrium(os, net, r);
  std::cout << (r.converged ? "converged" : r.divergent ? "divergent" : "not converged") << " after " << r.time
            << " min; total " << r.rho.sum() << " veh; residual " << r.residual << '\n';
  if (!r.diagnosis.empty()) std::cout << r.diagnosis << '\n';
  std::cout << "congested:";
  for (int i : r.congested()) std::cout << ' ' << net.cell(i).name;
  std::cout << "\nGAS verdict: " << (r.gas ? "yes" : "not established") << '\n';
  return r.converged ? 0 : 2;
}

int cmd_select(const Common& c) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  const Eigen::VectorXd lambda = sc.lambda(sc.t0);
  const Selection sel = solve_selection(build_equilibrium_lp(net, sc.R, lambda, sc.objective));
  if (sel.status != LpStatus::Optimal) {
    std::cerr << "error: equilibrium selection is " << to_string(sel.status) << '\n';
    return 1;
  }
  const bool case2 = sc.synthesis.kind == SynthesisKind::Case2;
  const Controls ctl = case2 ? extract_controls_case2(net, sc.R, lambda, sel.x, sel.y)
                             : extract_controls_case1(net, sc.R, lambda, sel.x, sel.y);
  const ControlledCheck chk = verify_controlled_equilibrium(net, sc.policy, sc.R, lambda, ctl, sel.x);
  EquilibriumOptions opt;
  opt.dt = sc.dt;
  const EquilibriumReport unc = find_equilibrium_by_simulation(net, sc.policy, sc.R, lambda, Controls::none(), opt);

  auto cs = open_out(c, "controls.csv");
  write_csv(cs, net, ControlSignals::constant(ctl));
  auto os = open_out(c, "selection.csv");
  os << "cell,name,x_controlled,rho_uncontrolled,inflow_controlled\n";
  for (int i = 0; i < net.num_cells(); ++i) {
    double in = net.is_on_ramp(i) ? lambda[i] : 0.0;
    for (int p : net.pairs_into(i)) in += sel.y[p];
    os << i << ',' << net.cell(i).name << ',' << sel.x[i] << ',' << unc.rho[i] << ',' << in << '\n';
  }
  std::cout << "controlled equilibrium total " << sel.x.sum() << " veh (" << (case2 ? "speed limits and metering" : "turning and speed limits")
            << "); residual " << chk.residual << (chk.pass ? "" : " FAILED") << '\n';
  if (unc.converged)
    std::cout << "uncontrolled equilibrium total " << unc.rho.sum() << " veh; ratio " << unc.rho.sum() / sel.x.sum() << '\n';
  else
    std::cout << "uncontrolled system: " << unc.diagnosis << '\n';
  return chk.pass ? 0 : 1;
}

int cmd_mpc(const Common& c, double H, bool exact) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  MpcConfig cfg;
  cfg.H = H > 0.0 ? H : sc.synthesis.kind == SynthesisKind::Mpc ? sc.synthesis.horizon : 5.0;
  cfg.dt = sc.dt;
  cfg.duration = sc.horizon;
  cfg.policy = sc.policy;
  cfg.objective = sc.objective;
  cfg.offramps = exact ? OffRampDynamics::Exact : OffRampDynamics::Relaxed;
  const MpcResult r = mpc_loop(net, sc.R, sc.inflows, sc.rho0, cfg);
  SimConfig base = sc.sim_config();
  base.controls = ControlSignals();
  const Trajectory unc = simulate(net, base, sc.rho0);

  auto a = open_out(c, "mpc_trajectory.csv");
  write_csv(a, r.trajectory);
  auto b = open_out(c, "uncontrolled_trajectory.csv");
  write_csv(b, unc);
  auto s = open_out(c, "controls.csv");
  write_csv(s, net, r.controls);
  auto t = open_out(c, "totals.csv");
  write_totals(t, {"controlled", "uncontrolled"}, {&r.trajectory, &unc});
  const double cu = cumulative_cost(unc, sc.dt);
  std::cout << r.solves << " horizon solves; cumulative cost controlled " << r.cumulative_cost << ", uncontrolled " << cu
            << " (" << 100.0 * (1.0 - r.cumulative_cost / cu) << "% lower); max tracking error " << r.max_tracking_error
            << '\n';
  if (r.aborted) {
    std::cerr << "error: " << r.diagnosis << '\n';
    return 1;
  }
  return 0;
}

int cmd_periodic(const Common& c, double T) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  double period = T;
  if (period <= 0.0 && sc.synthesis.kind == SynthesisKind::Periodic) period = sc.synthesis.period;
  if (period <= 0.0) period = sc.inflows.period().value_or(0.0);
  if (period <= 0.0) throw std::runtime_error("no period: pass --period or use periodic inflows");
  const PeriodicSelection p = periodic_selection(net, sc.policy, sc.R, sc.inflows, period, sc.dt, sc.objective);
  if (p.solution.status != LpStatus::Optimal) {
    std::cerr << "error: periodic selection is " << to_string(p.solution.status) << '\n';
    return 1;
  }
  auto os = open_out(c, "periodic_states.csv");
  os << 't';
  for (int i = 0; i < net.num_cells(); ++i) os << ",cell_" << i;
  os << '\n';
  for (std::size_t k = 0; k < p.solution.x.size(); ++k) {
    os << static_cast<double>(k) * sc.dt;
    for (int i = 0; i < net.num_cells(); ++i) os << ',' << p.solution.x[k][i];
    os << '\n';
  }
  auto cs = open_out(c, "controls.csv");
  write_csv(cs, net, p.controls);
  std::cout << "periodic optimum " << p.solution.objective << "; wrap residual " << p.wrap_residual
            << "; two-period residual " << p.two_period_residual << '\n';
  return 0;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) out.push_back(std::stod(tok));
  if (out.empty()) throw std::runtime_error("empty theta list");
  return out;
}

int cmd_compare(const Common& c, const std::string& thetas) {
  const Scenario sc = load(c);
  const Network net = sc.initial_network();
  const std::vector<double> th = parse_list(thetas);
  for (double t : th)
    if (!(t >= 0.0 && t <= 1.0)) throw std::runtime_error("theta outside [0, 1]");
  const bool from_zero = sc.rho0.isZero(0.0);
  std::vector<Trajectory> runs(th.size()), zero(th.size());
  std::vector<std::string> errors(th.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < th.size();) {
      try {
        SimConfig cfg = sc.sim_config();
        cfg.policy = Policy::mixture(th[k]);
        runs[k] = simulate(net, cfg, sc.rho0);
        if (!from_zero) zero[k] = simulate(net, cfg, Eigen::VectorXd::Zero(net.num_cells()));
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const int n = std::min<int>(threads_cap(), static_cast<int>(th.size()));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < th.size(); ++k)
    if (!errors[k].empty()) throw std::runtime_error("theta " + std::to_string(th[k]) + ": " + errors[k]);

  std::vector<std::string> names;
  std::vector<const Trajectory*> ptrs;
  for (std::size_t k = 0; k < th.size(); ++k) {
    std::ostringstream n;
    n << "theta_" << th[k];
    names.push_back(n.str());
    ptrs.push_back(&runs[k]);
  }
  auto tot = open_out(c, "totals.csv");
  write_totals(tot, names, ptrs);
  if (!from_zero) {
    auto l1 = open_out(c, "l1.csv");
    l1 << 't';
    for (const auto& nm : names) l1 << ',' << nm;
    l1 << '\n';
    std::vector<std::vector<double>> d;
    for (std::size_t k = 0; k < th.size(); ++k) d.push_back(l1_distance_series(runs[k], zero[k]));
    for (std::size_t s = 0; s < d.front().size(); ++s) {
      l1 << runs.front().times[s];
      for (const auto& series : d) l1 << ',' << series[s];
      l1 << '\n';
    }
  }
  const double bound = 2.0 * total_jam(net);
  for (std::size_t k = 0; k < th.size(); ++k) {
    const Eigen::VectorXd totals = runs[k].totals();
    const Eigen::Index last = totals.size() - 1;
    const Eigen::Index hour = std::max<Eigen::Index>(0, last - std::lround(60.0 / sc.dt));
    bool rising = last > hour;
    for (Eigen::Index s = hour; s < last; ++s) rising = rising && totals[s + 1] > totals[s];
    std::cout << names[k] << ": final total " << totals[last] << " veh"
              << (rising ? " (still increasing over the final hour)" : "") << (totals[last] > bound ? " (divergent)" : "")
              << '\n';
  }
  return 0;
}

int cmd_generate(const Common& c, const std::string& incident, const std::string& initial) {
  Scenario sc = la_scenario();
  if (incident == "speed") sc.incidents.push_back(la_speed_incident());
  else if (incident == "capacity") sc.incidents.push_back(la_capacity_incident());
  else if (incident != "none") throw std::runtime_error("unknown incident '" + incident + "'");
  const Network& net = sc.net;
  for (int i = 0; i < net.num_cells(); ++i) {
    const Limit& B = net.cell(i).jam;
    if (initial == "zero") sc.rho0[i] = 0.0;
    else if (initial == "half-jam") sc.rho0[i] = B.bounded() ? B.value() / 2.0 : 50.0;
    else if (initial == "jam") sc.rho0[i] = B.bounded() ? B.value() : 100.0;
    else throw std::runtime_error("unknown initial state '" + initial + "'");
  }
  if (c.dt_sec > 0.0) sc.dt = c.dt_sec / 60.0;
  if (c.horizon >= 0.0) sc.horizon = c.horizon;
  if (!c.policy.empty()) sc.policy = parse_policy(c.policy, c.theta < 0.0 ? 0.0 : c.theta, sc.net);
  auto os = open_out(c, "la.scn");
  save_scenario(os, sc);
  std::cout << "wrote " << (fs::path(c.out) / "la.scn").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Macroscopic traffic network simulation, analysis and control"};
  app.require_subcommand(1);
  Common c;
  double H = 0.0, T = 0.0;
  bool exact = false;
  std::string thetas = "0,0.8,1", incident = "none", initial = "zero";

  auto* validate_cmd = app.add_subcommand("validate", "check a scenario");
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate and write the trajectory");
  auto* analyze_cmd = app.add_subcommand("analyze", "free-flow equilibrium, Jacobian and dual graph");
  auto* equilibrium_cmd = app.add_subcommand("equilibrium", "equilibrium by simulation with regime report");
  auto* select_cmd = app.add_subcommand("select", "optimal controlled equilibrium");
  auto* mpc_cmd = app.add_subcommand("mpc", "receding-horizon control");
  auto* periodic_cmd = app.add_subcommand("periodic", "optimal periodic trajectory");
  auto* compare_cmd = app.add_subcommand("compare-policies", "mixture policies side by side");
  auto* generate_cmd = app.add_subcommand("generate", "write the 91-cell benchmark scenario");
  for (auto* cmd : {validate_cmd, simulate_cmd, analyze_cmd, equilibrium_cmd, select_cmd, mpc_cmd, periodic_cmd})
    add_common(cmd, c);
  add_common(compare_cmd, c, true, false);
  add_common(generate_cmd, c, false);
  mpc_cmd->add_option("--mpc-horizon", H, "horizon of each solve in minutes");
  mpc_cmd->add_flag("--exact-offramps", exact, "pin off-ramp volumes to their outflow dynamics");
  periodic_cmd->add_option("--period", T, "period in minutes");
  compare_cmd->add_option("--theta", thetas, "comma-separated mixture weights")->capture_default_str();
  generate_cmd->add_option("--incident", incident, "none, speed or capacity")->capture_default_str();
  generate_cmd->add_option("--initial", initial, "zero, half-jam or jam")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*validate_cmd) return cmd_validate(c);
    if (*simulate_cmd) return cmd_simulate(c);
    if (*analyze_cmd) return cmd_analyze(c);
    if (*equilibrium_cmd) return cmd_equilibrium(c);
    if (*select_cmd) return cmd_select(c);
    if (*mpc_cmd) return cmd_mpc(c, H, exact);
    if (*periodic_cmd) return cmd_periodic(c, T);
    if (*compare_cmd) return cmd_compare(c, thetas);
    if (*generate_cmd) return cmd_generate(c, incident, initial);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
