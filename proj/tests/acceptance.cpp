// End-to-end checks on the urban benchmark. Prints one PASS/FAIL line per criterion and
// always exits 0 once every check has run; a FAIL line is a finding, not a crash.
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "properties.hpp"
#include "trafficnet/benchmark.hpp"

using namespace trafficnet;

namespace {

constexpr double kDt = 10.0 / 60.0;
constexpr double kThreeHours = 180.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

SimConfig la_config(const Benchmark& b, const Policy& policy, double horizon = kThreeHours) {
  SimConfig cfg;
  cfg.dt = kDt;
  cfg.horizon = horizon;
  cfg.policy = policy;
  cfg.R = b.R;
  cfg.inflows = Inflows::constant(b.net, b.lambda);
  return cfg;
}

// Every cell at `frac` of its jam volume, on-ramps at `ramp`.
Eigen::VectorXd loaded_state(const Network& net, double frac, double ramp) {
  Eigen::VectorXd r(net.num_cells());
  for (int i = 0; i < net.num_cells(); ++i) r[i] = net.is_on_ramp(i) ? ramp : frac * net.cell(i).jam.value();
  return r;
}

Verdict cfl() {
  const double c = cfl_number(generate_la_benchmark().net, kDt);
  std::ostringstream os;
  os << "CFL at dt = 10 s is " << c;
  return {std::abs(c - 0.9028) <= 1e-4, os.str()};
}

Verdict free_flow_gas() {
  const Benchmark b = generate_la_benchmark();
  const FreeFlowEquilibrium eq = free_flow_equilibrium(b.net, b.R, b.lambda);
  Eigen::VectorXd high = 3.0 * eq.rho;
  int clamped = 0;
  for (int i = 0; i < high.size(); ++i)
    if (b.net.cell(i).jam.bounded() && high[i] > b.net.cell(i).jam.value()) {
      high[i] = b.net.cell(i).jam.value();
      ++clamped;
    }
  const SimConfig cfg = la_config(b, Policy::non_fifo());
  const Trajectory lo = simulate(b.net, cfg, Eigen::VectorXd::Zero(b.net.num_cells()));
  const Trajectory hi = simulate(b.net, cfg, high);
  const double e_lo = (lo.final_state() - eq.rho).lpNorm<1>(), e_hi = (hi.final_state() - eq.rho).lpNorm<1>();
  const std::vector<double> d = l1_distance_series(lo, hi);
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < d.size(); ++k) worst_rise = std::max(worst_rise, d[k] - d[k - 1]);
  std::ostringstream os;
  os << "|rho(T) - rho*|_1 = " << e_lo << " from 0, " << e_hi << " from 3 rho*; largest step rise of the l1 gap "
     << worst_rise << "; feasible rho* " << (eq.feasible ? "yes" : "no");
  if (clamped) os << "; " << clamped << " cells of 3 rho* clamped to jam";
  return {eq.feasible && e_lo < 1.0 && e_hi < 1.0 && worst_rise <= 1e-6, os.str()};
}

Verdict fifo_not_gas() {
  const Benchmark b = generate_la_benchmark();
  const SimConfig cfg = la_config(b, Policy::fifo());
  const Trajectory zero = simulate(b.net, cfg, Eigen::VectorXd::Zero(b.net.num_cells()));
  const Trajectory jam = simulate(b.net, cfg, loaded_state(b.net, 1.0, 100.0));
  const std::vector<double> d = l1_distance_series(zero, jam);
  double rise = 0.0;
  for (std::size_t k = 1; k < d.size(); ++k) rise = std::max(rise, d[k] - d[k - 1]);

  // Four-cell loop: on-ramp 1 feeds 2; 2 splits evenly into 3 (back into 2) and off-ramp 4.
  auto cell = [](const char* n, CellKind k, Limit B) { return Cell::from_table(n, k, 1.0, 60.0, 60.0, B); };
  const Network ex({cell("1", CellKind::OnRamp, Limit::unbounded()), cell("2", CellKind::Internal, Limit(10.0)),
                    cell("3", CellKind::Internal, Limit(10.0)), cell("4", CellKind::OffRamp, Limit(10.0))},
                   {0, 1, 2, 2}, {1, 2, 1, 0}, 3, 0);
  TurningMatrix R(ex);
  R.set(ex, 0, 1, 1.0);
  R.set(ex, 2, 1, 1.0);
  R.set(ex, 1, 2, 0.5);
  R.set(ex, 1, 3, 0.5);
  SimConfig c4;
  c4.dt = 0.5;
  c4.horizon = 120.0;
  c4.policy = Policy::fifo();
  c4.R = R;
  c4.inflows = Inflows::constant(ex, (Eigen::VectorXd(4) << 1.0, 0, 0, 0).finished());
  const double rho_o = 3.0;
  const Trajectory t4 = simulate(ex, c4, (Eigen::VectorXd(4) << rho_o, 10.0, 10.0, 0.0).finished());
  double err = 0.0, frozen = 0.0;
  for (int k = 0; k < t4.size(); ++k) {
    err = std::max(err, std::abs(t4.states(k, 0) - (rho_o + t4.times[static_cast<std::size_t>(k)])));
    frozen = std::max({frozen, std::abs(t4.states(k, 1) - 10.0), std::abs(t4.states(k, 2) - 10.0), std::abs(t4.states(k, 3))});
  }
  std::ostringstream os;
  os << "largest step rise of the FIFO l1 gap " << rise << " (gap " << d.front() << " -> " << d.back()
     << "); four-cell ramp error " << err << ", frozen-cell drift " << frozen;
  return {rise > 1e-6 && err < 1e-9 && frozen == 0.0, os.str()};
}

Verdict bottleneck_regimes() {
  const Benchmark b = generate_la_benchmark();
  const Network net = apply_incident(b.net, la_speed_incident());
  const double f27 = free_flow_equilibrium(net, b.R, b.lambda).f[kLaBottleneck];

  const EquilibriumReport nf = find_equilibrium_by_simulation(net, Policy::non_fifo(), b.R, b.lambda);
  const std::vector<int> cong = nf.congested();
  const bool split = cong == std::vector<int>{la_cell(27), la_cell(84)};

  const Trajectory ff = simulate(net, la_config(b, Policy::fifo()), Eigen::VectorXd::Zero(net.num_cells()));
  const Eigen::VectorXd tot = ff.totals();
  const int last = static_cast<int>(tot.size()) - 1, from = last - static_cast<int>(std::lround(60.0 / kDt));
  bool rising = true;
  for (int k = from + 1; k <= last; ++k) rising = rising && tot[k] > tot[k - 1];

  const EquilibriumReport mix = find_equilibrium_by_simulation(net, Policy::mixture(0.8), b.R, b.lambda);

  std::ostringstream os;
  os << "f27 = " << f27 << "; NonFIFO " << (nf.converged ? "converged" : "not converged") << " at t = " << nf.time
     << " with total " << nf.rho.sum() << ", congested {";
  for (std::size_t k = 0; k < cong.size(); ++k) os << (k ? ", " : "") << net.cell(cong[k]).name;
  os << "}, GAS " << (nf.gas ? "yes" : "no") << "; FIFO total " << tot[from] << " -> " << tot[last]
     << (rising ? " rising every step" : " not monotone") << "; theta = 0.8 "
     << (mix.converged ? "converged" : mix.diagnosis) << " with total " << mix.rho.sum();
  const bool pass = f27 >= 14.0 && f27 <= 16.0 && nf.converged && split && nf.gas && rising && mix.converged &&
                    mix.rho.sum() > nf.rho.sum();
  return {pass, os.str()};
}

Verdict selection_improvement() {
  const Benchmark b = generate_la_benchmark();
  const Network net = apply_incident(b.net, la_capacity_incident());
  const EquilibriumReport nf = find_equilibrium_by_simulation(net, Policy::non_fifo(), b.R, b.lambda);
  const Selection sel = solve_selection(build_equilibrium_lp(net, b.R, b.lambda, Objective::total_volume(net)));
  if (sel.status != LpStatus::Optimal) return {false, std::string("selection program ") + to_string(sel.status)};
  const Controls c = extract_controls_case1(net, b.R, b.lambda, sel.x, sel.y);
  const ControlledCheck chk = verify_controlled_equilibrium(net, Policy::non_fifo(), b.R, b.lambda, c, sel.x);
  double branch = 0.0;
  for (int p : net.pairs_into(la_cell(84))) branch += sel.y[p];
  const double ratio = nf.rho.sum() / sel.x.sum();
  std::ostringstream os;
  os << "uncontrolled total " << nf.rho.sum() << (nf.converged ? "" : " (not converged)") << ", controlled "
     << sel.x.sum() << ", ratio " << ratio << "; flow into c84 " << branch << "; controlled residual " << chk.residual;
  return {nf.converged && ratio >= 3.0 && branch < 1e-6 && chk.pass, os.str()};
}

Verdict mpc_improvement() {
  const Benchmark b = generate_la_benchmark();
  const Eigen::VectorXd rho0 = loaded_state(b.net, 0.5, 50.0);
  const Inflows in = Inflows::constant(b.net, b.lambda);
  MpcConfig cfg;
  cfg.H = 5.0;
  cfg.dt = kDt;
  cfg.duration = kThreeHours;
  cfg.policy = Policy::non_fifo();
  cfg.objective = Objective::total_volume(b.net);
  const MpcResult r = mpc_loop(b.net, b.R, in, rho0, cfg);
  if (r.aborted) return {false, r.diagnosis};
  const double open = cumulative_cost(simulate(b.net, la_config(b, Policy::non_fifo()), rho0), kDt);
  const double gain = 1.0 - r.cumulative_cost / open;
  std::ostringstream os;
  os << r.solves << " solves; controlled cost " << r.cumulative_cost << " vs uncontrolled " << open << " ("
     << 100.0 * gain << "% lower); plan tracking error " << r.max_tracking_error;
  return {gain >= 0.10, os.str()};
}

Verdict property_suites() {
  const std::vector<std::pair<const char*, props::Outcome>> all = {
      {"monotonicity", props::monotonicity_suite(7001, 500)},
      {"contraction", props::contraction_suite(7002, 100)},
      {"order", props::order_suite(7003, 100)},
      {"lp oracle", props::lp_oracle_suite(7004, 200)},
      {"extraction", props::extraction_suite(7005, 50)},
      {"priority identity", props::priority_identity_suite(7006, 200)},
      {"periodic", props::periodic_suite()},
  };
  bool pass = true;
  std::ostringstream os;
  for (const auto& [name, o] : all) {
    pass = pass && o.pass;
    os << (os.tellp() > 0 ? "; " : "") << name << (o.pass ? " ok" : " FAILED") << " (" << o.detail << ")";
  }
  return {pass, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"cfl", cfl},
      {"free-flow gas", free_flow_gas},
      {"fifo not gas", fifo_not_gas},
      {"bottleneck regimes", bottleneck_regimes},
      {"selection improvement", selection_improvement},
      {"mpc improvement", mpc_improvement},
      {"property suites", property_suites},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("%s %zu %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return 0;
}
