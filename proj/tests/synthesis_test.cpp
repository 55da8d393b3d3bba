#include <limits>

#include <gtest/gtest.h>

#include "properties.hpp"

using namespace trafficnet;

namespace {

Network ramp_pair() {
  std::vector<Cell> cells = {Cell::from_table("on", CellKind::OnRamp, 1.0, 30.0, 12.0, Limit::unbounded()),
                             Cell::from_table("off", CellKind::OffRamp, 1.0, 60.0, 12.0, Limit(100.0))};
  return Network(cells, {0, 1}, {1, 0}, 2, 0);
}

// on -> a -> {b, off1}, b -> c -> off2, with c capped at 8 veh/min (same shape as the analysis fixture).
Network bottleneck_line() {
  auto c = [](const char* n, CellKind k, double v_mph, Limit B) { return Cell::from_table(n, k, 1.0, v_mph, 12.0, B); };
  std::vector<Cell> cells = {c("on", CellKind::OnRamp, 60, Limit::unbounded()), c("a", CellKind::Internal, 60, Limit(200)),
                             c("b", CellKind::Internal, 60, Limit(200)),        c("c", CellKind::Internal, 3, Limit(200)),
                             c("off1", CellKind::OffRamp, 60, Limit(200)),      c("off2", CellKind::OffRamp, 60, Limit(200))};
  return Network(cells, {0, 1, 2, 3, 2, 4}, {1, 2, 3, 4, 0, 0}, 5, 0);
}

TurningMatrix bottleneck_turns(const Network& net) {
  TurningMatrix R = TurningMatrix::uniform(net);
  R.set(net, 1, 2, 0.8);
  R.set(net, 1, 4, 0.2);
  return R;
}

Eigen::VectorXd ramp_inflow(const Network& net, double lam) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(net.num_cells());
  v[0] = lam;
  return v;
}

double horizon_cost(const Trajectory& tr, const Eigen::VectorXd& eta, double dt, int K) {
  double s = 0.0;
  for (int k = 0; k <= K; ++k) s += dt * eta.dot(tr.states.row(k).transpose());
  return s;
}

}  // namespace

TEST(Selection, RampPairMinimumIsFreeFlow) {
  // C_off = 1 * 0.2 * 100 / 1.2 = 16.7; the on-ramp itself is unbounded.
  const Network net = ramp_pair();
  const TurningMatrix R = TurningMatrix::uniform(net);
  const Eigen::VectorXd lam = ramp_inflow(net, 6.0);
  const Selection sel = solve_selection(build_equilibrium_lp(net, R, lam, Objective::total_volume(net)));
  ASSERT_EQ(sel.status, LpStatus::Optimal);
  EXPECT_NEAR(sel.x[0], 12.0, 1e-9);  // v = 0.5 mi/min
  EXPECT_NEAR(sel.x[1], 6.0, 1e-9);
  EXPECT_NEAR(sel.objective, 18.0, 1e-9);
  EXPECT_LT((sel.x - free_flow_equilibrium(net, R, lam).rho).lpNorm<Eigen::Infinity>(), 1e-9);

  const Selection over = solve_selection(build_equilibrium_lp(net, R, ramp_inflow(net, 17.0), Objective::total_volume(net)));
  EXPECT_EQ(over.status, LpStatus::Infeasible);
}

TEST(Selection, Case1ControlsRealizeTheOptimum) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Eigen::VectorXd lam = ramp_inflow(net, 12.0);
  const Selection sel = solve_selection(build_equilibrium_lp(net, R, lam, Objective::total_volume(net)));
  ASSERT_EQ(sel.status, LpStatus::Optimal);
  EXPECT_LT(feasible_set_violation(net, R, lam, sel.x, sel.y), 1e-9);
  const Controls c = extract_controls_case1(net, R, lam, sel.x, sel.y);
  ASSERT_TRUE(c.R.has_value());
  const ControlledCheck chk = verify_controlled_equilibrium(net, Policy::non_fifo(), R, lam, c, sel.x);
  EXPECT_TRUE(chk.pass) << chk.residual;
  // The optimum sends everything to off1 and leaves b and c empty; alpha = 0 there cuts them out of the dual graph.
  EXPECT_NEAR(sel.x[2] + sel.x[3], 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(c.alpha[2], 0.0);
  EXPECT_FALSE(chk.rooted.rooted);
  EXPECT_EQ(chk.rooted.unreached, std::vector<int>({2, 3}));
  // The uncontrolled equilibrium holds 372 vehicles; the selection holds far fewer.
  EXPECT_LT(sel.objective, 0.5 * 372.0);
}

TEST(Selection, Case1EmptyNetworkUsesUniformRows) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(net.num_cells());
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(net.num_pairs());
  const Controls c = extract_controls_case1(net, R, zero, zero, y);
  ASSERT_TRUE(c.R.has_value());
  EXPECT_DOUBLE_EQ(c.R->at(net, 1, 2), 0.5);
  EXPECT_DOUBLE_EQ(c.R->at(net, 1, 4), 0.5);
  EXPECT_TRUE(verify_controlled_equilibrium(net, Policy::non_fifo(), R, zero, c, zero).pass);
}

TEST(Selection, Case1RefusesInfeasiblePoints) {
  const Network net = ramp_pair();
  const TurningMatrix R = TurningMatrix::uniform(net);
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  const Eigen::VectorXd y = (Eigen::VectorXd(1) << 5.0).finished();  // d_on = 0.5
  EXPECT_THROW(extract_controls_case1(net, R, ramp_inflow(net, 5.0), x, y), PreconditionError);
}

TEST(Selection, Case2SupplyCapEqualsPlannedFlow) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Eigen::VectorXd lam = ramp_inflow(net, 12.0);
  ASSERT_TRUE(merge_diverge_only(net));
  const Selection sel = solve_selection(build_equilibrium_lp(net, R, lam, Objective::total_volume(net)));
  ASSERT_EQ(sel.status, LpStatus::Optimal);
  const Controls c = extract_controls_case2(net, R, lam, sel.x, sel.y);
  EXPECT_FALSE(c.R.has_value());
  const int ab = *net.pair_index(1, 2), aoff = *net.pair_index(1, 4);
  EXPECT_DOUBLE_EQ(c.beta_of(2).value(), sel.y[ab]);
  EXPECT_DOUBLE_EQ(c.beta_of(4).value(), sel.y[aoff]);
  const ControlledCheck chk = verify_controlled_equilibrium(net, Policy::non_fifo(), R, lam, c, sel.x);
  EXPECT_TRUE(chk.pass) << chk.residual;
}

TEST(Selection, CorruptedControlIsCaughtAtTheRightCell) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Eigen::VectorXd lam = ramp_inflow(net, 12.0);
  const Selection sel = solve_selection(build_equilibrium_lp(net, R, lam, Objective::total_volume(net)));
  ASSERT_EQ(sel.status, LpStatus::Optimal);
  Controls c = extract_controls_case1(net, R, lam, sel.x, sel.y);
  c.alpha[1] *= 0.5;  // a now releases half its planned outflow
  const ControlledCheck chk = verify_controlled_equilibrium(net, Policy::non_fifo(), R, lam, c, sel.x);
  EXPECT_FALSE(chk.pass);
  EXPECT_EQ(net.cell(chk.worst_cell).name, "a");
  EXPECT_NEAR(chk.residual, 6.0, 1e-6);  // half of a's 12 veh/min
}

TEST(Selection, PartialControlIsNestedAndEmptySetIsFullControl) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Eigen::VectorXd lam = ramp_inflow(net, 12.0);
  const Objective obj = Objective::total_volume(net);
  const auto cost = [&](const std::vector<int>& u) {
    const Selection s = solve_selection(build_partial_control_lp(net, R, lam, obj, u));
    return s.status == LpStatus::Optimal ? s.objective : std::numeric_limits<double>::infinity();
  };
  const double full = solve_selection(build_equilibrium_lp(net, R, lam, obj)).objective;
  EXPECT_NEAR(cost({}), full, 1e-9);
  double prev = cost({});
  for (const std::vector<int>& u : {std::vector<int>{2}, std::vector<int>{2, 4}, std::vector<int>{2, 4, 3}}) {
    const double c = cost(u);
    EXPECT_GE(c, prev - 1e-9);
    prev = c;
  }
}

TEST(Horizon, SingleStepFromEmptyIsZero) {
  const Network net = ramp_pair();
  const Inflows none = Inflows::constant(net, Eigen::VectorXd::Zero(2));
  const HorizonLp h = build_horizon_lp(net, TurningMatrix::uniform(net), none, Eigen::VectorXd::Zero(2), 0.0, 0.5, 0.5,
                                       Objective::total_volume(net));
  EXPECT_EQ(h.steps, 1);
  const HorizonSolution s = solve_horizon(h);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.objective, 0.0, 1e-12);
}

TEST(Horizon, DrainingAsFastAsPossibleIsOptimalOnARampPair) {
  // With no arrivals and slack supply downstream, every vehicle should leave the on-ramp at full demand.
  // The uncontrolled simulation does exactly that, so it is the oracle for the whole planned path.
  const Network net = ramp_pair();
  const TurningMatrix R = TurningMatrix::uniform(net);
  const Inflows none = Inflows::constant(net, Eigen::VectorXd::Zero(2));
  const Eigen::VectorXd rho0 = (Eigen::VectorXd(2) << 30.0, 5.0).finished();
  const double dt = 0.5, H = 10.0;
  const HorizonLp h = build_horizon_lp(net, R, none, rho0, 0.0, H, dt, Objective::total_volume(net), OffRampDynamics::Exact);
  const HorizonSolution s = solve_horizon(h);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  SimConfig cfg;
  cfg.dt = dt;
  cfg.horizon = H;
  cfg.R = R;
  cfg.inflows = none;
  const Trajectory tr = simulate(net, cfg, rho0);
  // The last transfer is cost-neutral (both cells weigh 1 in x(K)), so only x(0..K-1) and the cost are unique.
  for (int k = 0; k < h.steps; ++k)
    EXPECT_LT((s.x[static_cast<std::size_t>(k)] - tr.states.row(k).transpose()).lpNorm<Eigen::Infinity>(), 1e-8) << "k " << k;
  EXPECT_NEAR(s.objective, horizon_cost(tr, Eigen::VectorXd::Ones(2), dt, h.steps), 1e-7);
}

TEST(Horizon, EvacuationOptimumBeatsTheUncontrolledPath) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Objective evac = Objective::evacuation(net);
  for (int i = 0; i < net.num_cells(); ++i)
    EXPECT_DOUBLE_EQ(evac.eta[i], net.is_off_ramp(i) ? -net.cell(i).v / net.cell(i).length : 0.0);
  const Inflows in = Inflows::constant(net, ramp_inflow(net, 12.0));
  const Eigen::VectorXd rho0 = (Eigen::VectorXd(6) << 40, 100, 150, 150, 10, 10).finished();
  const double dt = 1.0 / 6.0, H = 5.0;
  const HorizonLp h = build_horizon_lp(net, R, in, rho0, 0.0, H, dt, evac, OffRampDynamics::Exact);
  const HorizonSolution s = solve_horizon(h);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  SimConfig cfg;
  cfg.dt = dt;
  cfg.horizon = H;
  cfg.R = R;
  cfg.inflows = in;
  const Trajectory tr = simulate(net, cfg, rho0);
  EXPECT_LE(s.objective, horizon_cost(tr, evac.eta, dt, h.steps) + 1e-7);
}

TEST(Horizon, RelaxedOffRampRowsGoSlackUnderVolumeMinimization) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net);
  const Inflows in = Inflows::constant(net, ramp_inflow(net, 12.0));
  const Eigen::VectorXd rho0 = (Eigen::VectorXd(6) << 40, 100, 150, 150, 10, 10).finished();
  const HorizonLp relaxed = build_horizon_lp(net, R, in, rho0, 0.0, 5.0, 1.0 / 6.0, Objective::total_volume(net));
  const HorizonSolution sr = solve_horizon(relaxed);
  ASSERT_EQ(sr.status, LpStatus::Optimal);
  EXPECT_GT(offramp_slack(net, relaxed, sr), 1e-3);
  const HorizonLp exact =
      build_horizon_lp(net, R, in, rho0, 0.0, 5.0, 1.0 / 6.0, Objective::total_volume(net), OffRampDynamics::Exact);
  const HorizonSolution se = solve_horizon(exact);
  ASSERT_EQ(se.status, LpStatus::Optimal);
  EXPECT_LT(offramp_slack(net, exact, se), 1e-9);
  EXPECT_LE(sr.objective, se.objective + 1e-9);  // relaxing can only lower the optimum
}

TEST(Mpc, ExactPlansAreTrackedBySimulation) {
  const Network net = bottleneck_line();
  MpcConfig cfg;
  cfg.duration = 20.0;
  cfg.policy = Policy::non_fifo();
  cfg.objective = Objective::total_volume(net);
  cfg.offramps = OffRampDynamics::Exact;
  const Eigen::VectorXd rho0 = (Eigen::VectorXd(6) << 40, 100, 150, 150, 10, 10).finished();
  const MpcResult r = mpc_loop(net, bottleneck_turns(net), Inflows::constant(net, ramp_inflow(net, 12.0)), rho0, cfg);
  ASSERT_FALSE(r.aborted) << r.diagnosis;
  EXPECT_EQ(r.solves, 4);  // each 5 min plan runs to completion before the next solve
  EXPECT_LT(r.max_tracking_error, 1e-6);
  EXPECT_NEAR(r.cumulative_cost, cumulative_cost(r.trajectory, cfg.dt), 1e-9);
}

TEST(SynthesisProperty, ExtractedControlsHoldTheSelectedState) {
  const props::Outcome o = props::extraction_suite(505, 50);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(SynthesisProperty, PeriodicProgramClosesItsOrbit) {
  const props::Outcome o = props::periodic_suite();
  EXPECT_TRUE(o.pass) << o.detail;
}
