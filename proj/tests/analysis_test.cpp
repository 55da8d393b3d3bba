#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "properties.hpp"

using namespace trafficnet;

namespace {

// on -> a -> {b, off1}, b -> c -> off2. c is slow: capacity 8 veh/min.
Network bottleneck_line() {
  auto c = [](const char* n, CellKind k, double v_mph, Limit B) { return Cell::from_table(n, k, 1.0, v_mph, 12.0, B); };
  std::vector<Cell> cells = {c("on", CellKind::OnRamp, 60, Limit::unbounded()), c("a", CellKind::Internal, 60, Limit(200)),
                             c("b", CellKind::Internal, 60, Limit(200)),        c("c", CellKind::Internal, 3, Limit(200)),
                             c("off1", CellKind::OffRamp, 60, Limit(200)),      c("off2", CellKind::OffRamp, 60, Limit(200))};
  return Network(cells, {0, 1, 2, 3, 2, 4}, {1, 2, 3, 4, 0, 0}, 5, 0);
}

TurningMatrix bottleneck_turns(const Network& net, double to_b) {
  TurningMatrix R = TurningMatrix::uniform(net);
  R.set(net, 1, 2, to_b);
  R.set(net, 1, 4, 1.0 - to_b);
  return R;
}

Eigen::VectorXd ramp_inflow(const Network& net, double lam) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(net.num_cells());
  v[0] = lam;
  return v;
}

}  // namespace

TEST(Analysis, FreeFlowEquilibriumMatchesDenseInverse) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 100; ++t) {
    const props::RandomNet rn = props::random_merge_diverge(rng);
    const FreeFlowEquilibrium eq = free_flow_equilibrium(rn.net, rn.R, rn.lambda);
    const int n = rn.net.num_cells();
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd(rn.R.to_sparse(rn.net)).transpose();
    const Eigen::VectorXd f = M.inverse() * rn.lambda;
    EXPECT_LT((eq.f - f).lpNorm<Eigen::Infinity>(), 1e-9 * std::max(1.0, f.maxCoeff())) << "trial " << t;
    EXPECT_LT(eq.residual, 1e-9);
    for (int i = 0; i < n; ++i)
      EXPECT_NEAR(demand(rn.net.cell(i), eq.rho[i]), eq.f[i], 1e-9 * std::max(1.0, eq.f[i]));
  }
}

TEST(Analysis, FreeFlowFlagsOverCapacityCells) {
  const Network net = bottleneck_line();
  const FreeFlowEquilibrium ok = free_flow_equilibrium(net, bottleneck_turns(net, 0.8), ramp_inflow(net, 5.0));
  EXPECT_TRUE(ok.feasible);
  const FreeFlowEquilibrium over = free_flow_equilibrium(net, bottleneck_turns(net, 0.8), ramp_inflow(net, 12.0));
  EXPECT_FALSE(over.feasible);
  EXPECT_EQ(over.over_capacity, std::vector<int>({3}));  // f = 9.6 through b and c; only c is below that
}

TEST(Analysis, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const props::RandomNet rn = props::random_merge_diverge(rng);
    const FreeFlowEquilibrium eq = free_flow_equilibrium(rn.net, rn.R, rn.lambda);
    if (!eq.feasible) continue;
    ++checked;
    const JacobianReport jr = jacobian_free_flow_stable(rn.net, rn.R, eq.rho);
    const int n = rn.net.num_cells();
    const auto g = [&](const Eigen::VectorXd& r) {
      return compute_flows(rn.net, Policy::non_fifo(), rn.R, r, Controls::none(), rn.lambda).net_rate();
    };
    for (int e = 0; e < n; ++e) {
      const double h = 1e-6 * std::max(1.0, eq.rho[e]);
      Eigen::VectorXd up = eq.rho, dn = eq.rho;
      up[e] += h;
      dn[e] -= h;
      const Eigen::VectorXd col = (g(up) - g(dn)) / (2.0 * h);
      EXPECT_LT((jr.J.col(e) - col).lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << t << " column " << e;
    }
    EXPECT_TRUE(jr.metzler);
    EXPECT_TRUE(jr.column_sums_ok);
    EXPECT_TRUE(jr.stable);
    EXPECT_LT(jr.spectral_abscissa, 0.0);
  }
  EXPECT_GT(checked, 20);
}

TEST(Analysis, DualGraphRootedAtFreeFlow) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net, 0.8);
  const Eigen::VectorXd lam = ramp_inflow(net, 5.0);
  const FreeFlowEquilibrium eq = free_flow_equilibrium(net, R, lam);
  const DualGraph g = dual_graph(net, Policy::non_fifo(), R, eq.rho, Controls::none(), lam);
  EXPECT_FALSE(g.has_indeterminate());
  EXPECT_TRUE(g.has_edge(3, 5));  // c's volume drives off2
  const RootedReport r = is_rooted(g, net.off_ramps());
  EXPECT_TRUE(r.rooted);
  EXPECT_TRUE(r.unreached.empty());
  ASSERT_FALSE(r.layers.empty());
  EXPECT_EQ(r.layers[0], net.off_ramps());
  std::ostringstream os;
  write_dot(os, g);
  EXPECT_NE(os.str().find("3 -> 5"), std::string::npos);
}

TEST(Analysis, BottleneckEquilibriumMatchesClosedForm) {
  // c passes C_c = 8 at its critical volume 160. b is supply-limited: s_b = 0.2 (200 - rho_b) = 8.
  // a sheds the rest to off1: 0.2 d_a + 8 = 12, so d_a = rho_a = 20.
  const Network net = bottleneck_line();
  const EquilibriumReport r =
      find_equilibrium_by_simulation(net, Policy::non_fifo(), bottleneck_turns(net, 0.8), ramp_inflow(net, 12.0));
  ASSERT_TRUE(r.converged) << r.diagnosis;
  const Eigen::VectorXd expect = (Eigen::VectorXd(6) << 12.0, 20.0, 160.0, 160.0, 4.0, 8.0).finished();
  EXPECT_LT((r.rho - expect).lpNorm<Eigen::Infinity>(), 1e-3) << r.rho.transpose();
  EXPECT_EQ(r.regime[1], Regime::FreeFlow);
  EXPECT_EQ(r.regime[2], Regime::Congested);
  EXPECT_FALSE(r.outflow_free[1]);  // a -> b is held back
  EXPECT_TRUE(r.outflow_free[4]);
  EXPECT_LT(r.residual, 1e-6);
}

TEST(Analysis, FreeFlowSimulationReachesAnalyticEquilibriumAndIsGas) {
  const Network net = bottleneck_line();
  const TurningMatrix R = bottleneck_turns(net, 0.8);
  const Eigen::VectorXd lam = ramp_inflow(net, 5.0);
  const EquilibriumReport r = find_equilibrium_by_simulation(net, Policy::non_fifo(), R, lam);
  ASSERT_TRUE(r.converged);
  // Stopping on a per-step change of 1e-8 leaves about 1e-8 / (dt v_c / L) = 1.2e-6 in the slow cell.
  EXPECT_LT((r.rho - free_flow_equilibrium(net, R, lam).rho).lpNorm<Eigen::Infinity>(), 1e-5);
  EXPECT_TRUE(r.congested().empty());
  EXPECT_TRUE(r.gas);
}

TEST(Analysis, OverloadedOnRampIsReportedDivergent) {
  // lambda = 40 exceeds a's capacity 200 * 1 * 0.2 / 1.2 = 33.3.
  const Network net = bottleneck_line();
  EquilibriumOptions opt;
  opt.max_time = 24 * 60.0;
  const EquilibriumReport r =
      find_equilibrium_by_simulation(net, Policy::non_fifo(), bottleneck_turns(net, 0.2), ramp_inflow(net, 40.0), Controls::none(), opt);
  EXPECT_FALSE(r.converged);
  EXPECT_TRUE(r.divergent);
  EXPECT_FALSE(r.gas);
  EXPECT_FALSE(r.diagnosis.empty());
}
