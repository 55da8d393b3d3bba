#include <random>

#include <gtest/gtest.h>

#include "trafficnet/network.hpp"

using namespace trafficnet;

namespace {

// on -> a -> {b, off1}, b -> off2
Network diverge_net() {
  std::vector<Cell> cells = {Cell::from_table("on", CellKind::OnRamp, 0.5, 25, 13, Limit::unbounded()),
                             Cell::from_table("a", CellKind::Internal, 2.0, 65, 13, Limit(200)),
                             Cell::from_table("b", CellKind::Internal, 2.0, 65, 13, Limit(200)),
                             Cell::from_table("off1", CellKind::OffRamp, 0.5, 25, 13, Limit(200)),
                             Cell::from_table("off2", CellKind::OffRamp, 0.5, 25, 13, Limit(200))};
  return Network(cells, {0, 1, 2, 2, 3}, {1, 2, 3, 0, 0}, 4, 0);
}

}  // namespace

TEST(Cell, TableUnitsConvertToMinutesAndVehicles) {
  const Cell c = Cell::from_table("m", CellKind::Internal, 2.0, 65.0, 13.0, Limit(200.0));
  EXPECT_DOUBLE_EQ(c.v, 65.0 / 60.0);
  EXPECT_DOUBLE_EQ(c.w, 13.0 / 60.0);
  EXPECT_DOUBLE_EQ(c.jam.value(), 400.0);
  EXPECT_DOUBLE_EQ(c.v_mph(), 65.0);
}

TEST(Cell, DemandAndSupplyAreLinearAndAffine) {
  const Cell c = Cell::from_table("m", CellKind::Internal, 2.0, 60.0, 12.0, Limit(200.0));
  EXPECT_DOUBLE_EQ(demand(c, 100.0), 50.0);          // (1 / 2) * 100
  EXPECT_DOUBLE_EQ(demand(c, 100.0, 0.5), 25.0);
  EXPECT_DOUBLE_EQ(supply(c, 100.0).value(), 30.0);  // (0.2 / 2) * 300
  EXPECT_DOUBLE_EQ(supply(c, 100.0, Limit(7.0)).value(), 7.0);
  EXPECT_FALSE(supply(Cell::from_table("r", CellKind::OnRamp, 1, 25, 13, Limit::unbounded()), 5.0).bounded());
  EXPECT_THROW(checked_demand(c, -1.0), PreconditionError);
  EXPECT_THROW(checked_demand(c, 1.0, 1.5), PreconditionError);
  EXPECT_THROW(checked_supply(c, 401.0), PreconditionError);
}

TEST(Cell, CapacityMatchesBruteForceMaximum) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> L(0.2, 2.0), v(20, 70), w(5, 20), B(100, 500), S(5, 60);
  for (int t = 0; t < 50; ++t) {
    const bool saturated = t % 3 == 0;
    const Cell c = Cell::from_table("c", CellKind::Internal, L(rng), v(rng), w(rng), Limit(B(rng)),
                                    saturated ? Limit(S(rng)) : Limit::unbounded());
    double best = 0.0;
    const int N = 200000;
    for (int k = 0; k <= N; ++k) {
      const double rho = c.jam.value() * k / N;
      best = std::max(best, std::min(demand(c, rho), supply(c, rho).value()));
    }
    EXPECT_NEAR(capacity(c).value(), best, 1e-3 * best) << "trial " << t;
    const auto rc = critical_volume(c);
    ASSERT_TRUE(rc.has_value());
    EXPECT_NEAR(std::min(demand(c, *rc), supply(c, *rc).value()), capacity(c).value(), 1e-9 * best);
  }
}

TEST(Cell, MainlineCapacityFromTable) {
  // v w (B/L) / (v + w) with 65 and 13 mph at 200 veh/mi.
  const Cell c = Cell::from_table("m", CellKind::Internal, 2.0, 65.0, 13.0, Limit(200.0));
  EXPECT_NEAR(capacity(c).value(), (65.0 / 60) * (13.0 / 60) * 200.0 / (78.0 / 60), 1e-12);
  EXPECT_FALSE(capacity(Cell::from_table("r", CellKind::OnRamp, 1, 25, 13, Limit::unbounded())).bounded());
}

TEST(Network, PairsJunctionsAndAdjacency) {
  const Network net = diverge_net();
  EXPECT_EQ(net.num_cells(), 5);
  EXPECT_EQ(net.on_ramps(), std::vector<int>({0}));
  EXPECT_EQ(net.off_ramps(), std::vector<int>({3, 4}));
  EXPECT_EQ(net.downstream(2), std::vector<int>({4}));
  EXPECT_TRUE(net.downstream(3).empty());
  EXPECT_TRUE(net.upstream(0).empty());
  EXPECT_EQ(net.num_pairs(), 4);  // on->a, a->b, a->off1, b->off2
  EXPECT_TRUE(net.pair_index(1, 3).has_value());
  EXPECT_FALSE(net.pair_index(2, 3).has_value());
  EXPECT_EQ(net.pairs_into(2).size(), 1u);
  EXPECT_TRUE(net.is_diverge_node(2));
  EXPECT_TRUE(net.is_merge_node(1));
  EXPECT_EQ(net.cell_index("b"), 2);
  EXPECT_TRUE(validate(net).empty());
}

TEST(Network, ValidationCatchesStructuralErrors) {
  std::vector<Cell> cells = {Cell::from_table("on", CellKind::OnRamp, 1, 25, 13, Limit(10.0)),
                             Cell::from_table("loop", CellKind::Internal, 1, 25, 13, Limit(100.0))};
  const Network bad(cells, {0, 1}, {1, 1}, 2, 0);
  const auto vs = validate(bad);
  auto has = [&](const std::string& rule) {
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.rule == rule; });
  };
  EXPECT_TRUE(has("on-ramp jam volume"));
  EXPECT_TRUE(has("self-loop"));
  EXPECT_TRUE(has("unrooted cell"));
}

TEST(TurningMatrix, UniformRowsAndValidation) {
  const Network net = diverge_net();
  TurningMatrix R = TurningMatrix::uniform(net);
  EXPECT_DOUBLE_EQ(R.at(net, 1, 2), 0.5);
  EXPECT_DOUBLE_EQ(R.at(net, 0, 1), 1.0);
  EXPECT_TRUE(validate(net, R).empty());
  R.set(net, 1, 2, 0.7);
  EXPECT_FALSE(validate(net, R).empty());
  const Eigen::MatrixXd dense(R.to_sparse(net));
  EXPECT_DOUBLE_EQ(dense(1, 2), 0.7);
  EXPECT_DOUBLE_EQ(dense(1, 3), 0.5);
  EXPECT_THROW(R.set(net, 2, 3, 1.0), PreconditionError);
}

TEST(Inflows, ProfilesEvaluatePiecewiseAndPeriodically) {
  const InflowProfile c = InflowProfile::constant(3.0);
  EXPECT_DOUBLE_EQ(c(1e6), 3.0);
  const InflowProfile pw = InflowProfile::piecewise({0.0, 10.0}, {1.0, 2.0});
  EXPECT_DOUBLE_EQ(pw(9.999), 1.0);
  EXPECT_DOUBLE_EQ(pw(10.0), 2.0);
  EXPECT_DOUBLE_EQ(pw(1e3), 2.0);
  const InflowProfile per = InflowProfile::periodic(20.0, {0.0, 5.0}, {4.0, 1.0});
  EXPECT_DOUBLE_EQ(per(3.0), 4.0);
  EXPECT_DOUBLE_EQ(per(23.0), 4.0);
  EXPECT_DOUBLE_EQ(per(27.0), 1.0);
  EXPECT_THROW(InflowProfile::constant(-1.0), PreconditionError);
  EXPECT_THROW(InflowProfile::periodic(4.0, {0.0, 5.0}, {1.0, 1.0}), PreconditionError);

  const Network net = diverge_net();
  Inflows in(net.num_cells());
  in.set(0, per);
  EXPECT_EQ(in.period(), std::optional<double>(20.0));
  EXPECT_DOUBLE_EQ(in.at(net, 27.0)[0], 1.0);
}

TEST(Network, StateSpaceAndTotals) {
  const Network net = diverge_net();
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(5);
  rho[0] = 1e9;  // on-ramps are unbounded
  EXPECT_TRUE(in_state_space(net, rho));
  rho[1] = 401.0;
  EXPECT_FALSE(in_state_space(net, rho));
  EXPECT_DOUBLE_EQ(total_jam(net), 400 + 400 + 100 + 100);
}

TEST(Network, WithCellReplacesOneCell) {
  const Network net = diverge_net();
  Cell c = net.cell(2);
  c.v = 0.01;
  const Network changed = net.with_cell(2, c);
  EXPECT_DOUBLE_EQ(changed.cell(2).v, 0.01);
  EXPECT_FALSE(changed == net);
  EXPECT_TRUE(net.with_cell(2, net.cell(2)) == net);
}
