#include "trafficnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

namespace trafficnet {

FreeFlowEquilibrium free_flow_equilibrium(const Network& net, const TurningMatrix& R, const Eigen::VectorXd& lambda) {
  const int n = net.num_cells();
  if (lambda.size() != n) throw PreconditionError("inflow vector has the wrong size");
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(n);
  for (int i : net.on_ramps()) lam[i] = lambda[i];

  Eigen::SparseMatrix<double> M(n, n);
  M.setIdentity();
  M -= Eigen::SparseMatrix<double>(R.to_sparse(net).transpose());
  M.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) throw TopologyError("I - R^T is singular: some cell cannot reach an off-ramp");

  FreeFlowEquilibrium eq;
  eq.f = lu.solve(lam);
  if (lu.info() != Eigen::Success || !eq.f.allFinite()) throw TopologyError("I - R^T solve failed");
  eq.residual = (M * eq.f - lam).lpNorm<Eigen::Infinity>();
  eq.rho.resize(n);
  for (int i = 0; i < n; ++i) {
    const Cell& c = net.cell(i);
    eq.rho[i] = eq.f[i] * c.length / c.v;
    const Limit C = capacity(c);
    if (C.bounded() && !(eq.f[i] < C.value())) {
      eq.feasible = false;
      eq.over_capacity.push_back(i);
    }
  }
  return eq;
}

JacobianReport jacobian_free_flow_stable(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& rho_star,
                                         const Controls& controls) {
  (void)rho_star;  // linear demand: d' does not depend on the state
  const int n = net.num_cells();
  const TurningMatrix& R = controls.R ? *controls.R : R_u;
  JacobianReport rep;
  rep.J = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < n; ++e) {
    const Cell& c = net.cell(e);
    const double dprime = controls.alpha_of(e) * c.v / c.length;
    rep.J(e, e) = -dprime;
    for (int p = net.pairs_begin(e); p < net.pairs_end(e); ++p) rep.J(net.pair(p).to, e) += R[p] * dprime;
  }

  rep.metzler = true;
  for (int j = 0; j < n; ++j)
    for (int e = 0; e < n; ++e)
      if (j != e && rep.J(j, e) < 0.0) rep.metzler = false;

  rep.column_sums_ok = true;
  const Eigen::RowVectorXd sums = rep.J.colwise().sum();
  for (int e = 0; e < n; ++e) {
    const double scale = std::abs(rep.J(e, e));
    if (sums[e] > 1e-12 * std::max(1.0, scale)) rep.column_sums_ok = false;
    if (net.is_off_ramp(e) && !(sums[e] < 0.0)) rep.column_sums_ok = false;
  }

  Eigen::EigenSolver<Eigen::MatrixXd> es(rep.J, /*computeEigenvectors=*/false);
  rep.spectral_abscissa = es.eigenvalues().real().maxCoeff();
  rep.stable = rep.spectral_abscissa < 0.0;
  return rep;
}

bool DualGraph::has_indeterminate() const {
  return std::any_of(edges.begin(), edges.end(), [](const DualEdge& e) { return e.indeterminate; });
}

bool DualGraph::has_edge(int from, int to) const {
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{from, to}, [](const DualEdge& e, const auto& key) {
    return std::pair{e.from, e.to} < key;
  });
  return it != edges.end() && it->from == from && it->to == to;
}

DualGraph dual_graph(const Network& net, const Policy& policy, const TurningMatrix& R, const Eigen::VectorXd& rho,
                     const Controls& controls, const Eigen::VectorXd& lambda, double step_scale) {
  const int n = net.num_cells();
  DualGraph g;
  g.num_cells = n;
  const FlowMatrix base = compute_flows(net, policy, R, rho, controls, lambda);
  Eigen::VectorXd probe = rho;

  for (int i = 0; i < n; ++i) {
    const double h = step_scale * std::max(1.0, rho[i]);
    const Limit& B = net.cell(i).jam;
    const bool can_up = !B.bounded() || rho[i] + h <= B.value();
    const bool can_dn = rho[i] - h >= 0.0;

    FlowMatrix up, dn;
    if (can_up) {
      probe[i] = rho[i] + h;
      up = compute_flows(net, policy, R, probe, controls, lambda);
    }
    if (can_dn) {
      probe[i] = rho[i] - h;
      dn = compute_flows(net, policy, R, probe, controls, lambda);
    }
    probe[i] = rho[i];

    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double in_f = 0, out_f = 0, in_b = 0, out_b = 0;
      if (can_up) {
        in_f = (up.inflow[j] - base.inflow[j]) / h;
        out_f = (up.outflow[j] - base.outflow[j]) / h;
      }
      if (can_dn) {
        in_b = (base.inflow[j] - dn.inflow[j]) / h;
        out_b = (base.outflow[j] - dn.outflow[j]) / h;
      }
      const bool edge_f = in_f > kDualThreshold || out_f < -kDualThreshold;
      const bool edge_b = in_b > kDualThreshold || out_b < -kDualThreshold;

      DualEdge e{i, j, false, false, false};
      if (can_up && can_dn) {
        const double in_c = 0.5 * (in_f + in_b);
        const double out_c = 0.5 * (out_f + out_b);
        if (edge_f != edge_b) {
          e.indeterminate = true;
          e.via_inflow = in_c > kDualThreshold;
          e.via_outflow = out_c < -kDualThreshold;
        } else if (edge_f) {
          e.via_inflow = in_c > kDualThreshold || (in_f > kDualThreshold && in_b > kDualThreshold);
          e.via_outflow = out_c < -kDualThreshold || (out_f < -kDualThreshold && out_b < -kDualThreshold);
        } else {
          continue;
        }
      } else if (can_up) {
        if (!edge_f) continue;
        e.via_inflow = in_f > kDualThreshold;
        e.via_outflow = out_f < -kDualThreshold;
      } else if (can_dn) {
        if (!edge_b) continue;
        e.via_inflow = in_b > kDualThreshold;
        e.via_outflow = out_b < -kDualThreshold;
      } else {
        continue;
      }
      g.edges.push_back(e);
    }
  }
  return g;
}

void write_dot(std::ostream& os, const DualGraph& graph) {
  for (const DualEdge& e : graph.edges)
    if (!e.indeterminate) os << e.from << " -> " << e.to << '\n';
}

RootedReport is_rooted(const DualGraph& graph, const std::vector<int>& off_ramps) {
  const int n = graph.num_cells;
  std::vector<std::vector<int>> preds(static_cast<std::size_t>(n));
  RootedReport rep;
  for (const DualEdge& e : graph.edges) {
    if (e.indeterminate) {
      rep.inconclusive = true;
      continue;
    }
    preds[static_cast<std::size_t>(e.to)].push_back(e.from);
  }

  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> frontier;
  for (int r : off_ramps)
    if (!seen[static_cast<std::size_t>(r)]) {
      seen[static_cast<std::size_t>(r)] = 1;
      frontier.push_back(r);
    }
  while (!frontier.empty()) {
    rep.layers.push_back(frontier);
    std::vector<int> next;
    for (int j : frontier)
      for (int i : preds[static_cast<std::size_t>(j)])
        if (!seen[static_cast<std::size_t>(i)]) {
          seen[static_cast<std::size_t>(i)] = 1;
          next.push_back(i);
        }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  for (int i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)]) rep.unreached.push_back(i);
  rep.rooted = rep.unreached.empty();
  return rep;
}

const char* to_string(Regime r) { return r == Regime::Congested ? "congested" : "free-flow"; }

std::vector<int> EquilibriumReport::congested() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < regime.size(); ++i)
    if (regime[i] == Regime::Congested) out.push_back(static_cast<int>(i));
  return out;
}

void classify(const Network& net, const Policy& policy, const TurningMatrix& R_u, const Eigen::VectorXd& lambda,
              const Controls& controls, EquilibriumReport& rep) {
  const int n = net.num_cells();
  const TurningMatrix& R = controls.R ? *controls.R : R_u;
  rep.flows = compute_flows(net, policy, R_u, rep.rho, controls, lambda);
  rep.residual = rep.flows.net_rate().lpNorm<Eigen::Infinity>();

  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = demand(net.cell(i), rep.rho[i], controls.alpha_of(i));

  rep.regime.assign(static_cast<std::size_t>(n), Regime::FreeFlow);
  for (int j = 0; j < n; ++j) {
    if (net.pairs_into(j).empty()) continue;
    double D = 0.0;
    for (int p : net.pairs_into(j)) D += R[p] * d[net.pair(p).from];
    const Limit s = supply(net.cell(j), rep.rho[j], controls.beta_of(j));
    if (s.bounded() && D > s.value() + 1e-9 * std::max(1.0, s.value()))
      rep.regime[static_cast<std::size_t>(j)] = Regime::Congested;
  }

  rep.outflow_free.assign(static_cast<std::size_t>(n), true);
  for (int p = 0; p < net.num_pairs(); ++p) {
    const double want = R[p] * d[net.pair(p).from];
    if (std::abs(rep.flows.pair_flow[p] - want) > 1e-9 * std::max(1.0, want))
      rep.outflow_free[static_cast<std::size_t>(net.pair(p).from)] = false;
  }

  rep.rooted = is_rooted(dual_graph(net, policy, R_u, rep.rho, controls, lambda), net.off_ramps());
  rep.gas = rep.converged && policy.monotone() && rep.rooted.rooted && !rep.rooted.inconclusive;
}

EquilibriumReport find_equilibrium_by_simulation(const Network& net, const Policy& policy, const TurningMatrix& R,
                                                 const Eigen::VectorXd& lambda, const Controls& controls,
                                                 const EquilibriumOptions& opt) {
  if (cfl_number(net, opt.dt) > 1.0 + 1e-12) throw PreconditionError("CFL number exceeds 1");
  const double bound = 2.0 * total_jam(net);
  const int window = std::max(1, static_cast<int>(std::round(opt.window / opt.dt)));
  const long max_steps = static_cast<long>(std::ceil(opt.max_time / opt.dt));

  EquilibriumReport rep;
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(net.num_cells());
  double prev_total = 0.0;
  int rising = 0;
  for (long k = 0; k < max_steps; ++k) {
    StepResult s = step(net, policy, R, rho, controls, lambda, opt.dt);
    const double change = (s.rho - rho).lpNorm<Eigen::Infinity>();
    rho = std::move(s.rho);
    rep.time = (k + 1) * opt.dt;
    if (change < opt.tol) {
      rep.converged = true;
      break;
    }
    const double total = rho.sum();
    rising = total > prev_total ? rising + 1 : 0;
    prev_total = total;
    if (rising >= window && total > bound) {
      rep.divergent = true;
      rep.diagnosis = "no bounded equilibrium reached: total volume grows without bound";
      break;
    }
  }
  rep.rho = rho;
  if (!rep.converged && !rep.divergent) rep.diagnosis = "no equilibrium reached within the time limit";
  classify(net, policy, R, lambda, controls, rep);
  return rep;
}

}  // namespace trafficnet
