#include "trafficnet/flows.hpp"

#include <cmath>
#include <sstream>

namespace trafficnet {

namespace {

double mid(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

// kappa = min{1, s / D} with the 0/0 convention kappa = 1.
double proportional(const Limit& s, double D) {
  if (!s.bounded() || D <= 0.0) return 1.0;
  const double sv = std::max(0.0, s.value());
  return sv >= D ? 1.0 : sv / D;
}

struct Evaluated {
  Eigen::VectorXd d;
  std::vector<Limit> s;
};

Evaluated evaluate(const Network& net, const Eigen::VectorXd& rho, const Controls& controls) {
  const int n = net.num_cells();
  Evaluated e{Eigen::VectorXd(n), std::vector<Limit>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    e.d[i] = demand(net.cell(i), rho[i], controls.alpha_of(i));
    e.s[static_cast<std::size_t>(i)] = supply(net.cell(i), rho[i], controls.beta_of(i));
  }
  return e;
}

std::string label(const Network& net, int i) {
  const auto& name = net.cell(i).name;
  return name.empty() ? "cell " + std::to_string(i) : name;
}

std::string node_label(int v) { return "node " + std::to_string(v); }

}  // namespace

Policy Policy::priority_merge(const Network& net) {
  std::vector<double> p(static_cast<std::size_t>(net.num_cells()), 1.0);
  for (int v : net.junctions()) {
    const auto& ins = net.into_node(v);
    if (net.is_merge_node(v) && ins.size() == 2)
      for (int i : ins) p[static_cast<std::size_t>(i)] = 0.5;
  }
  return priority_merge(std::move(p));
}

std::string to_string(const Policy& policy) {
  switch (policy.kind) {
    case PolicyKind::LineCTM:
      return "line";
    case PolicyKind::FIFO:
      return "fifo";
    case PolicyKind::NonFIFO:
      return "nonfifo";
    case PolicyKind::Mixture: {
      std::ostringstream os;
      os.precision(17);
      os << "mixture " << policy.theta;
      return os.str();
    }
    case PolicyKind::PriorityMerge:
      return "priority";
  }
  return "nonfifo";
}

std::vector<Violation> validate(const Network& net, const Policy& policy) {
  std::vector<Violation> out;
  if (policy.kind == PolicyKind::Mixture && !(policy.theta >= 0.0 && policy.theta <= 1.0))
    out.push_back({"mixture parameter", "policy", "theta outside [0,1]"});
  for (int v : net.junctions()) {
    const auto& ins = net.into_node(v);
    const auto& outs = net.out_of_node(v);
    if (policy.kind == PolicyKind::LineCTM && (ins.size() != 1 || outs.size() != 1))
      out.push_back({"line topology", node_label(v), "line policy needs one incoming and one outgoing cell"});
    if (policy.kind != PolicyKind::PriorityMerge) continue;
    if (ins.size() > 1 && outs.size() > 1)
      out.push_back({"merge/diverge topology", node_label(v), "node is neither a merge nor a diverge"});
    if (outs.size() == 1 && ins.size() > 2)
      out.push_back({"priority merge arity", node_label(v), "more than two incoming cells"});
    if (outs.size() == 1) {
      if (policy.priority.size() != static_cast<std::size_t>(net.num_cells())) {
        out.push_back({"priority vector", "policy", "needs one entry per cell"});
        return out;
      }
      double sum = 0.0;
      for (int i : ins) {
        const double p = policy.priority[static_cast<std::size_t>(i)];
        if (!(p >= 0.0)) out.push_back({"negative priority", label(net, i), ""});
        sum += p;
      }
      if (ins.size() == 2 && std::abs(sum - 1.0) > 1e-12)
        out.push_back({"priority sum", node_label(v), "priorities at a merge must sum to 1"});
    }
  }
  return out;
}

double FlowMatrix::at(const Network& net, int i, int j) const {
  auto p = net.pair_index(i, j);
  return p ? pair_flow[*p] : 0.0;
}

Eigen::VectorXd non_fifo_coefficients(const Network& net, const TurningMatrix& R_u, const Eigen::VectorXd& rho,
                                      const Controls& controls) {
  const TurningMatrix& R = controls.R ? *controls.R : R_u;
  const Evaluated e = evaluate(net, rho, controls);
  Eigen::VectorXd D = Eigen::VectorXd::Zero(net.num_cells());
  for (int p = 0; p < net.num_pairs(); ++p) D[net.pair(p).to] += R[p] * e.d[net.pair(p).from];
  Eigen::VectorXd kappa(net.num_cells());
  for (int j = 0; j < net.num_cells(); ++j) kappa[j] = proportional(e.s[static_cast<std::size_t>(j)], D[j]);
  return kappa;
}

FlowMatrix compute_flows(const Network& net, const Policy& policy, const TurningMatrix& R_u, const Eigen::VectorXd& rho,
                         const Controls& controls, const Eigen::VectorXd& lambda) {
  const int n = net.num_cells();
  const TurningMatrix& R = controls.R ? *controls.R : R_u;
  const Evaluated e = evaluate(net, rho, controls);

  FlowMatrix f;
  f.pair_flow = Eigen::VectorXd::Zero(net.num_pairs());
  f.inflow = Eigen::VectorXd::Zero(n);
  f.outflow = Eigen::VectorXd::Zero(n);

  std::vector<double> kappa_nf;
  for (int v : net.junctions()) {
    const auto& ins = net.into_node(v);
    const auto& outs = net.out_of_node(v);

    if (policy.kind == PolicyKind::LineCTM && (ins.size() != 1 || outs.size() != 1))
      throw TopologyError("line policy on a junction that is not 1-in/1-out at " + node_label(v));

    if (policy.kind == PolicyKind::PriorityMerge && outs.size() == 1) {
      const int j = outs.front();
      if (ins.size() > 2) throw TopologyError("priority merge with more than two inputs at " + node_label(v));
      const Limit& s = e.s[static_cast<std::size_t>(j)];
      if (ins.size() == 1) {
        const int i = ins.front();
        const int p = net.pairs_begin(i);
        const double want = R[p] * e.d[i];
        f.pair_flow[p] = s.bounded() ? std::min(want, std::max(0.0, s.value())) : want;
        continue;
      }
      const int i = ins[0], k = ins[1];
      const int pi = net.pairs_begin(i), pk = net.pairs_begin(k);
      const double di = R[pi] * e.d[i], dk = R[pk] * e.d[k];
      if (!s.bounded() || di + dk <= s.value()) {
        f.pair_flow[pi] = di;
        f.pair_flow[pk] = dk;
      } else {
        const double sj = std::max(0.0, s.value());
        if (policy.priority.size() != static_cast<std::size_t>(n))
          throw TopologyError("priority vector does not cover the network");
        f.pair_flow[pi] = mid(di, sj - dk, policy.priority[static_cast<std::size_t>(i)] * sj);
        f.pair_flow[pk] = mid(dk, sj - di, policy.priority[static_cast<std::size_t>(k)] * sj);
      }
      continue;
    }
    if (policy.kind == PolicyKind::PriorityMerge && ins.size() != 1)
      throw TopologyError("priority policy on a node that is neither merge nor diverge at " + node_label(v));

    // Proportional coefficients per outgoing cell.
    kappa_nf.assign(outs.size(), 1.0);
    double kappa_f = 1.0;
    for (std::size_t a = 0; a < outs.size(); ++a) {
      const int j = outs[a];
      double D = 0.0;
      for (int i : ins) D += R[*net.pair_index(i, j)] * e.d[i];
      kappa_nf[a] = proportional(e.s[static_cast<std::size_t>(j)], D);
      kappa_f = std::min(kappa_f, kappa_nf[a]);
    }
    for (int i : ins) {
      for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) {
        const int j = net.pair(p).to;
        const auto a = static_cast<std::size_t>(std::find(outs.begin(), outs.end(), j) - outs.begin());
        double kappa = kappa_nf[a];
        switch (policy.kind) {
          case PolicyKind::FIFO:
            kappa = kappa_f;
            break;
          case PolicyKind::Mixture:
            if (policy.theta == 1.0)
              kappa = kappa_f;
            else if (policy.theta != 0.0)
              kappa = kappa_f + (1.0 - policy.theta) * (kappa_nf[a] - kappa_f);
            break;
          default:
            break;
        }
        f.pair_flow[p] = kappa * (R[p] * e.d[i]);
      }
    }
  }

  for (int p = 0; p < net.num_pairs(); ++p) {
    f.outflow[net.pair(p).from] += f.pair_flow[p];
    f.inflow[net.pair(p).to] += f.pair_flow[p];
  }
  for (int i : net.on_ramps()) f.inflow[i] = lambda.size() ? lambda[i] : 0.0;
  for (int i : net.off_ramps()) f.outflow[i] = e.d[i];
  return f;
}

ConstraintReport check_constraints(const Network& net, const FlowMatrix& flows, const Eigen::VectorXd& rho,
                                   const TurningMatrix& R_u, const Controls& controls, double tol) {
  ConstraintReport rep;
  const TurningMatrix& R = controls.R ? *controls.R : R_u;
  const Evaluated e = evaluate(net, rho, controls);
  auto fail = [&](std::string rule, std::string where, double lhs, double rhs) {
    std::ostringstream os;
    os.precision(12);
    os << lhs << " vs " << rhs;
    rep.violations.push_back({std::move(rule), std::move(where), os.str()});
    rep.pass = false;
  };

  for (int p = 0; p < net.num_pairs(); ++p) {
    const auto [i, j] = net.pair(p);
    const double cap = R[p] * e.d[i];
    const double fij = flows.pair_flow[p];
    const std::string where = "(" + label(net, i) + ", " + label(net, j) + ")";
    if (fij < -tol) fail("negative flow", where, fij, 0.0);
    if (fij > cap + tol * std::max(1.0, cap)) fail("demand-fraction bound", where, fij, cap);
  }
  for (int j = 0; j < net.num_cells(); ++j) {
    const Limit& s = e.s[static_cast<std::size_t>(j)];
    if (!s.bounded() || net.pairs_into(j).empty()) continue;
    double in = 0.0;
    for (int p : net.pairs_into(j)) in += flows.pair_flow[p];
    if (in > s.value() + tol * std::max(1.0, s.value())) fail("supply bound", label(net, j), in, s.value());
  }
  for (int v : net.junctions()) {
    bool enough = true;
    for (int j : net.out_of_node(v)) {
      double D = 0.0;
      for (int p : net.pairs_into(j)) D += R[p] * e.d[net.pair(p).from];
      const Limit& s = e.s[static_cast<std::size_t>(j)];
      if (s.bounded() && D > s.value()) enough = false;
    }
    if (!enough) continue;
    for (int i : net.into_node(v)) {
      for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) {
        const double want = R[p] * e.d[i];
        if (std::abs(flows.pair_flow[p] - want) > tol * std::max(1.0, want))
          fail("free-flow implication", "(" + label(net, i) + ", " + label(net, net.pair(p).to) + ")",
               flows.pair_flow[p], want);
      }
    }
  }
  return rep;
}

MonotonicityReport check_monotonicity(const Network& net, const Policy& policy, const TurningMatrix& R,
                                      const Eigen::VectorXd& rho, const Controls& controls,
                                      const Eigen::VectorXd& lambda, double tol) {
  MonotonicityReport rep;
  const int n = net.num_cells();
  const FlowMatrix base = compute_flows(net, policy, R, rho, controls, lambda);
  Eigen::VectorXd probe = rho;
  for (int j = 0; j < n; ++j) {
    const double h = fd_step(rho[j]);
    const Limit& B = net.cell(j).jam;
    if (rho[j] - h < 0.0 || (B.bounded() && rho[j] + h > B.value())) {
      rep.kinks.push_back(label(net, j) + " at the boundary of S");
      rep.inconclusive = true;
      continue;
    }
    probe[j] = rho[j] + h;
    const FlowMatrix up = compute_flows(net, policy, R, probe, controls, lambda);
    probe[j] = rho[j] - h;
    const FlowMatrix dn = compute_flows(net, policy, R, probe, controls, lambda);
    probe[j] = rho[j];

    auto examine = [&](const Eigen::VectorXd& fu, const Eigen::VectorXd& f0, const Eigen::VectorXd& fd, double sign,
                       const char* what) {
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        const double central = sign * (fu[i] - fd[i]) / (2.0 * h);
        if (central >= tol) continue;
        const double fwd = sign * (fu[i] - f0[i]) / h;
        const double bwd = sign * (f0[i] - fd[i]) / h;
        if (fwd < tol && bwd < tol) {
          std::ostringstream os;
          os.precision(6);
          os << what << " of " << label(net, i) << " has slope " << sign * central << " in " << label(net, j);
          rep.violations.push_back({std::string(what) + " sign", "(" + label(net, i) + ", " + label(net, j) + ")",
                                    os.str()});
          rep.pass = false;
        } else {
          rep.kinks.push_back("(" + label(net, i) + ", " + label(net, j) + ")");
          rep.inconclusive = true;
        }
      }
    };
    examine(up.inflow, base.inflow, dn.inflow, 1.0, "inflow");
    examine(up.outflow, base.outflow, dn.outflow, -1.0, "outflow");
  }
  return rep;
}

}  // namespace trafficnet
