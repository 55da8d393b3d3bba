#include "trafficnet/scenario.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace trafficnet {

namespace {

std::string locate(int line, int field, const std::string& message, const std::string& source) {
  std::string at = source;
  if (line > 0) at += (at.empty() ? "line " : ":") + std::to_string(line);
  if (line > 0 && field > 0) at += ", field " + std::to_string(field);
  return at.empty() ? message : at + ": " + message;
}

}  // namespace

ScenarioError::ScenarioError(int line, int field, const std::string& message, const std::string& source)
    : std::runtime_error(locate(line, field, message, source)), line_(line), field_(field), detail_(message) {}

namespace {

struct Line {
  int number = 0;
  std::vector<std::string> f;
};

std::vector<Line> tokenize(std::istream& is) {
  std::vector<Line> out;
  std::string text;
  for (int n = 1; std::getline(is, text); ++n) {
    if (auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
    std::istringstream ss(text);
    Line l{n, {}};
    for (std::string tok; ss >> tok;) l.f.push_back(tok);
    if (!l.f.empty()) out.push_back(std::move(l));
  }
  return out;
}

// Field indices are 0-based here and reported 1-based.
class Reader {
 public:
  explicit Reader(const Line& l) : l_(l) {}

  [[noreturn]] void fail(std::size_t k, const std::string& msg) const {
    throw ScenarioError(l_.number, static_cast<int>(k) + 1, msg);
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ScenarioError(l_.number, 0, msg); }

  void arity(std::size_t lo, std::size_t hi) const {
    if (l_.f.size() < lo || l_.f.size() > hi)
      fail("'" + l_.f[0] + "' takes " + (lo == hi ? std::to_string(lo - 1) : std::to_string(lo - 1) + "-" + std::to_string(hi - 1)) +
           " arguments, got " + std::to_string(l_.f.size() - 1));
  }
  std::size_t size() const { return l_.f.size(); }
  const std::string& word(std::size_t k) const {
    if (k >= l_.f.size()) fail(k, "missing field");
    return l_.f[k];
  }

  double number(std::size_t k, const char* what) const {
    const std::string& s = word(k);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      fail(k, std::string("expected a number for ") + what + ", got '" + s + "'");
    return v;
  }
  int integer(std::size_t k, const char* what) const {
    const std::string& s = word(k);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(k, std::string("expected an integer for ") + what + ", got '" + s + "'");
    return v;
  }
  Limit limit(std::size_t k, const char* what) const {
    return word(k) == "inf" ? Limit::unbounded() : Limit(number(k, what));
  }
  int cell(std::size_t k, const Network& net) const {
    const auto i = net.find_cell(word(k));
    if (!i) fail(k, "unknown cell '" + word(k) + "'");
    return *i;
  }

 private:
  const Line& l_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(const Limit& l) { return l.bounded() ? fmt(l.value()) : "inf"; }

void require_clean(const std::vector<Violation>& vs, const std::string& what) {
  if (vs.empty()) return;
  std::string msg = what + ": " + vs.front().rule + " at " + vs.front().where;
  if (!vs.front().detail.empty()) msg += " (" + vs.front().detail + ")";
  if (vs.size() > 1) msg += " and " + std::to_string(vs.size() - 1) + " more";
  throw ScenarioError(0, 0, msg);
}

Network build_network(const std::vector<Line>& lines, std::string& name) {
  std::optional<std::pair<int, int>> nodes;
  int nodes_line = 0;
  std::vector<Cell> cells;
  std::vector<int> tail, head;
  std::map<std::string, int> seen;
  for (const Line& l : lines) {
    const Reader r(l);
    if (l.f[0] == "name") {
      r.arity(2, 2);
      name = l.f[1];
    } else if (l.f[0] == "nodes") {
      r.arity(3, 3);
      if (nodes) r.fail("duplicate 'nodes' line");
      nodes = {r.integer(1, "node count"), r.integer(2, "external node")};
      nodes_line = l.number;
      if (nodes->first < 1) r.fail(1, "node count must be positive");
      if (nodes->second < 0 || nodes->second >= nodes->first) r.fail(2, "external node out of range");
    } else if (l.f[0] == "cell") {
      r.arity(9, 10);
      if (!nodes) r.fail("'cell' before 'nodes'");
      if (!seen.emplace(l.f[1], l.number).second) r.fail(1, "duplicate cell '" + l.f[1] + "'");
      CellKind kind{};
      try {
        kind = cell_kind_from_string(l.f[2]);
      } catch (const PreconditionError& e) {
        r.fail(2, e.what());
      }
      const int t = r.integer(3, "tail node"), h = r.integer(4, "head node");
      if (t < 0 || t >= nodes->first) r.fail(3, "tail node out of range");
      if (h < 0 || h >= nodes->first) r.fail(4, "head node out of range");
      const double L = r.number(5, "length");
      const double v = r.number(6, "free-flow speed"), w = r.number(7, "wave speed");
      if (!(L > 0.0)) r.fail(5, "length must be positive");
      if (!(v > 0.0)) r.fail(6, "free-flow speed must be positive");
      if (!(w > 0.0)) r.fail(7, "wave speed must be positive");
      const Limit jam = r.limit(8, "jam density");
      const Limit sat = l.f.size() > 9 ? r.limit(9, "saturation") : Limit::unbounded();
      cells.push_back(Cell::from_table(l.f[1], kind, L, v, w, jam, sat));
      tail.push_back(t);
      head.push_back(h);
    }
  }
  if (!nodes) throw ScenarioError(0, 0, "missing 'nodes' line");
  if (cells.empty()) throw ScenarioError(nodes_line, 0, "no cells");
  try {
    Network net(std::move(cells), std::move(tail), std::move(head), nodes->first, nodes->second);
    require_clean(validate(net), "invalid network");
    return net;
  } catch (const PreconditionError& e) {
    throw ScenarioError(0, 0, std::string("invalid network: ") + e.what());
  } catch (const TopologyError& e) {
    throw ScenarioError(0, 0, std::string("invalid network: ") + e.what());
  }
}

}  // namespace

Policy parse_policy(const std::string& name, double theta, const Network& net) {
  if (name == "line") return Policy::line();
  if (name == "fifo") return Policy::fifo();
  if (name == "nonfifo" || name == "non-fifo") return Policy::non_fifo();
  if (name == "priority") return Policy::priority_merge(net);
  if (name == "mixture") {
    if (!(theta >= 0.0 && theta <= 1.0)) throw PreconditionError("mixture weight must lie in [0, 1]");
    return Policy::mixture(theta);
  }
  throw PreconditionError("unknown policy '" + name + "'");
}

Scenario load_scenario(std::istream& is) {
  const std::vector<Line> lines = tokenize(is);
  Scenario sc;
  sc.net = build_network(lines, sc.name);
  const Network& net = sc.net;
  const int n = net.num_cells();

  bool any_turn = false;
  sc.R = TurningMatrix::uniform(net);
  sc.inflows = Inflows(n);
  sc.rho0 = Eigen::VectorXd::Zero(n);
  sc.objective = Objective::total_volume(net);
  std::vector<std::pair<int, double>> priorities;
  std::map<double, Controls> controls;
  std::vector<const Line*> overrides;  // per-cell lines applied after their base line

  for (const Line& l : lines) {
    const Reader r(l);
    const std::string& key = l.f[0];
    if (key == "name" || key == "nodes" || key == "cell") continue;
    if (key == "policy") {
      r.arity(2, 3);
      const double theta = l.f[1] == "mixture" ? (r.arity(3, 3), r.number(2, "mixture weight")) : 0.0;
      if (l.f[1] != "mixture") r.arity(2, 2);
      try {
        sc.policy = parse_policy(l.f[1], theta, net);
      } catch (const PreconditionError& e) {
        r.fail(l.f[1] == "mixture" ? 2 : 1, e.what());
      }
    } else if (key == "priority") {
      r.arity(3, 3);
      const int i = r.cell(1, net);
      const double p = r.number(2, "priority");
      if (!(p >= 0.0 && p <= 1.0)) r.fail(2, "priority must lie in [0, 1]");
      priorities.emplace_back(i, p);
    } else if (key == "turns") {
      r.arity(2, 2);
      if (l.f[1] != "uniform") r.fail(1, "expected 'uniform'");
    } else if (key == "turn") {
      r.arity(4, 4);
      const int i = r.cell(1, net), j = r.cell(2, net);
      const double v = r.number(3, "turning fraction");
      if (!net.pair_index(i, j)) r.fail(2, "'" + l.f[2] + "' is not downstream of '" + l.f[1] + "'");
      if (!any_turn) sc.R = TurningMatrix(net);
      any_turn = true;
      sc.R.set(net, i, j, v);
    } else if (key == "inflow") {
      r.arity(4, 1000000);
      const int i = r.cell(1, net);
      if (!net.is_on_ramp(i)) r.fail(1, "inflow on a cell that is not an on-ramp");
      const std::string& type = l.f[2];
      try {
        if (type == "constant") {
          r.arity(4, 4);
          sc.inflows.set(i, InflowProfile::constant(r.number(3, "inflow")));
        } else if (type == "piecewise" || type == "periodic") {
          const std::size_t first = type == "periodic" ? 4 : 3;
          if (l.f.size() < first + 2 || (l.f.size() - first) % 2 != 0) r.fail("expected breakpoint/value pairs");
          std::vector<double> bp, val;
          for (std::size_t k = first; k < l.f.size(); k += 2) {
            bp.push_back(r.number(k, "breakpoint"));
            val.push_back(r.number(k + 1, "inflow"));
          }
          sc.inflows.set(i, type == "periodic"
                                ? InflowProfile::periodic(r.number(3, "period"), std::move(bp), std::move(val))
                                : InflowProfile::piecewise(std::move(bp), std::move(val)));
        } else {
          r.fail(2, "unknown inflow type '" + type + "'");
        }
      } catch (const PreconditionError& e) {
        r.fail(e.what());
      }
    } else if (key == "incident") {
      r.arity(5, 5);
      Incident inc;
      inc.time = r.number(1, "incident time");
      inc.cell = r.cell(2, net);
      if (l.f[3] == "speed") {
        inc.v_mph = r.number(4, "speed");
        if (!(*inc.v_mph > 0.0)) r.fail(4, "speed must be positive");
      } else if (l.f[3] == "capacity") {
        inc.capacity = r.number(4, "capacity");
        if (!(*inc.capacity > 0.0)) r.fail(4, "capacity must be positive");
      } else {
        r.fail(3, "expected 'speed' or 'capacity'");
      }
      sc.incidents.push_back(inc);
    } else if (key == "dt") {
      r.arity(2, 2);
      const double s = r.number(1, "step (seconds)");
      if (!(s > 0.0)) r.fail(1, "step must be positive");
      sc.dt = s / 60.0;
    } else if (key == "horizon") {
      r.arity(2, 2);
      sc.horizon = r.number(1, "horizon (minutes)");
      if (!(sc.horizon >= 0.0)) r.fail(1, "horizon must be non-negative");
    } else if (key == "t0") {
      r.arity(2, 2);
      sc.t0 = r.number(1, "start time");
    } else if (key == "initial-jam") {
      r.arity(3, 3);
      const double frac = r.number(1, "jam fraction"), ramp = r.number(2, "on-ramp volume");
      if (!(frac >= 0.0 && frac <= 1.0)) r.fail(1, "jam fraction must lie in [0, 1]");
      if (!(ramp >= 0.0)) r.fail(2, "on-ramp volume must be non-negative");
      for (int i = 0; i < n; ++i) sc.rho0[i] = net.cell(i).jam.bounded() ? frac * net.cell(i).jam.value() : ramp;
    } else if (key == "initial" || key == "eta") {
      r.arity(3, 3);
      r.cell(1, net);
      r.number(2, key == "eta" ? "weight" : "volume");
      overrides.push_back(&l);
    } else if (key == "objective") {
      r.arity(2, 2);
      if (l.f[1] == "total-volume")
        sc.objective = Objective::total_volume(net);
      else if (l.f[1] == "evacuation")
        sc.objective = Objective::evacuation(net);
      else if (l.f[1] == "zero")
        sc.objective = Objective{Eigen::VectorXd::Zero(n)};
      else
        r.fail(1, "unknown objective '" + l.f[1] + "'");
    } else if (key == "control") {
      r.arity(5, 6);
      const double t = r.number(1, "control time");
      const std::string& kind = l.f[2];
      const int i = r.cell(3, net);
      Controls& c = controls[t];
      if (kind == "alpha") {
        r.arity(5, 5);
        const double a = r.number(4, "alpha");
        if (!(a >= 0.0 && a <= 1.0)) r.fail(4, "alpha must lie in [0, 1]");
        if (c.alpha.size() == 0) c.alpha = Eigen::VectorXd::Ones(n);
        c.alpha[i] = a;
      } else if (kind == "beta") {
        r.arity(5, 5);
        const Limit b = r.limit(4, "beta");
        if (b.bounded() && !(b.value() >= 0.0)) r.fail(4, "beta must be non-negative");
        if (c.beta.empty()) c.beta.assign(static_cast<std::size_t>(n), Limit::unbounded());
        c.beta[static_cast<std::size_t>(i)] = b;
      } else if (kind == "R") {
        r.arity(6, 6);
        const int j = r.cell(4, net);
        if (!net.pair_index(i, j)) r.fail(4, "'" + l.f[4] + "' is not downstream of '" + l.f[3] + "'");
        if (!c.R) c.R = TurningMatrix(net);
        c.R->set(net, i, j, r.number(5, "turning fraction"));
      } else {
        r.fail(2, "unknown control kind '" + kind + "'");
      }
    } else if (key == "synthesis") {
      r.arity(2, 3);
      const std::string& k = l.f[1];
      if (k == "none" || k == "case1" || k == "case2") {
        r.arity(2, 2);
        sc.synthesis.kind = k == "none" ? SynthesisKind::None : k == "case1" ? SynthesisKind::Case1 : SynthesisKind::Case2;
      } else if (k == "mpc") {
        r.arity(3, 3);
        sc.synthesis.kind = SynthesisKind::Mpc;
        sc.synthesis.horizon = r.number(2, "MPC horizon");
        if (!(sc.synthesis.horizon > 0.0)) r.fail(2, "MPC horizon must be positive");
      } else if (k == "periodic") {
        r.arity(3, 3);
        sc.synthesis.kind = SynthesisKind::Periodic;
        sc.synthesis.period = r.number(2, "period");
        if (!(sc.synthesis.period > 0.0)) r.fail(2, "period must be positive");
      } else {
        r.fail(1, "unknown synthesis request '" + k + "'");
      }
    } else {
      r.fail(0, "unknown keyword '" + key + "'");
    }
  }

  for (const Line* l : overrides) {
    const Reader r(*l);
    const int i = r.cell(1, net);
    const double v = r.number(2, "value");
    if (l->f[0] == "eta") {
      sc.objective.eta[i] = v;
    } else {
      if (v < 0.0 || (net.cell(i).jam.bounded() && v > net.cell(i).jam.value()))
        r.fail(2, "initial volume outside [0, B]");
      sc.rho0[i] = v;
    }
  }
  if (sc.policy.kind == PolicyKind::PriorityMerge)
    for (auto [i, p] : priorities) sc.policy.priority[static_cast<std::size_t>(i)] = p;
  for (auto& [t, c] : controls) sc.controls.append(t, std::move(c));

  require_clean(validate(net, sc.R), "invalid turning matrix");
  require_clean(validate(net, sc.policy), "policy '" + to_string(sc.policy) + "' is undefined on this network");
  try {
    Network cur = net;
    for (const Incident& inc : sc.incidents) {
      cur = apply_incident(cur, inc);
      require_clean(validate(cur), "invalid network after incident on '" + net.cell(inc.cell).name + "'");
    }
  } catch (const PreconditionError& e) {
    throw ScenarioError(0, 0, std::string("incident: ") + e.what());
  }
  if (step_count(sc.horizon, sc.dt) < 0) throw ScenarioError(0, 0, "negative horizon");
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(0, 0, "cannot open scenario file '" + path + "'");
  try {
    return load_scenario(in);
  } catch (const ScenarioError& e) {
    throw ScenarioError(e.line(), e.field(), e.detail(), path);
  }
}

void save_scenario(std::ostream& os, const Scenario& sc) {
  const Network& net = sc.net;
  const int n = net.num_cells();
  auto name = [&](int i) -> const std::string& { return net.cell(i).name; };

  os << "name " << sc.name << '\n';
  os << "nodes " << net.num_nodes() << ' ' << net.external() << '\n';
  for (int i = 0; i < n; ++i) {
    const Cell& c = net.cell(i);
    const Limit jam_per_mile = c.jam.bounded() ? Limit(c.jam.value() / c.length) : Limit::unbounded();
    os << "cell " << c.name << ' ' << to_string(c.kind) << ' ' << net.tail(i) << ' ' << net.head(i) << ' '
       << fmt(c.length) << ' ' << fmt(c.v_mph()) << ' ' << fmt(c.w_mph()) << ' ' << fmt(jam_per_mile);
    if (c.saturation.bounded()) os << ' ' << fmt(c.saturation);
    os << '\n';
  }

  os << "policy " << (sc.policy.kind == PolicyKind::LineCTM        ? "line"
                      : sc.policy.kind == PolicyKind::FIFO         ? "fifo"
                      : sc.policy.kind == PolicyKind::NonFIFO      ? "nonfifo"
                      : sc.policy.kind == PolicyKind::PriorityMerge ? "priority"
                                                                    : "mixture " + fmt(sc.policy.theta))
     << '\n';
  if (sc.policy.kind == PolicyKind::PriorityMerge)
    for (std::size_t i = 0; i < sc.policy.priority.size(); ++i)
      os << "priority " << name(static_cast<int>(i)) << ' ' << fmt(sc.policy.priority[i]) << '\n';

  for (int p = 0; p < net.num_pairs(); ++p)
    os << "turn " << name(net.pair(p).from) << ' ' << name(net.pair(p).to) << ' ' << fmt(sc.R[p]) << '\n';

  for (int i : net.on_ramps()) {
    if (i >= sc.inflows.size()) break;
    const InflowProfile& pr = sc.inflows.profile(i);
    os << "inflow " << name(i);
    if (pr.type() == InflowProfile::Type::Constant) {
      os << " constant " << fmt(pr.values().front());
    } else {
      os << (pr.type() == InflowProfile::Type::Periodic ? " periodic " + fmt(pr.period()) : std::string(" piecewise"));
      for (std::size_t k = 0; k < pr.values().size(); ++k) os << ' ' << fmt(pr.breakpoints()[k]) << ' ' << fmt(pr.values()[k]);
    }
    os << '\n';
  }

  for (const Incident& inc : sc.incidents) {
    os << "incident " << fmt(inc.time) << ' ' << name(inc.cell);
    if (inc.v_mph)
      os << " speed " << fmt(*inc.v_mph);
    else
      os << " capacity " << fmt(inc.capacity.value_or(0.0));
    os << '\n';
  }

  os << "dt " << fmt(sc.dt * 60.0) << '\n';
  os << "horizon " << fmt(sc.horizon) << '\n';
  os << "t0 " << fmt(sc.t0) << '\n';
  for (int i = 0; i < sc.rho0.size(); ++i)
    if (sc.rho0[i] != 0.0) os << "initial " << name(i) << ' ' << fmt(sc.rho0[i]) << '\n';

  if (sc.objective.eta.size() == n && (sc.objective.eta.array() == 1.0).all()) {
    os << "objective total-volume\n";
  } else {
    os << "objective zero\n";
    for (int i = 0; i < sc.objective.eta.size(); ++i)
      if (sc.objective.eta[i] != 0.0) os << "eta " << name(i) << ' ' << fmt(sc.objective.eta[i]) << '\n';
  }

  for (int k = 0; k < sc.controls.size(); ++k) {
    const std::string t = fmt(sc.controls.time(k));
    const Controls& c = sc.controls.segment(k);
    for (int i = 0; i < c.alpha.size(); ++i) os << "control " << t << " alpha " << name(i) << ' ' << fmt(c.alpha[i]) << '\n';
    for (std::size_t i = 0; i < c.beta.size(); ++i)
      os << "control " << t << " beta " << name(static_cast<int>(i)) << ' ' << fmt(c.beta[i]) << '\n';
    if (c.R)
      for (int p = 0; p < net.num_pairs(); ++p)
        os << "control " << t << " R " << name(net.pair(p).from) << ' ' << name(net.pair(p).to) << ' ' << fmt((*c.R)[p])
           << '\n';
  }

  switch (sc.synthesis.kind) {
    case SynthesisKind::None: os << "synthesis none\n"; break;
    case SynthesisKind::Case1: os << "synthesis case1\n"; break;
    case SynthesisKind::Case2: os << "synthesis case2\n"; break;
    case SynthesisKind::Mpc: os << "synthesis mpc " << fmt(sc.synthesis.horizon) << '\n'; break;
    case SynthesisKind::Periodic: os << "synthesis periodic " << fmt(sc.synthesis.period) << '\n'; break;
  }
}

namespace {

bool close(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}
bool close(const Limit& a, const Limit& b, double rel) {
  return a.bounded() == b.bounded() && (!a.bounded() || close(a.value(), b.value(), rel));
}
bool close(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i], rel)) return false;
  return true;
}
bool close(const Controls& a, const Controls& b, double rel) {
  if (!close(a.alpha, b.alpha, rel) || a.beta.size() != b.beta.size() || a.R.has_value() != b.R.has_value()) return false;
  for (std::size_t i = 0; i < a.beta.size(); ++i)
    if (!close(a.beta[i], b.beta[i], rel)) return false;
  return !a.R || close(a.R->values(), b.R->values(), rel);
}

}  // namespace

bool semantically_equal(const Scenario& a, const Scenario& b, double rel, std::string* why) {
  auto no = [&](const std::string& what) {
    if (why) *why = what;
    return false;
  };
  if (a.name != b.name) return no("name");
  const Network &x = a.net, &y = b.net;
  if (x.num_cells() != y.num_cells() || x.num_nodes() != y.num_nodes() || x.external() != y.external())
    return no("network shape");
  for (int i = 0; i < x.num_cells(); ++i) {
    const Cell &p = x.cell(i), &q = y.cell(i);
    if (p.name != q.name || p.kind != q.kind || x.tail(i) != y.tail(i) || x.head(i) != y.head(i))
      return no("cell " + p.name + " identity");
    if (!close(p.length, q.length, rel) || !close(p.v, q.v, rel) || !close(p.w, q.w, rel) || !close(p.jam, q.jam, rel) ||
        !close(p.saturation, q.saturation, rel))
      return no("cell " + p.name + " parameters");
  }
  if (a.policy.kind != b.policy.kind || !close(a.policy.theta, b.policy.theta, rel) ||
      a.policy.priority != b.policy.priority)
    return no("policy");
  if (!close(a.R.values(), b.R.values(), rel)) return no("turning matrix");
  if (!(a.inflows == b.inflows)) return no("inflows");
  if (a.controls.size() != b.controls.size()) return no("control schedule length");
  for (int k = 0; k < a.controls.size(); ++k)
    if (!close(a.controls.time(k), b.controls.time(k), rel) || !close(a.controls.segment(k), b.controls.segment(k), rel))
      return no("control segment " + std::to_string(k));
  if (!(a.synthesis == b.synthesis)) return no("synthesis request");
  if (!close(a.dt, b.dt, rel) || !close(a.horizon, b.horizon, rel) || !close(a.t0, b.t0, rel)) return no("timing");
  if (!close(a.rho0, b.rho0, rel)) return no("initial state");
  if (!close(a.objective.eta, b.objective.eta, rel)) return no("objective");
  if (!(a.incidents == b.incidents)) return no("incidents");
  return true;
}

Network Scenario::initial_network() const {
  Network cur = net;
  for (const Incident& inc : incidents)
    if (inc.time <= t0) cur = apply_incident(cur, inc);
  return cur;
}

SimConfig Scenario::sim_config() const {
  SimConfig c;
  c.dt = dt;
  c.horizon = horizon;
  c.t0 = t0;
  c.policy = policy;
  c.R = R;
  c.inflows = inflows;
  c.controls = controls;
  for (const Incident& inc : incidents)
    if (inc.time > t0) c.incidents.push_back(inc);
  return c;
}

Scenario la_scenario() {
  Benchmark b = generate_la_benchmark();
  Scenario sc;
  sc.name = "la-benchmark";
  sc.inflows = Inflows::constant(b.net, b.lambda);
  sc.rho0 = Eigen::VectorXd::Zero(b.net.num_cells());
  sc.objective = Objective::total_volume(b.net);
  sc.R = std::move(b.R);
  sc.net = std::move(b.net);
  return sc;
}

Objective read_objective_weights(std::istream& is, const Network& net) {
  Objective o{Eigen::VectorXd::Zero(net.num_cells())};
  for (const Line& l : tokenize(is)) {
    const Reader r(l);
    r.arity(2, 2);
    o.eta[r.cell(0, net)] = r.number(1, "weight");
  }
  return o;
}

}  // namespace trafficnet
