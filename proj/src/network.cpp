#include "trafficnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace trafficnet {

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::OnRamp:
      return "onramp";
    case CellKind::OffRamp:
      return "offramp";
    case CellKind::Internal:
      return "internal";
  }
  return "internal";
}

CellKind cell_kind_from_string(const std::string& text) {
  if (text == "onramp") return CellKind::OnRamp;
  if (text == "offramp") return CellKind::OffRamp;
  if (text == "internal") return CellKind::Internal;
  throw PreconditionError("unknown cell kind '" + text + "'");
}

Cell Cell::from_table(std::string name, CellKind kind, double length_mi, double v_mph, double w_mph,
                      Limit jam_per_mile, Limit saturation_per_minute) {
  Cell c;
  c.name = std::move(name);
  c.kind = kind;
  c.length = length_mi;
  c.v = mph(v_mph);
  c.w = mph(w_mph);
  c.jam = jam_per_mile.bounded() ? Limit(jam_per_mile.value() * length_mi) : Limit::unbounded();
  c.saturation = saturation_per_minute;
  return c;
}

double checked_demand(const Cell& cell, double rho, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw PreconditionError("alpha outside [0,1] on " + cell.name);
  if (!(rho >= 0.0) || (cell.jam.bounded() && rho > cell.jam.value()))
    throw PreconditionError("volume outside [0,B] on " + cell.name);
  return demand(cell, rho, alpha);
}

Limit checked_supply(const Cell& cell, double rho, const Limit& beta) {
  if (beta.bounded() && !(beta.value() >= 0.0)) throw PreconditionError("negative beta on " + cell.name);
  if (!(rho >= 0.0) || (cell.jam.bounded() && rho > cell.jam.value()))
    throw PreconditionError("volume outside [0,B] on " + cell.name);
  return supply(cell, rho, beta);
}

std::optional<double> critical_volume(const Cell& cell) {
  if (!cell.jam.bounded()) return std::nullopt;
  const double a = cell.v / cell.length;
  const double b = cell.w / cell.length;
  double rho = b * cell.jam.value() / (a + b);
  if (cell.saturation.bounded()) rho = std::min(rho, cell.saturation.value() / a);
  return rho;
}

Limit capacity(const Cell& cell) {
  if (!cell.jam.bounded()) return cell.saturation;
  const double vw = cell.v * cell.w * (cell.jam.value() / cell.length) / (cell.v + cell.w);
  return min(cell.saturation, Limit(vw));
}

Network::Network(std::vector<Cell> cells, std::vector<int> tail, std::vector<int> head, int num_nodes, int external)
    : cells_(std::move(cells)), tail_(std::move(tail)), head_(std::move(head)), num_nodes_(num_nodes),
      external_(external) {
  if (tail_.size() != cells_.size() || head_.size() != cells_.size())
    throw PreconditionError("tail/head arrays must match the cell count");
  if (external_ < 0 || external_ >= num_nodes_) throw PreconditionError("external node out of range");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (tail_[i] < 0 || tail_[i] >= num_nodes_ || head_[i] < 0 || head_[i] >= num_nodes_)
      throw PreconditionError("node index out of range on cell " + cells_[i].name);
  }
  build_caches();
}

void Network::build_caches() {
  const auto n = cells_.size();
  node_out_.assign(static_cast<std::size_t>(num_nodes_), {});
  node_in_.assign(static_cast<std::size_t>(num_nodes_), {});
  on_ramps_.clear();
  off_ramps_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    node_out_[static_cast<std::size_t>(tail_[i])].push_back(static_cast<int>(i));
    node_in_[static_cast<std::size_t>(head_[i])].push_back(static_cast<int>(i));
    if (cells_[i].kind == CellKind::OnRamp) on_ramps_.push_back(static_cast<int>(i));
    if (cells_[i].kind == CellKind::OffRamp) off_ramps_.push_back(static_cast<int>(i));
  }
  junctions_.clear();
  for (int v = 0; v < num_nodes_; ++v) {
    if (v == external_) continue;
    if (!node_in_[static_cast<std::size_t>(v)].empty() && !node_out_[static_cast<std::size_t>(v)].empty())
      junctions_.push_back(v);
  }
  pairs_.clear();
  pair_offset_.assign(n + 1, 0);
  pairs_into_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    pair_offset_[i] = static_cast<int>(pairs_.size());
    if (head_[i] == external_) continue;
    for (int j : node_out_[static_cast<std::size_t>(head_[i])]) {
      pairs_into_[static_cast<std::size_t>(j)].push_back(static_cast<int>(pairs_.size()));
      pairs_.push_back({static_cast<int>(i), j});
    }
  }
  pair_offset_[n] = static_cast<int>(pairs_.size());
}

const std::vector<int>& Network::downstream(int i) const {
  const int h = head(i);
  return h == external_ ? empty_ : node_out_[static_cast<std::size_t>(h)];
}

const std::vector<int>& Network::upstream(int i) const {
  const int t = tail(i);
  return t == external_ ? empty_ : node_in_[static_cast<std::size_t>(t)];
}

std::optional<int> Network::pair_index(int i, int j) const {
  for (int p = pairs_begin(i); p < pairs_end(i); ++p)
    if (pairs_[static_cast<std::size_t>(p)].to == j) return p;
  return std::nullopt;
}

std::optional<int> Network::find_cell(const std::string& name) const {
  for (std::size_t i = 0; i < cells_.size(); ++i)
    if (cells_[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

int Network::cell_index(const std::string& name) const {
  auto i = find_cell(name);
  if (!i) throw PreconditionError("unknown cell '" + name + "'");
  return *i;
}

Network Network::with_cell(int i, Cell replacement) const {
  Network copy = *this;
  copy.cells_.at(static_cast<std::size_t>(i)) = std::move(replacement);
  copy.build_caches();
  return copy;
}

double TurningMatrix::at(const Network& net, int i, int j) const {
  auto p = net.pair_index(i, j);
  return p ? values_[*p] : 0.0;
}

void TurningMatrix::set(const Network& net, int i, int j, double value) {
  auto p = net.pair_index(i, j);
  if (!p) throw PreconditionError("cells " + net.cell(i).name + " and " + net.cell(j).name + " are not consecutive");
  values_[*p] = value;
}

double TurningMatrix::row_sum(const Network& net, int i) const {
  double s = 0.0;
  for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) s += values_[p];
  return s;
}

Eigen::SparseMatrix<double> TurningMatrix::to_sparse(const Network& net) const {
  std::vector<Eigen::Triplet<double>> nz;
  nz.reserve(static_cast<std::size_t>(net.num_pairs()));
  for (int p = 0; p < net.num_pairs(); ++p)
    if (values_[p] != 0.0) nz.emplace_back(net.pair(p).from, net.pair(p).to, values_[p]);
  Eigen::SparseMatrix<double> R(net.num_cells(), net.num_cells());
  R.setFromTriplets(nz.begin(), nz.end());
  return R;
}

TurningMatrix TurningMatrix::uniform(const Network& net) {
  TurningMatrix R(net);
  for (int i = 0; i < net.num_cells(); ++i) {
    const int k = net.pairs_end(i) - net.pairs_begin(i);
    for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) R[p] = 1.0 / k;
  }
  return R;
}

InflowProfile InflowProfile::constant(double lambda) {
  if (!(lambda >= 0.0)) throw PreconditionError("negative inflow");
  InflowProfile p;
  p.values_ = {lambda};
  return p;
}

InflowProfile InflowProfile::piecewise(std::vector<double> breakpoints, std::vector<double> values) {
  if (breakpoints.empty() || breakpoints.size() != values.size() || breakpoints.front() != 0.0)
    throw PreconditionError("piecewise inflow needs matching breakpoints starting at 0");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end()))
    throw PreconditionError("piecewise inflow breakpoints must be sorted");
  for (double v : values)
    if (!(v >= 0.0)) throw PreconditionError("negative inflow");
  InflowProfile p;
  p.type_ = Type::PiecewiseConstant;
  p.breakpoints_ = std::move(breakpoints);
  p.values_ = std::move(values);
  return p;
}

InflowProfile InflowProfile::periodic(double period, std::vector<double> breakpoints, std::vector<double> values) {
  InflowProfile p = piecewise(std::move(breakpoints), std::move(values));
  if (!(period > 0.0) || p.breakpoints_.back() >= period)
    throw PreconditionError("periodic inflow breakpoints must lie inside [0, T)");
  p.type_ = Type::Periodic;
  p.period_ = period;
  return p;
}

double InflowProfile::operator()(double t) const {
  if (type_ == Type::Constant) return values_.front();
  double s = t;
  if (type_ == Type::Periodic) {
    s = std::fmod(t, period_);
    if (s < 0) s += period_;
  }
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), s);
  const auto k = it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin() - 1);
  return values_[k];
}

Inflows Inflows::constant(const Network& net, const Eigen::VectorXd& lambda) {
  Inflows in(net.num_cells());
  for (int i : net.on_ramps()) in.set(i, InflowProfile::constant(lambda[i]));
  return in;
}

Eigen::VectorXd Inflows::at(const Network& net, double t) const {
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(net.num_cells());
  if (profiles_.empty()) return lambda;
  for (int i : net.on_ramps()) lambda[i] = profiles_.at(static_cast<std::size_t>(i))(t);
  return lambda;
}

std::optional<double> Inflows::period() const {
  std::optional<double> T;
  for (const auto& p : profiles_) {
    if (p.type() == InflowProfile::Type::Constant) continue;
    if (p.type() != InflowProfile::Type::Periodic) return std::nullopt;
    if (T && std::abs(*T - p.period()) > 1e-12) return std::nullopt;
    T = p.period();
  }
  return T;
}

namespace {

std::string cell_label(const Network& net, int i) {
  const auto& name = net.cell(i).name;
  return name.empty() ? "cell " + std::to_string(i) : name;
}

}  // namespace

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  const int n = net.num_cells();
  for (int i = 0; i < n; ++i) {
    const Cell& c = net.cell(i);
    const std::string where = cell_label(net, i);
    if (net.tail(i) == net.head(i)) out.push_back({"self-loop", where, "tail equals head"});
    if (!(c.length > 0.0)) out.push_back({"nonpositive length", where, ""});
    if (!(c.v > 0.0)) out.push_back({"nonpositive free-flow speed", where, ""});
    if (!(c.w > 0.0)) out.push_back({"nonpositive wave speed", where, ""});
    if (c.kind == CellKind::OnRamp && c.jam.bounded())
      out.push_back({"on-ramp jam volume", where, "on-ramps carry the unbounded marker"});
    if (c.kind != CellKind::OnRamp) {
      if (!c.jam.bounded())
        out.push_back({"unbounded jam volume", where, "only on-ramps may be unbounded"});
      else if (!(c.jam.value() > 0.0))
        out.push_back({"nonpositive jam volume", where, ""});
    }
    if (c.saturation.bounded() && !(c.saturation.value() > 0.0))
      out.push_back({"nonpositive supply saturation", where, ""});
    const bool from_outside = net.tail(i) == net.external();
    const bool to_outside = net.head(i) == net.external();
    if (c.kind == CellKind::OnRamp && !from_outside)
      out.push_back({"on-ramp tail", where, "on-ramp must leave the external node"});
    if (c.kind != CellKind::OnRamp && from_outside)
      out.push_back({"external tail", where, "only on-ramps start at the external node"});
    if (c.kind == CellKind::OffRamp && !to_outside)
      out.push_back({"off-ramp head", where, "off-ramp must enter the external node"});
    if (c.kind != CellKind::OffRamp && to_outside)
      out.push_back({"external head", where, "only off-ramps end at the external node"});
    if (c.kind != CellKind::OffRamp && !to_outside && net.downstream(i).empty())
      out.push_back({"dead end", where, "head node has no outgoing cell"});
  }

  // Reverse BFS from the off-ramps over physical adjacency.
  std::vector<char> reaches(static_cast<std::size_t>(n), 0);
  std::deque<int> queue;
  for (int j : net.off_ramps()) {
    reaches[static_cast<std::size_t>(j)] = 1;
    queue.push_back(j);
  }
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (int i : net.upstream(j)) {
      if (!reaches[static_cast<std::size_t>(i)]) {
        reaches[static_cast<std::size_t>(i)] = 1;
        queue.push_back(i);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!reaches[static_cast<std::size_t>(i)])
      out.push_back({"unrooted cell", cell_label(net, i), "no directed path to an off-ramp"});
  return out;
}

std::vector<Violation> validate(const Network& net, const TurningMatrix& R, double tol) {
  std::vector<Violation> out = validate(net);
  if (R.size() != net.num_pairs()) {
    out.push_back({"turning matrix size", "network", "does not match consecutive pairs"});
    return out;
  }
  for (int i = 0; i < net.num_cells(); ++i) {
    for (int p = net.pairs_begin(i); p < net.pairs_end(i); ++p) {
      if (!(R[p] >= 0.0)) {
        std::ostringstream os;
        os << "R = " << R[p] << " toward " << cell_label(net, net.pair(p).to);
        out.push_back({"negative turning fraction", cell_label(net, i), os.str()});
      }
    }
    if (net.is_off_ramp(i)) continue;
    const double s = R.row_sum(net, i);
    if (std::abs(s - 1.0) > tol) {
      std::ostringstream os;
      os << "row sums to " << s;
      out.push_back({"turning row sum", cell_label(net, i), os.str()});
    }
  }
  return out;
}

bool in_state_space(const Network& net, const Eigen::VectorXd& rho, double tol) {
  if (rho.size() != net.num_cells()) return false;
  for (int i = 0; i < net.num_cells(); ++i) {
    if (!(rho[i] >= -tol)) return false;
    const Limit& B = net.cell(i).jam;
    if (B.bounded() && rho[i] > B.value() + tol) return false;
  }
  return true;
}

double total_jam(const Network& net) {
  double s = 0.0;
  for (const auto& c : net.cells())
    if (c.jam.bounded()) s += c.jam.value();
  return s;
}

}  // namespace trafficnet
