#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace trafficnet {

// Internal units: vehicles, miles, minutes. Speeds are miles per minute.
inline constexpr double kMinutesPerHour = 60.0;
inline double mph(double miles_per_hour) { return miles_per_hour / kMinutesPerHour; }
inline double per_hour_to_per_minute(double veh_per_hour) { return veh_per_hour / kMinutesPerHour; }

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A quantity that is either finite or carries the unbounded marker.
class Limit {
 public:
  constexpr Limit() = default;
  constexpr explicit Limit(double v) : value_(v), bounded_(true) {}
  static constexpr Limit unbounded() { return Limit(); }

  constexpr bool bounded() const { return bounded_; }
  double value() const {
    if (!bounded_) throw PreconditionError("value() of an unbounded limit");
    return value_;
  }
  constexpr double value_or(double fallback) const { return bounded_ ? value_ : fallback; }

  friend constexpr bool operator==(const Limit& a, const Limit& b) {
    return a.bounded_ == b.bounded_ && (!a.bounded_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool bounded_ = false;
};

constexpr Limit min(const Limit& a, const Limit& b) {
  if (!a.bounded()) return b;
  if (!b.bounded()) return a;
  return a.value_or(0) <= b.value_or(0) ? a : b;
}

enum class CellKind { OnRamp, OffRamp, Internal };

const char* to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& text);

struct Cell {
  std::string name;
  CellKind kind = CellKind::Internal;
  double length = 1.0;  // miles
  double v = 1.0;       // free-flow speed, miles per minute
  double w = 1.0;       // wave speed, miles per minute
  Limit jam;            // vehicles; unbounded only for on-ramps
  Limit saturation;     // supply saturation, vehicles per minute

  // Boundary constructor in the customary units: mph and vehicles per mile.
  static Cell from_table(std::string name, CellKind kind, double length_mi, double v_mph, double w_mph,
                         Limit jam_per_mile, Limit saturation_per_minute = Limit::unbounded());

  double v_mph() const { return v * kMinutesPerHour; }
  double w_mph() const { return w * kMinutesPerHour; }

  friend bool operator==(const Cell&, const Cell&) = default;
};

// Linear demand alpha * (v / L) * rho.
template <typename Scalar>
Scalar demand(const Cell& cell, const Scalar& rho, const Scalar& alpha = Scalar(1)) {
  return alpha * Scalar(cell.v / cell.length) * rho;
}

// min{S, (w / L)(B - rho), beta}; unbounded for on-ramps without caps.
template <typename Scalar>
Limit supply(const Cell& cell, const Scalar& rho, const Limit& beta = Limit::unbounded()) {
  Limit s = min(cell.saturation, beta);
  if (cell.jam.bounded()) s = min(s, Limit((cell.w / cell.length) * (cell.jam.value() - double(rho))));
  return s;
}

// Checked variants enforcing 0 <= rho <= B and alpha in [0, 1].
double checked_demand(const Cell& cell, double rho, double alpha = 1.0);
Limit checked_supply(const Cell& cell, double rho, const Limit& beta = Limit::unbounded());

// max_rho min{d, s} for the uncontrolled cell; unbounded when the cell never saturates.
Limit capacity(const Cell& cell);

// Density at which uncontrolled demand meets supply (the capacity point).
std::optional<double> critical_volume(const Cell& cell);

struct CellPair {
  int from;
  int to;
  friend bool operator==(const CellPair&, const CellPair&) = default;
};

// Directed multigraph of cells. Node `external()` models the outside world.
class Network {
 public:
  Network() = default;
  Network(std::vector<Cell> cells, std::vector<int> tail, std::vector<int> head, int num_nodes, int external);

  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_nodes() const { return num_nodes_; }
  int external() const { return external_; }

  const Cell& cell(int i) const { return cells_.at(static_cast<std::size_t>(i)); }
  const std::vector<Cell>& cells() const { return cells_; }
  int tail(int i) const { return tail_[static_cast<std::size_t>(i)]; }
  int head(int i) const { return head_[static_cast<std::size_t>(i)]; }

  const std::vector<int>& out_of_node(int v) const { return node_out_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& into_node(int v) const { return node_in_[static_cast<std::size_t>(v)]; }
  // E_i^+ and E_i^-; empty across the external node.
  const std::vector<int>& downstream(int i) const;
  const std::vector<int>& upstream(int i) const;

  const std::vector<int>& on_ramps() const { return on_ramps_; }
  const std::vector<int>& off_ramps() const { return off_ramps_; }
  bool is_on_ramp(int i) const { return cell(i).kind == CellKind::OnRamp; }
  bool is_off_ramp(int i) const { return cell(i).kind == CellKind::OffRamp; }

  // Consecutive pairs (i, j) with head(i) == tail(j) != external, grouped by i.
  int num_pairs() const { return static_cast<int>(pairs_.size()); }
  const CellPair& pair(int p) const { return pairs_[static_cast<std::size_t>(p)]; }
  int pairs_begin(int i) const { return pair_offset_[static_cast<std::size_t>(i)]; }
  int pairs_end(int i) const { return pair_offset_[static_cast<std::size_t>(i) + 1]; }
  const std::vector<int>& pairs_into(int j) const { return pairs_into_[static_cast<std::size_t>(j)]; }
  std::optional<int> pair_index(int i, int j) const;

  // Internal nodes with at least one incoming and one outgoing cell.
  const std::vector<int>& junctions() const { return junctions_; }
  bool is_merge_node(int v) const { return out_of_node(v).size() == 1; }
  bool is_diverge_node(int v) const { return into_node(v).size() == 1 && out_of_node(v).size() > 1; }

  std::optional<int> find_cell(const std::string& name) const;
  int cell_index(const std::string& name) const;

  Network with_cell(int i, Cell replacement) const;

  friend bool operator==(const Network& a, const Network& b) {
    return a.cells_ == b.cells_ && a.tail_ == b.tail_ && a.head_ == b.head_ && a.num_nodes_ == b.num_nodes_ &&
           a.external_ == b.external_;
  }

 private:
  void build_caches();

  std::vector<Cell> cells_;
  std::vector<int> tail_, head_;
  int num_nodes_ = 0;
  int external_ = 0;

  std::vector<std::vector<int>> node_out_, node_in_;
  std::vector<int> on_ramps_, off_ramps_, junctions_;
  std::vector<CellPair> pairs_;
  std::vector<int> pair_offset_;
  std::vector<std::vector<int>> pairs_into_;
  std::vector<int> empty_;
};

// Turning fractions over the consecutive pairs of one network.
class TurningMatrix {
 public:
  TurningMatrix() = default;
  explicit TurningMatrix(const Network& net) : values_(Eigen::VectorXd::Zero(net.num_pairs())) {}
  explicit TurningMatrix(Eigen::VectorXd per_pair) : values_(std::move(per_pair)) {}

  double operator[](int p) const { return values_[p]; }
  double& operator[](int p) { return values_[p]; }
  double at(const Network& net, int i, int j) const;
  void set(const Network& net, int i, int j, double value);

  const Eigen::VectorXd& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  double row_sum(const Network& net, int i) const;

  Eigen::SparseMatrix<double> to_sparse(const Network& net) const;

  // Each row split evenly across downstream cells.
  static TurningMatrix uniform(const Network& net);

  friend bool operator==(const TurningMatrix& a, const TurningMatrix& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

class InflowProfile {
 public:
  enum class Type { Constant, PiecewiseConstant, Periodic };

  InflowProfile() = default;
  static InflowProfile constant(double lambda);
  // Value `values[k]` holds on [breakpoints[k], breakpoints[k+1]); breakpoints[0] must be 0.
  static InflowProfile piecewise(std::vector<double> breakpoints, std::vector<double> values);
  static InflowProfile periodic(double period, std::vector<double> breakpoints, std::vector<double> values);

  double operator()(double t) const;
  Type type() const { return type_; }
  double period() const { return period_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const InflowProfile&, const InflowProfile&) = default;

 private:
  Type type_ = Type::Constant;
  double period_ = 0.0;
  std::vector<double> breakpoints_{0.0};
  std::vector<double> values_{0.0};
};

// Inflow profiles indexed by cell; only on-ramp entries are read.
class Inflows {
 public:
  Inflows() = default;
  explicit Inflows(int num_cells) : profiles_(static_cast<std::size_t>(num_cells)) {}
  static Inflows constant(const Network& net, const Eigen::VectorXd& lambda);

  void set(int cell, InflowProfile profile) { profiles_.at(static_cast<std::size_t>(cell)) = std::move(profile); }
  const InflowProfile& profile(int cell) const { return profiles_.at(static_cast<std::size_t>(cell)); }
  int size() const { return static_cast<int>(profiles_.size()); }

  Eigen::VectorXd at(const Network& net, double t) const;
  // Common period of all profiles, when every non-constant profile is periodic with one period.
  std::optional<double> period() const;

  friend bool operator==(const Inflows&, const Inflows&) = default;

 private:
  std::vector<InflowProfile> profiles_;
};

struct Violation {
  std::string rule;
  std::string where;
  std::string detail;
};

std::vector<Violation> validate(const Network& net);
std::vector<Violation> validate(const Network& net, const TurningMatrix& R, double tol = 1e-12);

// 0 <= rho_i <= B_i within tol.
bool in_state_space(const Network& net, const Eigen::VectorXd& rho, double tol = 0.0);

// Sum of finite jam volumes.
double total_jam(const Network& net);

}  // namespace trafficnet
