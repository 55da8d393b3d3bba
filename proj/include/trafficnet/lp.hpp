#pragma once

#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace trafficnet {

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RowSense { Eq, Le };

// min c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  lo <= x <= hi.
class LinearProgram {
 public:
  int add_variable(std::string name, double lo, double hi, double cost = 0.0);
  int add_row(const std::vector<std::pair<int, double>>& terms, RowSense sense, double rhs, std::string name = {});
  // Stores a >= row as its negation.
  int add_ge_row(const std::vector<std::pair<int, double>>& terms, double rhs, std::string name = {});

  void set_cost(int j, double c) { cost_.at(static_cast<std::size_t>(j)) = c; }
  void set_bounds(int j, double lo, double hi);

  int num_variables() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rhs_.size()); }
  double cost(int j) const { return cost_[static_cast<std::size_t>(j)]; }
  double lower(int j) const { return lo_[static_cast<std::size_t>(j)]; }
  double upper(int j) const { return hi_[static_cast<std::size_t>(j)]; }
  const std::string& variable_name(int j) const { return var_names_[static_cast<std::size_t>(j)]; }
  RowSense sense(int i) const { return sense_[static_cast<std::size_t>(i)]; }
  double rhs(int i) const { return rhs_[static_cast<std::size_t>(i)]; }
  const std::string& row_name(int i) const { return row_names_[static_cast<std::size_t>(i)]; }

  Eigen::SparseMatrix<double> matrix() const;  // rows x variables, duplicates summed
  Eigen::VectorXd costs() const;

  // ||max(0, Ax - b)|| on <= rows, |Ax - b| on = rows, and bound violations, in the infinity norm.
  double primal_residual(const Eigen::VectorXd& x) const;

  // Line-oriented dump: objective, rows, bounds.
  void write(std::ostream& os) const;

 private:
  std::vector<double> cost_, lo_, hi_;
  std::vector<std::string> var_names_;
  std::vector<Eigen::Triplet<double>> entries_;
  std::vector<RowSense> sense_;
  std::vector<double> rhs_;
  std::vector<std::string> row_names_;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };
const char* to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd slack;          // b - Ax per row
  Eigen::VectorXd duals;          // y with c - A^T y = reduced costs; y <= 0 on <= rows
  Eigen::VectorXd reduced_costs;
  int iterations = 0;
};

struct SolverOptions {
  long max_iterations = 0;        // 0 picks a size-dependent cap
  bool bland_only = false;
  bool scale = true;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  int refactor_every = 64;
};

// Two-phase bounded revised simplex. Throws SolverError when the iteration cap is hit.
LpSolution solve(const LinearProgram& lp, const SolverOptions& options = {});

// Dense basic-solution enumeration for tiny programs; refuses more than `max_columns`
// standard-form columns.
LpSolution enumerate_vertices_oracle(const LinearProgram& lp, int max_columns = 10);

// Column count of the standard form used by the oracle.
int oracle_columns(const LinearProgram& lp);

}  // namespace trafficnet
