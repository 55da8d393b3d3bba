#include <bit>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "trafficnet/lp.hpp"

namespace trafficnet {

namespace {

// x_j = offset_j + sum_k coef_k z_k over the standard-form columns of variable j.
struct StandardForm {
  Eigen::MatrixXd A;
  Eigen::VectorXd b, c;
  std::vector<double> offset;
  std::vector<std::vector<std::pair<int, double>>> map;
  double c0 = 0.0;
};

StandardForm standard_form(const LinearProgram& lp) {
  const int n = lp.num_variables();
  StandardForm sf;
  sf.offset.assign(static_cast<std::size_t>(n), 0.0);
  sf.map.resize(static_cast<std::size_t>(n));
  int cols = 0;
  std::vector<int> range_rows;
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower(j), hi = lp.upper(j);
    auto& m = sf.map[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) {
      sf.offset[static_cast<std::size_t>(j)] = lo;
      m.emplace_back(cols++, 1.0);
      if (std::isfinite(hi)) range_rows.push_back(j);
    } else if (std::isfinite(hi)) {
      sf.offset[static_cast<std::size_t>(j)] = hi;
      m.emplace_back(cols++, -1.0);
    } else {
      m.emplace_back(cols++, 1.0);
      m.emplace_back(cols++, -1.0);
    }
  }
  int le_rows = 0;
  for (int i = 0; i < lp.num_rows(); ++i) le_rows += lp.sense(i) == RowSense::Le;
  const int N = cols + le_rows + static_cast<int>(range_rows.size());
  const int M = lp.num_rows() + static_cast<int>(range_rows.size());
  sf.A = Eigen::MatrixXd::Zero(M, N);
  sf.b = Eigen::VectorXd::Zero(M);
  sf.c = Eigen::VectorXd::Zero(N);

  const Eigen::MatrixXd A0 = Eigen::MatrixXd(lp.matrix());
  int slack = cols;
  for (int i = 0; i < lp.num_rows(); ++i) {
    sf.b[i] = lp.rhs(i);
    for (int j = 0; j < n; ++j) {
      if (A0(i, j) == 0.0) continue;
      sf.b[i] -= A0(i, j) * sf.offset[static_cast<std::size_t>(j)];
      for (const auto& [k, s] : sf.map[static_cast<std::size_t>(j)]) sf.A(i, k) += A0(i, j) * s;
    }
    if (lp.sense(i) == RowSense::Le) sf.A(i, slack++) = 1.0;
  }
  int row = lp.num_rows();
  for (int j : range_rows) {
    sf.A(row, sf.map[static_cast<std::size_t>(j)].front().first) = 1.0;
    sf.A(row, slack++) = 1.0;
    sf.b[row++] = lp.upper(j) - lp.lower(j);
  }
  for (int j = 0; j < n; ++j) {
    sf.c0 += lp.cost(j) * sf.offset[static_cast<std::size_t>(j)];
    for (const auto& [k, s] : sf.map[static_cast<std::size_t>(j)]) sf.c[k] += lp.cost(j) * s;
  }
  return sf;
}

struct Vertex {
  bool found = false;
  Eigen::VectorXd z;
  double cost = 0.0;
};

// Best basic feasible solution of {Az = b, z >= 0}.
Vertex best_vertex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const int N = static_cast<int>(A.cols());
  const double tol = 1e-9 * std::max(1.0, b.lpNorm<Eigen::Infinity>());
  Vertex best;
  Eigen::FullPivLU<Eigen::MatrixXd> full(A);
  const int r = static_cast<int>(full.rank());
  if (r == 0) {
    if (b.lpNorm<Eigen::Infinity>() <= tol) best = {true, Eigen::VectorXd::Zero(N), 0.0};
    return best;
  }
  for (unsigned mask = 0; mask < (1u << N); ++mask) {
    if (std::popcount(mask) != r) continue;
    std::vector<int> cols;
    for (int k = 0; k < N; ++k)
      if (mask & (1u << k)) cols.push_back(k);
    Eigen::MatrixXd As(A.rows(), r);
    for (int k = 0; k < r; ++k) As.col(k) = A.col(cols[static_cast<std::size_t>(k)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(As);
    if (lu.rank() < r) continue;
    const Eigen::VectorXd zs = As.colPivHouseholderQr().solve(b);
    if ((As * zs - b).lpNorm<Eigen::Infinity>() > tol) continue;
    if (zs.minCoeff() < -tol) continue;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(N);
    for (int k = 0; k < r; ++k) z[cols[static_cast<std::size_t>(k)]] = std::max(0.0, zs[k]);
    const double cost = c.dot(z);
    if (!best.found || cost < best.cost) best = {true, z, cost};
  }
  return best;
}

}  // namespace

int oracle_columns(const LinearProgram& lp) { return static_cast<int>(standard_form(lp).A.cols()); }

LpSolution enumerate_vertices_oracle(const LinearProgram& lp, int max_columns) {
  const StandardForm sf = standard_form(lp);
  const int N = static_cast<int>(sf.A.cols());
  if (N > max_columns)
    throw std::invalid_argument("oracle refuses " + std::to_string(N) + " standard-form columns (limit " +
                                std::to_string(max_columns) + ")");
  LpSolution sol;
  const Vertex v = best_vertex(sf.A, sf.b, sf.c);
  if (!v.found) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }

  // Improving ray: min c.d over {Ad = 0, sum d = 1, d >= 0}.
  Eigen::MatrixXd Ar(sf.A.rows() + 1, N);
  Ar << sf.A, Eigen::RowVectorXd::Ones(N);
  Eigen::VectorXd br = Eigen::VectorXd::Zero(sf.A.rows() + 1);
  br[sf.A.rows()] = 1.0;
  const Vertex ray = best_vertex(Ar, br, sf.c);

  sol.x.resize(lp.num_variables());
  for (int j = 0; j < lp.num_variables(); ++j) {
    double x = sf.offset[static_cast<std::size_t>(j)];
    for (const auto& [k, s] : sf.map[static_cast<std::size_t>(j)]) x += s * v.z[k];
    sol.x[j] = x;
  }
  sol.objective = lp.costs().dot(sol.x);
  Eigen::VectorXd b0(lp.num_rows());
  for (int i = 0; i < lp.num_rows(); ++i) b0[i] = lp.rhs(i);
  sol.slack = b0 - lp.matrix() * sol.x;
  sol.status = ray.found && ray.cost < -1e-9 ? LpStatus::Unbounded : LpStatus::Optimal;
  return sol;
}

}  // namespace trafficnet
