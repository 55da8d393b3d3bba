#include "trafficnet/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/SparseLU>

namespace trafficnet {

int LinearProgram::add_variable(std::string name, double lo, double hi, double cost) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == kLpInf || hi == -kLpInf)
    throw std::invalid_argument("bad bounds on variable " + name);
  cost_.push_back(cost);
  lo_.push_back(lo);
  hi_.push_back(hi);
  var_names_.push_back(std::move(name));
  return num_variables() - 1;
}

void LinearProgram::set_bounds(int j, double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw std::invalid_argument("bad bounds on " + variable_name(j));
  lo_.at(static_cast<std::size_t>(j)) = lo;
  hi_.at(static_cast<std::size_t>(j)) = hi;
}

int LinearProgram::add_row(const std::vector<std::pair<int, double>>& terms, RowSense sense, double rhs,
                           std::string name) {
  if (!std::isfinite(rhs)) throw std::invalid_argument("non-finite right-hand side in row " + name);
  const int i = num_rows();
  for (const auto& [j, a] : terms) {
    if (j < 0 || j >= num_variables()) throw std::invalid_argument("row " + name + " references an unknown variable");
    if (a != 0.0) entries_.emplace_back(i, j, a);
  }
  sense_.push_back(sense);
  rhs_.push_back(rhs);
  row_names_.push_back(std::move(name));
  return i;
}

int LinearProgram::add_ge_row(const std::vector<std::pair<int, double>>& terms, double rhs, std::string name) {
  std::vector<std::pair<int, double>> neg = terms;
  for (auto& t : neg) t.second = -t.second;
  return add_row(neg, RowSense::Le, -rhs, std::move(name));
}

Eigen::SparseMatrix<double> LinearProgram::matrix() const {
  Eigen::SparseMatrix<double> A(num_rows(), num_variables());
  A.setFromTriplets(entries_.begin(), entries_.end());
  A.makeCompressed();
  return A;
}

Eigen::VectorXd LinearProgram::costs() const {
  return Eigen::Map<const Eigen::VectorXd>(cost_.data(), static_cast<Eigen::Index>(cost_.size()));
}

double LinearProgram::primal_residual(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd Ax = matrix() * x;
  double r = 0.0;
  for (int i = 0; i < num_rows(); ++i) {
    const double d = Ax[i] - rhs(i);
    r = std::max(r, sense(i) == RowSense::Eq ? std::abs(d) : std::max(0.0, d));
  }
  for (int j = 0; j < num_variables(); ++j) r = std::max({r, lower(j) - x[j], x[j] - upper(j)});
  return r;
}

void LinearProgram::write(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "minimize";
  for (int j = 0; j < num_variables(); ++j)
    if (cost(j) != 0.0) os << ' ' << cost(j) << ' ' << variable_name(j);
  os << '\n';
  const Eigen::SparseMatrix<double> At = matrix().transpose();
  for (int i = 0; i < num_rows(); ++i) {
    os << "row " << (row_name(i).empty() ? "r" + std::to_string(i) : row_name(i)) << ':';
    for (Eigen::SparseMatrix<double>::InnerIterator it(At, i); it; ++it)
      os << ' ' << it.value() << ' ' << variable_name(static_cast<int>(it.row()));
    os << (sense(i) == RowSense::Eq ? " = " : " <= ") << rhs(i) << '\n';
  }
  for (int j = 0; j < num_variables(); ++j) os << "bound " << variable_name(j) << ' ' << lower(j) << ' ' << upper(j) << '\n';
  os.precision(old);
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal:
      return "optimal";
    case LpStatus::Infeasible:
      return "infeasible";
    case LpStatus::Unbounded:
      return "unbounded";
  }
  return "infeasible";
}

namespace {

double pow2_near(double v) { return v > 0.0 && std::isfinite(v) ? std::exp2(std::round(std::log2(v))) : 1.0; }

struct Eta {
  int r;
  double pivot;
  std::vector<std::pair<int, double>> col;  // entries i != r
};

// Bounded revised simplex over [A | I | artificials] in scaled space.
class Simplex {
 public:
  Simplex(const Eigen::SparseMatrix<double>& A, Eigen::VectorXd b, std::vector<double> lo, std::vector<double> hi,
          std::vector<RowSense> sense, const SolverOptions& opt)
      : A_(A), b_(std::move(b)), m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())), opt_(opt) {
    lo_ = std::move(lo);
    hi_ = std::move(hi);
    for (int i = 0; i < m_; ++i) {
      lo_.push_back(0.0);
      hi_.push_back(sense[static_cast<std::size_t>(i)] == RowSense::Eq ? 0.0 : kLpInf);
    }
    x_.assign(static_cast<std::size_t>(n_ + m_), 0.0);
    for (int j = 0; j < n_; ++j) x_[uz(j)] = std::isfinite(lo_[uz(j)]) ? lo_[uz(j)] : std::isfinite(hi_[uz(j)]) ? hi_[uz(j)] : 0.0;
    cap_ = opt.max_iterations > 0 ? opt.max_iterations : 20L * (m_ + n_) + 10000;
  }

  // Phase 1 on artificials when needed, then phase 2 on `cost`.
  LpStatus run(const Eigen::VectorXd& cost) {
    // Initial basis: slacks where they absorb the residual, artificials elsewhere.
    Eigen::VectorXd r = b_ - A_ * Eigen::Map<const Eigen::VectorXd>(x_.data(), n_);
    head_.assign(uz(m_), -1);
    art_sign_.clear();
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i;
      const bool fits = r[i] >= -opt_.feasibility_tol && (hi_[uz(s)] == kLpInf || std::abs(r[i]) <= opt_.feasibility_tol);
      if (fits) {
        head_[uz(i)] = s;
        x_[uz(s)] = r[i];
      } else {
        x_[uz(s)] = 0.0;
        const int a = static_cast<int>(x_.size());
        art_row_.push_back(i);
        art_sign_.push_back(r[i] >= 0 ? 1.0 : -1.0);
        lo_.push_back(0.0);
        hi_.push_back(kLpInf);
        x_.push_back(std::abs(r[i]));
        head_[uz(i)] = a;
      }
    }
    total_ = static_cast<int>(x_.size());
    pos_.assign(uz(total_), -1);
    for (int i = 0; i < m_; ++i) pos_[uz(head_[uz(i)])] = i;
    refactor();

    c_.assign(uz(total_), 0.0);
    if (!art_row_.empty()) {
      for (int a = n_ + m_; a < total_; ++a) c_[uz(a)] = 1.0;
      const LpStatus s1 = iterate();
      (void)s1;
      double infeas = 0.0;
      for (int a = n_ + m_; a < total_; ++a) infeas += std::abs(x_[uz(a)]);
      if (infeas > 1e-8 * std::max(1.0, b_.lpNorm<Eigen::Infinity>())) return LpStatus::Infeasible;
      for (int a = n_ + m_; a < total_; ++a) {
        lo_[uz(a)] = hi_[uz(a)] = 0.0;
        c_[uz(a)] = 0.0;
        if (pos_[uz(a)] < 0) x_[uz(a)] = 0.0;
      }
      recompute_basic();
    }
    for (int j = 0; j < n_; ++j) c_[uz(j)] = cost[j];
    return iterate();
  }

  Eigen::VectorXd x() const { return Eigen::Map<const Eigen::VectorXd>(x_.data(), n_); }
  Eigen::VectorXd duals() { return btran_costs(); }
  long iterations() const { return iters_; }

 private:
  static std::size_t uz(int i) { return static_cast<std::size_t>(i); }

  template <typename F>
  void for_column(int j, F&& f) const {
    if (j < n_) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) f(static_cast<int>(it.row()), it.value());
    } else if (j < n_ + m_) {
      f(j - n_, 1.0);
    } else {
      const auto k = uz(j - n_ - m_);
      f(art_row_[k], art_sign_[k]);
    }
  }

  void refactor() {
    etas_.clear();
    if (m_ == 0) return;
    std::vector<Eigen::Triplet<double>> nz;
    nz.reserve(uz(m_ * 2));
    for (int r = 0; r < m_; ++r) for_column(head_[uz(r)], [&](int i, double v) { nz.emplace_back(i, r, v); });
    Eigen::SparseMatrix<double> B(m_, m_);
    B.setFromTriplets(nz.begin(), nz.end());
    B.makeCompressed();
    lu_.analyzePattern(B);
    lu_.factorize(B);
    if (lu_.info() != Eigen::Success) throw SolverError("basis factorization failed: " + lu_.lastErrorMessage());
  }

  void ftran(Eigen::VectorXd& y) const {
    if (m_ == 0) return;
    y = lu_.solve(y).eval();
    for (const Eta& e : etas_) {
      const double yr = y[e.r] / e.pivot;
      if (yr != 0.0)
        for (const auto& [i, a] : e.col) y[i] -= a * yr;
      y[e.r] = yr;
    }
  }

  void btran(Eigen::VectorXd& z) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = z[it->r];
      for (const auto& [i, a] : it->col) s -= a * z[i];
      z[it->r] = s / it->pivot;
    }
    if (m_ > 0) z = lu_.transpose().solve(z).eval();
  }

  Eigen::VectorXd btran_costs() const {
    Eigen::VectorXd z(m_);
    for (int r = 0; r < m_; ++r) z[r] = c_[uz(head_[uz(r)])];
    btran(z);
    return z;
  }

  void recompute_basic() {
    Eigen::VectorXd rhs = b_;
    for (int j = 0; j < total_; ++j) {
      if (pos_[uz(j)] >= 0 || x_[uz(j)] == 0.0) continue;
      const double v = x_[uz(j)];
      for_column(j, [&](int i, double a) { rhs[i] -= a * v; });
    }
    ftran(rhs);
    for (int r = 0; r < m_; ++r) x_[uz(head_[uz(r)])] = rhs[r];
  }

  double reduced_cost(int j, const Eigen::VectorXd& pi) const {
    double d = c_[uz(j)];
    for_column(j, [&](int i, double a) { d -= a * pi[i]; });
    return d;
  }

  // Entering column and direction, or -1 when optimal.
  int price(const Eigen::VectorXd& pi, bool bland, int& dir) const {
    int best = -1;
    double best_score = 0.0;
    for (int j = 0; j < total_; ++j) {
      if (pos_[uz(j)] >= 0) continue;
      const double lo = lo_[uz(j)], hi = hi_[uz(j)];
      if (lo == hi) continue;
      const double xj = x_[uz(j)];
      const bool up = xj < hi, down = xj > lo;
      const double d = reduced_cost(j, pi);
      int dj = 0;
      if (d < -opt_.optimality_tol && up) dj = 1;
      else if (d > opt_.optimality_tol && down) dj = -1;
      if (!dj) continue;
      if (bland) {
        dir = dj;
        return j;
      }
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = j;
        dir = dj;
      }
    }
    return best;
  }

  LpStatus iterate() {
    constexpr double kPivotTol = 1e-9;
    int degenerate_run = 0;
    bool rechecked = false;
    Eigen::VectorXd alpha(m_);
    while (true) {
      if (++iters_ > cap_) throw SolverError("simplex iteration cap exceeded");
      const bool bland = opt_.bland_only || degenerate_run > 50;
      const Eigen::VectorXd pi = btran_costs();
      int dir = 0;
      const int q = price(pi, bland, dir);
      if (q < 0) {
        if (!etas_.empty() && !rechecked) {
          // Confirm optimality on a fresh factorization.
          refactor();
          recompute_basic();
          rechecked = true;
          continue;
        }
        return LpStatus::Optimal;
      }
      rechecked = false;

      alpha.setZero();
      for_column(q, [&](int i, double a) { alpha[i] = a; });
      ftran(alpha);

      // Basic variable in position r moves by -dir * t * alpha[r].
      const double delta = opt_.feasibility_tol;
      int leave = -1;
      double t = kLpInf;
      if (bland) {
        for (int r = 0; r < m_; ++r) {
          const double ar = dir * alpha[r];
          if (std::abs(ar) <= kPivotTol) continue;
          const int j = head_[uz(r)];
          const double bound = ar > 0 ? lo_[uz(j)] : hi_[uz(j)];
          if (!std::isfinite(bound)) continue;
          const double ratio = std::max(0.0, (x_[uz(j)] - bound) / ar);
          if (ratio < t - 1e-12 || (ratio <= t + 1e-12 && leave >= 0 && j < head_[uz(leave)])) {
            t = ratio;
            leave = r;
          }
        }
      } else {
        double tmax = kLpInf;
        for (int r = 0; r < m_; ++r) {
          const double ar = dir * alpha[r];
          if (std::abs(ar) <= kPivotTol) continue;
          const int j = head_[uz(r)];
          const double bound = ar > 0 ? lo_[uz(j)] : hi_[uz(j)];
          if (!std::isfinite(bound)) continue;
          tmax = std::min(tmax, (x_[uz(j)] - bound + (ar > 0 ? delta : -delta)) / ar);
        }
        double best = 0.0;
        for (int r = 0; r < m_; ++r) {
          const double ar = dir * alpha[r];
          if (std::abs(ar) <= kPivotTol) continue;
          const int j = head_[uz(r)];
          const double bound = ar > 0 ? lo_[uz(j)] : hi_[uz(j)];
          if (!std::isfinite(bound)) continue;
          const double ratio = (x_[uz(j)] - bound) / ar;
          if (ratio <= tmax && std::abs(ar) > best) {
            best = std::abs(ar);
            leave = r;
            t = std::max(0.0, ratio);
          }
        }
      }

      const double range = hi_[uz(q)] - lo_[uz(q)];
      if (std::isfinite(range) && range <= t) {
        // Bound flip, basis unchanged.
        for (int r = 0; r < m_; ++r) x_[uz(head_[uz(r)])] -= dir * range * alpha[r];
        x_[uz(q)] = dir > 0 ? hi_[uz(q)] : lo_[uz(q)];
        degenerate_run = 0;
        continue;
      }
      if (leave < 0) return LpStatus::Unbounded;

      degenerate_run = t <= 1e-12 ? degenerate_run + 1 : 0;
      for (int r = 0; r < m_; ++r) x_[uz(head_[uz(r)])] -= dir * t * alpha[r];
      x_[uz(q)] += dir * t;
      const int out = head_[uz(leave)];
      x_[uz(out)] = dir * alpha[leave] > 0 ? lo_[uz(out)] : hi_[uz(out)];
      pos_[uz(out)] = -1;
      head_[uz(leave)] = q;
      pos_[uz(q)] = leave;

      Eta e{leave, alpha[leave], {}};
      for (int i = 0; i < m_; ++i)
        if (i != leave && alpha[i] != 0.0) e.col.emplace_back(i, alpha[i]);
      etas_.push_back(std::move(e));
      if (static_cast<int>(etas_.size()) >= opt_.refactor_every) {
        refactor();
        recompute_basic();
      }
    }
  }

  const Eigen::SparseMatrix<double>& A_;
  Eigen::VectorXd b_;
  int m_, n_, total_ = 0;
  SolverOptions opt_;
  long cap_ = 0, iters_ = 0;
  std::vector<double> lo_, hi_, x_, c_;
  std::vector<int> art_row_;
  std::vector<double> art_sign_;
  std::vector<int> head_, pos_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
};

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolverOptions& options) {
  const int m = lp.num_rows(), n = lp.num_variables();
  Eigen::SparseMatrix<double> A = lp.matrix();

  // Max-abs equilibration by powers of two: rows first, then columns.
  Eigen::VectorXd rs = Eigen::VectorXd::Ones(m), cs = Eigen::VectorXd::Ones(n);
  double cscale = 1.0;
  if (options.scale) {
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < n; ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
        rmax[it.row()] = std::max(rmax[it.row()], std::abs(it.value()));
    for (int i = 0; i < m; ++i) rs[i] = rmax[i] > 0 ? 1.0 / pow2_near(rmax[i]) : 1.0;
    for (int j = 0; j < n; ++j) {
      double cmax = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
        cmax = std::max(cmax, std::abs(rs[it.row()] * it.value()));
      cs[j] = cmax > 0 ? 1.0 / pow2_near(cmax) : 1.0;
    }
    A = rs.asDiagonal() * A * cs.asDiagonal();
    A.makeCompressed();
    double cmax = 0.0;
    for (int j = 0; j < n; ++j) cmax = std::max(cmax, std::abs(lp.cost(j) * cs[j]));
    cscale = cmax > 0 ? pow2_near(cmax) : 1.0;
  }

  Eigen::VectorXd b(m);
  std::vector<RowSense> sense(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    b[i] = rs[i] * lp.rhs(i);
    sense[static_cast<std::size_t>(i)] = lp.sense(i);
  }
  std::vector<double> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n));
  Eigen::VectorXd c(n);
  for (int j = 0; j < n; ++j) {
    lo[static_cast<std::size_t>(j)] = lp.lower(j) / cs[j];
    hi[static_cast<std::size_t>(j)] = lp.upper(j) / cs[j];
    c[j] = lp.cost(j) * cs[j] / cscale;
  }

  Simplex sx(A, b, std::move(lo), std::move(hi), std::move(sense), options);
  LpSolution sol;
  sol.status = sx.run(c);
  sol.iterations = static_cast<int>(sx.iterations());
  sol.x = sx.x().cwiseProduct(cs);
  // Snap onto bounds that scaling roundoff may have crossed.
  for (int j = 0; j < n; ++j) sol.x[j] = std::clamp(sol.x[j], lp.lower(j), lp.upper(j));
  const Eigen::SparseMatrix<double> A0 = lp.matrix();
  Eigen::VectorXd b0(m);
  for (int i = 0; i < m; ++i) b0[i] = lp.rhs(i);
  sol.slack = b0 - A0 * sol.x;
  sol.objective = lp.costs().dot(sol.x);
  if (sol.status == LpStatus::Optimal) {
    sol.duals = sx.duals().cwiseProduct(rs) * cscale;
    sol.reduced_costs = lp.costs() - A0.transpose() * sol.duals;
  }
  return sol;
}

}  // namespace trafficnet
