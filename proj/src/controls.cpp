#include "trafficnet/controls.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace trafficnet {

ControlSignals ControlSignals::constant(Controls c) {
  ControlSignals s;
  s.append(0.0, std::move(c));
  return s;
}

void ControlSignals::append(double t, Controls c) {
  if (!times_.empty() && !(t > times_.back())) throw PreconditionError("control breakpoints must increase");
  times_.push_back(t);
  segments_.push_back(std::move(c));
}

const Controls& ControlSignals::at(double t) const {
  // Breakpoints coincide with step boundaries up to accumulated roundoff.
  const double probe = t + 1e-9 * std::max(1.0, std::abs(t));
  auto it = std::upper_bound(times_.begin(), times_.end(), probe);
  if (it == times_.begin()) return identity_;
  return segments_[static_cast<std::size_t>(it - times_.begin() - 1)];
}

void ControlSignals::splice(const ControlSignals& other, double offset) {
  for (int k = 0; k < other.size(); ++k) {
    const double t = other.time(k) + offset;
    if (!times_.empty() && t <= times_.back()) {
      // Later schedule wins on overlap.
      while (!times_.empty() && times_.back() >= t) {
        times_.pop_back();
        segments_.pop_back();
      }
    }
    append(t, other.segment(k));
  }
}

void write_csv(std::ostream& os, const Network& net, const ControlSignals& signals) {
  const auto old = os.precision(17);
  os << "t,kind,cell_i,cell_j,value\n";
  for (int k = 0; k < signals.size(); ++k) {
    const double t = signals.time(k);
    const Controls& c = signals.segment(k);
    for (int i = 0; i < c.alpha.size(); ++i) os << t << ",alpha," << i << ",," << c.alpha[i] << '\n';
    for (std::size_t i = 0; i < c.beta.size(); ++i) {
      os << t << ",beta," << i << ",,";
      if (c.beta[i].bounded())
        os << c.beta[i].value();
      else
        os << "inf";
      os << '\n';
    }
    if (c.R)
      for (int p = 0; p < net.num_pairs(); ++p)
        os << t << ",R," << net.pair(p).from << ',' << net.pair(p).to << ',' << (*c.R)[p] << '\n';
  }
  os.precision(old);
}

ControlSignals read_control_csv(std::istream& is, const Network& net) {
  std::map<double, Controls> by_time;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5) throw PreconditionError("control csv line " + std::to_string(lineno) + ": expected 5 fields");
    try {
      const double t = std::stod(f[0]);
      const int i = std::stoi(f[2]);
      if (i < 0 || i >= net.num_cells()) throw PreconditionError("cell index out of range");
      Controls& c = by_time[t];
      if (f[1] == "alpha") {
        if (c.alpha.size() == 0) c.alpha = Eigen::VectorXd::Ones(net.num_cells());
        c.alpha[i] = std::stod(f[4]);
      } else if (f[1] == "beta") {
        if (c.beta.empty()) c.beta.assign(static_cast<std::size_t>(net.num_cells()), Limit::unbounded());
        c.beta[static_cast<std::size_t>(i)] = f[4] == "inf" ? Limit::unbounded() : Limit(std::stod(f[4]));
      } else if (f[1] == "R") {
        if (!c.R) c.R = TurningMatrix(net);
        c.R->set(net, i, std::stoi(f[3]), std::stod(f[4]));
      } else {
        throw PreconditionError("unknown kind '" + f[1] + "'");
      }
    } catch (const std::logic_error& e) {
      throw PreconditionError("control csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  ControlSignals out;
  for (auto& [t, c] : by_time) out.append(t, std::move(c));
  return out;
}

double case1_excess(const Network& net, const TurningMatrix& R_u, const Controls& c) {
  const TurningMatrix& R = c.R ? *c.R : R_u;
  double worst = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < net.num_pairs(); ++p)
    worst = std::max(worst, c.alpha_of(net.pair(p).from) * R[p] - R_u[p]);
  return worst;
}

}  // namespace trafficnet
