#include "trafficnet/benchmark.hpp"

#include <algorithm>
#include <map>
#include <variant>

namespace trafficnet {

namespace {

constexpr int kCells = 91;
constexpr double kOffRampShare = 0.1;
constexpr double kMainlineInflow = 20.0;
constexpr double kRampInflow = 2.0;

enum class Role { Mainline, Intersection, Segment, OnRamp, OffRamp };

// Off-ramp, ramp segment, on-ramp; the off-ramp always precedes the on-ramp.
struct Triple {
  int off, seg, on;
};
// A lone on-ramp merging into the mainline.
struct Merge {
  int on;
};
using Item = std::variant<int, Triple, Merge>;

struct Link {
  int from_hub;                     // 0 for an external entry
  int to_hub;                       // 0 for an external exit
  int terminal;                     // entry or exit cell number when a hub side is external
  std::vector<Item> items;
};

// Hubs are the intersection cells 69..73.
const std::vector<Link>& links() {
  static const std::vector<Link> table = {
      {69, 71, 0, {2, Triple{61, 76, 62}, 3, Triple{86, 80, 87}, 4}},
      {71, 69, 0, {5, Triple{63, 77, 64}, 6, Triple{88, 81, 89}, 7}},
      {69, 70, 0, {14, 15, Triple{65, 78, 66}, Merge{50}, 16}},
      {70, 69, 0, {22, 23, Triple{67, 79, 68}, 24}},
      {70, 72, 0, {21, 18, Triple{53, 74, 54}, 19}},
      {72, 70, 0, {28, 29, Triple{55, 75, 56}, 30}},
      {72, 71, 0, {31, 26, Triple{57, 84, 58}, 27}},
      {71, 72, 0, {32, 33, Triple{59, 85, 60}, 34}},
      {71, 73, 0, {37, 38, Triple{90, 82, 91}, 39}},
      {73, 71, 0, {40, 41, Triple{51, 83, 52}, 46}},
      {0, 69, 1, {}},  {0, 69, 8, {}},  {0, 70, 9, {}},  {0, 70, 10, {}}, {0, 72, 11, {}},
      {0, 71, 13, {}}, {0, 73, 17, {}}, {0, 73, 25, {}}, {0, 73, 35, {}},
      {69, 0, 12, {}}, {69, 0, 20, {}}, {70, 0, 36, {}}, {70, 0, 42, {}}, {71, 0, 43, {}},
      {72, 0, 44, {}}, {72, 0, 45, {}}, {73, 0, 47, {}}, {73, 0, 48, {}}, {73, 0, 49, {}},
  };
  return table;
}

Cell make_cell(int number, Role role) {
  const std::string name = "c" + std::to_string(number);
  switch (role) {
    case Role::Mainline: return Cell::from_table(name, CellKind::Internal, 2.0, 65.0, 13.0, Limit(200.0));
    case Role::Intersection: return Cell::from_table(name, CellKind::Internal, 0.2, 65.0, 13.0, Limit(500.0));
    case Role::Segment: return Cell::from_table(name, CellKind::Internal, 0.5, 65.0, 13.0, Limit(200.0));
    case Role::OnRamp: return Cell::from_table(name, CellKind::OnRamp, 0.5, 25.0, 13.0, Limit::unbounded());
    case Role::OffRamp: return Cell::from_table(name, CellKind::OffRamp, 0.5, 25.0, 13.0, Limit(200.0));
  }
  return {};
}

const char* role_name(Role r) {
  switch (r) {
    case Role::Mainline: return "mainline";
    case Role::Intersection: return "intersection";
    case Role::Segment: return "ramp-segment";
    case Role::OnRamp: return "on-ramp";
    case Role::OffRamp: return "off-ramp";
  }
  return "";
}

}  // namespace

Benchmark generate_la_benchmark() {
  std::vector<Role> role(kCells, Role::Mainline);
  for (int h = 69; h <= 73; ++h) role[la_cell(h)] = Role::Intersection;
  std::vector<std::vector<int>> next(kCells);  // downstream cell numbers, in insertion order
  std::vector<char> entry(kCells, 0), ramp_on(kCells, 0), ramp_off(kCells, 0);
  auto connect = [&](const std::vector<int>& from, int to) {
    for (int p : from) next[la_cell(p)].push_back(to);
  };

  for (const Link& link : links()) {
    std::vector<int> prev;
    if (link.from_hub == 0) {
      role[la_cell(link.terminal)] = Role::OnRamp;
      entry[la_cell(link.terminal)] = 1;
      prev = {link.terminal};
    } else {
      prev = {link.from_hub};
    }
    for (const Item& item : link.items) {
      if (const auto* m = std::get_if<Merge>(&item)) {
        role[la_cell(m->on)] = Role::OnRamp;
        ramp_on[la_cell(m->on)] = 1;
        prev.push_back(m->on);
      } else if (const auto* t = std::get_if<Triple>(&item)) {
        role[la_cell(t->off)] = Role::OffRamp;
        role[la_cell(t->seg)] = Role::Segment;
        role[la_cell(t->on)] = Role::OnRamp;
        ramp_on[la_cell(t->on)] = 1;
        ramp_off[la_cell(t->off)] = 1;
        connect(prev, t->off);
        connect(prev, t->seg);
        prev = {t->seg, t->on};
      } else {
        const int c = std::get<int>(item);
        connect(prev, c);
        prev = {c};
      }
    }
    if (link.to_hub == 0) {
      role[la_cell(link.terminal)] = Role::OffRamp;
      connect(prev, link.terminal);
    } else {
      connect(prev, link.to_hub);
    }
  }

  // One node per distinct downstream set; node 0 is the outside world.
  std::map<std::vector<int>, int> node_of;
  std::vector<int> tail(kCells, 0), head(kCells, 0);
  for (int i = 0; i < kCells; ++i) {
    if (next[i].empty()) continue;
    std::vector<int> key = next[i];
    std::sort(key.begin(), key.end());
    auto [it, fresh] = node_of.emplace(key, static_cast<int>(node_of.size()) + 1);
    head[i] = it->second;
    for (int j : key) {
      int& t = tail[la_cell(j)];
      if (t != 0 && t != it->second) throw TopologyError("benchmark geometry: inconsistent junction at c" + std::to_string(j));
      t = it->second;
    }
  }

  std::vector<Cell> cells;
  cells.reserve(kCells);
  for (int i = 0; i < kCells; ++i) cells.push_back(make_cell(i + 1, role[i]));
  Benchmark b{Network(std::move(cells), tail, head, static_cast<int>(node_of.size()) + 1, 0), {}, {}, {}};

  b.R = TurningMatrix(b.net);
  for (int i = 0; i < kCells; ++i) {
    const auto& js = next[i];
    const auto offs = std::count_if(js.begin(), js.end(), [&](int j) { return ramp_off[la_cell(j)] != 0; });
    const double rest = (1.0 - kOffRampShare * static_cast<double>(offs)) / static_cast<double>(js.size() - offs);
    for (int j : js) b.R.set(b.net, i, la_cell(j), ramp_off[la_cell(j)] ? kOffRampShare : rest);
  }

  b.lambda = Eigen::VectorXd::Zero(kCells);
  for (int i = 0; i < kCells; ++i) {
    if (entry[i]) b.lambda[i] = kMainlineInflow;
    if (ramp_on[i]) b.lambda[i] = kRampInflow;
    b.role.emplace_back(role_name(role[i]));
  }
  return b;
}

Incident la_speed_incident() { return {0.0, kLaBottleneck, 4.0, std::nullopt}; }
Incident la_capacity_incident() { return {0.0, kLaBottleneck, std::nullopt, 8.0}; }

}  // namespace trafficnet
