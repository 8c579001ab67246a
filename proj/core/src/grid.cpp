#include "voltstab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <string>

#include "voltstab/error.hpp"
#include "voltstab/linalg.hpp"

namespace voltstab {

namespace {

std::string bus_name(int id) { return "bus " + std::to_string(id); }

std::string line_name(const Line& line) {
  return "line " + std::to_string(line.from) + "->" + std::to_string(line.to);
}

}  // namespace

bool VoltageBand::contains(const Eigen::VectorXd& v) const {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) < lower(i) || v(i) > upper(i)) return false;
  }
  return true;
}

VoltageBand VoltageBand::uniform(std::size_t n, double lower, double upper) {
  const auto size = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Constant(size, lower), Eigen::VectorXd::Constant(size, upper)};
}

RadialNetwork::RadialNetwork(std::vector<Bus> buses, std::vector<Line> lines, double v0,
                             double base_kv)
    : lines_(std::move(lines)), v0_(v0), base_kv_(base_kv) {
  if (!(base_kv > 0.0) || !std::isfinite(base_kv)) {
    throw ValidationError("base_kv", "must be positive");
  }
  if (!std::isfinite(v0)) throw ValidationError("v0", "must be finite");

  // The substation record, if given, carries no constraints.
  std::erase_if(buses, [](const Bus& b) { return b.id == 0; });
  std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
  const int n = static_cast<int>(buses.size());
  if (n == 0) throw ValidationError("buses", "network has no non-substation buses");
  for (int k = 0; k < n; ++k) {
    const Bus& b = buses[static_cast<std::size_t>(k)];
    if (b.id != k + 1) {
      if (k > 0 && b.id == buses[static_cast<std::size_t>(k - 1)].id) {
        throw ValidationError(bus_name(b.id), "duplicate bus id");
      }
      throw ValidationError(bus_name(b.id), "bus ids must be exactly 1.." + std::to_string(n));
    }
    if (!(b.v_lower < v0 && v0 < b.v_upper)) {
      throw ValidationError(bus_name(b.id), "requires v_lower < v0 < v_upper");
    }
  }
  buses_ = std::move(buses);

  if (static_cast<int>(lines_.size()) != n) {
    throw ValidationError("lines", "expected " + std::to_string(n) + " lines for " + std::to_string(n) +
                                       " buses, got " + std::to_string(lines_.size()));
  }

  parent_.assign(static_cast<std::size_t>(n + 1), -1);
  line_into_.assign(static_cast<std::size_t>(n + 1), 0);
  children_.assign(static_cast<std::size_t>(n + 1), {});
  for (std::size_t l = 0; l < lines_.size(); ++l) {
    const Line& line = lines_[l];
    if (line.to < 1 || line.to > n) throw ValidationError(line_name(line), "child bus does not exist");
    if (line.from < 0 || line.from > n) throw ValidationError(line_name(line), "parent bus does not exist");
    if (line.from == line.to) throw ValidationError(line_name(line), "self loop");
    if (!(line.r > 0.0) || !std::isfinite(line.r)) throw ValidationError(line_name(line), "resistance must be > 0");
    if (!(line.x > 0.0) || !std::isfinite(line.x)) throw ValidationError(line_name(line), "reactance must be > 0");
    auto& parent = parent_[static_cast<std::size_t>(line.to)];
    if (parent != -1) {
      throw ValidationError(bus_name(line.to), "duplicate parent (fed by bus " + std::to_string(parent) +
                                                   " and bus " + std::to_string(line.from) + ")");
    }
    parent = line.from;
    line_into_[static_cast<std::size_t>(line.to)] = l;
    children_[static_cast<std::size_t>(line.from)].push_back(line.to);
  }

  std::deque<int> frontier{0};
  std::vector<bool> seen(static_cast<std::size_t>(n + 1), false);
  seen[0] = true;
  while (!frontier.empty()) {
    const int bus = frontier.front();
    frontier.pop_front();
    for (int child : children_[static_cast<std::size_t>(bus)]) {
      seen[static_cast<std::size_t>(child)] = true;
      order_.push_back(child);
      frontier.push_back(child);
    }
  }
  for (int id = 1; id <= n; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      // Every bus has exactly one parent here, so an unreached bus sits on a cycle.
      throw ValidationError(bus_name(id), "not reachable from the substation (cycle)");
    }
  }
}

VoltageBand RadialNetwork::band() const {
  const auto n = static_cast<Eigen::Index>(size());
  VoltageBand band{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    band.lower(i) = buses_[static_cast<std::size_t>(i)].v_lower;
    band.upper(i) = buses_[static_cast<std::size_t>(i)].v_upper;
  }
  return band;
}

SensitivityMatrices build_sensitivity(const RadialNetwork& network) {
  const auto n = static_cast<Eigen::Index>(network.size());
  SensitivityMatrices s{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  std::vector<bool> done(static_cast<std::size_t>(n + 1), false);
  // Visiting parents first, a processed bus k is never in the subtree of j,
  // so the path shared by j and k equals the path shared by parent(j) and k.
  for (int j : network.root_to_leaf_order()) {
    const int p = network.parent(j);
    const Line& line = network.lines()[network.line_into(j)];
    const Eigen::Index jj = j - 1;
    for (int k = 1; k <= static_cast<int>(n); ++k) {
      if (!done[static_cast<std::size_t>(k)] || p == 0) continue;
      const Eigen::Index kk = k - 1;
      s.X(jj, kk) = s.X(kk, jj) = s.X(p - 1, kk);
      s.R(jj, kk) = s.R(kk, jj) = s.R(p - 1, kk);
    }
    const double x_above = p == 0 ? 0.0 : s.X(p - 1, p - 1);
    const double r_above = p == 0 ? 0.0 : s.R(p - 1, p - 1);
    s.X(jj, jj) = x_above + 2.0 * line.x;
    s.R(jj, jj) = r_above + 2.0 * line.r;
    done[static_cast<std::size_t>(j)] = true;
  }
  return s;
}

double check_positive_definite(const Eigen::MatrixXd& m) { return linalg::min_eigenvalue(m); }

DistflowSolution solve_distflow(const RadialNetwork& network, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& q) {
  const auto n = static_cast<Eigen::Index>(network.size());
  if (p.size() != n || q.size() != n) {
    throw DimensionError("solve_distflow: injections must have length " + std::to_string(n));
  }
  DistflowSolution sol{{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)}, Eigen::VectorXd(n)};
  const auto& order = network.root_to_leaf_order();
  // Inflow to j equals the negated injection at j plus everything it feeds.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    const auto l = static_cast<Eigen::Index>(network.line_into(j));
    double P = -p(j - 1);
    double Q = -q(j - 1);
    for (int k : network.children(j)) {
      P += sol.flows.P(static_cast<Eigen::Index>(network.line_into(k)));
      Q += sol.flows.Q(static_cast<Eigen::Index>(network.line_into(k)));
    }
    sol.flows.P(l) = P;
    sol.flows.Q(l) = Q;
  }
  for (int j : order) {
    const int i = network.parent(j);
    const auto l = static_cast<Eigen::Index>(network.line_into(j));
    const Line& line = network.lines()[static_cast<std::size_t>(l)];
    const double v_parent = i == 0 ? network.v0() : sol.v(i - 1);
    sol.v(j - 1) = v_parent - 2.0 * (line.r * sol.flows.P(l) + line.x * sol.flows.Q(l));
  }
  return sol;
}

double conservation_residual(const RadialNetwork& network, const Eigen::VectorXd& p,
                             const Eigen::VectorXd& q, const BranchFlows& flows) {
  double worst = 0.0;
  for (int j = 1; j <= static_cast<int>(network.size()); ++j) {
    const auto in = static_cast<Eigen::Index>(network.line_into(j));
    double out_p = 0.0;
    double out_q = 0.0;
    for (int k : network.children(j)) {
      out_p += flows.P(static_cast<Eigen::Index>(network.line_into(k)));
      out_q += flows.Q(static_cast<Eigen::Index>(network.line_into(k)));
    }
    worst = std::max(worst, std::abs(-p(j - 1) - (flows.P(in) - out_p)));
    worst = std::max(worst, std::abs(-q(j - 1) - (flows.Q(in) - out_q)));
  }
  return worst;
}

RadialNetwork generate_random_feeder(std::size_t n, std::uint64_t seed, const ImpedanceRange& range) {
  if (n < 1) throw ValidationError("n", "feeder needs at least one bus");
  if (!(range.r_min > 0.0) || !(range.x_min > 0.0)) {
    throw ValidationError("impedance_range", "bounds must be positive");
  }
  if (range.r_min > range.r_max || range.x_min > range.x_max) {
    throw ValidationError("impedance_range", "empty range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> r_dist(range.r_min, range.r_max);
  std::uniform_real_distribution<double> x_dist(range.x_min, range.x_max);
  std::vector<Bus> buses;
  std::vector<Line> lines;
  for (std::size_t k = 1; k <= n; ++k) {
    std::uniform_int_distribution<int> parent_dist(0, static_cast<int>(k) - 1);
    const int id = static_cast<int>(k);
    buses.push_back({id, kDefaultVLower, kDefaultVUpper});
    const int parent = parent_dist(rng);
    const double r = r_dist(rng);
    const double x = x_dist(rng);
    lines.push_back({parent, id, r, x});
  }
  return RadialNetwork(std::move(buses), std::move(lines));
}

RadialNetwork five_bus_feeder() {
  std::vector<Bus> buses;
  for (int id = 1; id <= 4; ++id) buses.push_back({id, kDefaultVLower, kDefaultVUpper});
  std::vector<Line> lines{{0, 1, 0.02, 0.05}, {1, 2, 0.02, 0.05}, {2, 3, 0.02, 0.05}, {2, 4, 0.02, 0.05}};
  return RadialNetwork(std::move(buses), std::move(lines));
}

RadialNetwork single_line_feeder(double r, double x, double v_lower, double v_upper) {
  return RadialNetwork({{1, v_lower, v_upper}}, {{0, 1, r, x}});
}

}  // namespace voltstab
