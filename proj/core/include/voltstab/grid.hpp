#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace voltstab {

inline constexpr double kDefaultBaseKv = 12.0;
inline constexpr double kDefaultV0 = 1.0;
inline constexpr double kDefaultVLower = 0.95;
inline constexpr double kDefaultVUpper = 1.05;

/// Per-bus acceptable voltage interval S_v = prod [lower_i, upper_i], per-unit.
struct VoltageBand {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t size() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Eigen::VectorXd& v) const;

  static VoltageBand uniform(std::size_t n, double lower = kDefaultVLower,
                             double upper = kDefaultVUpper);
};

struct Bus {
  int id = 0;
  double v_lower = kDefaultVLower;
  double v_upper = kDefaultVUpper;
};

/// A line from `from` (parent) to `to` (child), per-unit impedance.
struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
};

/// Radial distribution feeder rooted at the substation (bus 0).
///
/// Non-substation buses carry ids 1..n and are stored at index id-1. The
/// constructor validates the tree and throws ValidationError naming the
/// offending bus or line. Immutable after construction.
class RadialNetwork {
 public:
  RadialNetwork(std::vector<Bus> buses, std::vector<Line> lines, double v0 = kDefaultV0,
                double base_kv = kDefaultBaseKv);

  /// Number of non-substation buses.
  std::size_t size() const { return buses_.size(); }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  double v0() const { return v0_; }
  double base_kv() const { return base_kv_; }

  int parent(int bus) const { return parent_.at(static_cast<std::size_t>(bus)); }
  /// Index into lines() of the line feeding `bus` (bus >= 1).
  std::size_t line_into(int bus) const { return line_into_.at(static_cast<std::size_t>(bus)); }
  const std::vector<int>& children(int bus) const { return children_.at(static_cast<std::size_t>(bus)); }
  /// Non-substation bus ids, parents before children.
  const std::vector<int>& root_to_leaf_order() const { return order_; }

  VoltageBand band() const;

 private:
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  double v0_;
  double base_kv_;
  std::vector<int> parent_;
  std::vector<std::size_t> line_into_;
  std::vector<std::vector<int>> children_;
  std::vector<int> order_;
};

/// X and R of the linearized power flow v = R p + X q + v0 1.
struct SensitivityMatrices {
  Eigen::MatrixXd X;
  Eigen::MatrixXd R;
};

/// X_ij = 2 * sum of x over lines shared by the substation paths of i and j;
/// R likewise with r.
SensitivityMatrices build_sensitivity(const RadialNetwork& network);

/// Minimum eigenvalue of a symmetric matrix (positive => positive definite).
/// Throws ValidationError for input asymmetric beyond 1e-9.
double check_positive_definite(const Eigen::MatrixXd& m);

/// Active/reactive flow on each line, indexed like RadialNetwork::lines().
struct BranchFlows {
  Eigen::VectorXd P;
  Eigen::VectorXd Q;
};

struct DistflowSolution {
  BranchFlows flows;
  Eigen::VectorXd v;
};

/// Linear branch-flow recursion: flows accumulate leaf-to-root from the bus
/// injections, voltages drop root-to-leaf by 2 (r P + x Q) per line.
DistflowSolution solve_distflow(const RadialNetwork& network, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& q);

/// Largest violation of flow conservation at any bus for the given flows.
double conservation_residual(const RadialNetwork& network, const Eigen::VectorXd& p,
                             const Eigen::VectorXd& q, const BranchFlows& flows);

struct ImpedanceRange {
  double r_min = 0.01;
  double r_max = 0.05;
  double x_min = 0.02;
  double x_max = 0.08;
};

/// Random radial feeder with n non-substation buses; bus k attaches to a
/// uniformly chosen bus in {0..k-1}. Deterministic under `seed`.
RadialNetwork generate_random_feeder(std::size_t n, std::uint64_t seed,
                                     const ImpedanceRange& range = {});

/// Five-bus feeder: chain 0-1-2 with branches 2-3 and 2-4. The line data
/// (r = 0.02, x = 0.05 p.u.) is synthetic.
RadialNetwork five_bus_feeder();

/// Substation plus one bus on a single line.
RadialNetwork single_line_feeder(double r, double x, double v_lower = kDefaultVLower,
                                 double v_upper = kDefaultVUpper);

}  // namespace voltstab
