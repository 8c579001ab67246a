#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voltstab/dynamics.hpp"
#include "voltstab/scenario.hpp"

namespace voltstab {

/// Reactive consumption before recovery: sum over t < recovery time of
/// sum_i |q_i(t)|; the whole recorded horizon if the trajectory never
/// recovers.
double transient_cost(const Trajectory& traj, const VoltageBand& band, double tolerance = 0.0);

/// Sum over t < recovery time of |u(t)|^2 (same cut-off as transient_cost).
double transient_effort(const Trajectory& traj, const VoltageBand& band, double tolerance = 0.0);

struct EvalConfig {
  SimulationConfig sim{};
  CostParams cost{};
  double tolerance = 1e-3;        ///< recovery means dist_to_band <= tolerance from then on
  std::size_t histogram_bins = 10;
  double histogram_max = 0.1;     ///< ratios at or above this land in the last bin

  void validate() const;
  std::string canonical_json() const;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for fewer than 2 values
  std::size_t n = 0;
};

struct PolicyMetrics {
  std::string name;
  double stability_rate = 0.0;
  Stat recovery_time;  ///< over recovered scenarios only
  Stat transient_cost;
  Stat transient_effort;
  Stat discounted_cost;
  Stat over_voltage_ratio;   ///< (v_T - v0)^+ / v0 per bus and scenario
  Stat under_voltage_ratio;  ///< (v0 - v_T)^+ / v0 per bus and scenario
  std::vector<std::size_t> over_histogram;
  std::vector<std::size_t> under_histogram;
  std::vector<Trajectory> trajectories;  ///< one per scenario, in suite order
};

struct EvalReport {
  std::vector<PolicyMetrics> policies;
  std::size_t scenario_count = 0;
  std::size_t bus_count = 0;
  EvalConfig config;
  std::string suite_hash;
  std::string config_hash;

  const PolicyMetrics& find(const std::string& name) const;
  /// Columns policy,metric,mean,std,n.
  std::string to_csv() const;
  /// Columns policy,kind,bin,lo,hi,count.
  std::string histogram_csv() const;
  std::string metadata_json() const;
};

struct NamedPolicy {
  std::string name;
  std::shared_ptr<const Policy> policy;
};

/// Noise-free rollouts of every policy on the identical suite. Scenarios run
/// concurrently; aggregation follows suite order with compensated sums.
EvalReport evaluate(const std::vector<NamedPolicy>& policies, const Eigen::MatrixXd& X, const VoltageBand& band,
                    double v0, const std::vector<Scenario>& suite, const EvalConfig& cfg = {});

/// Long format t,bus,v,q,u,cost; the final state has empty u and cost.
std::string trajectory_csv(const Trajectory& traj, const VoltageBand& band, const CostParams& cp);

}  // namespace voltstab
