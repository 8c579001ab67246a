#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voltstab/dynamics.hpp"

namespace voltstab {

enum class ScenarioKind { HighVoltage, LowVoltage, Mixed };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Disturbance sampler. Ranges are absolute per-unit values of v_env; the
/// defaults are synthetic (PV-heavy daytime for High, heavy load for Low).
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Mixed;
  Range high{1.05, 1.10};
  Range low{0.90, 0.95};
  Range nominal{0.98, 1.02};
  double violation_probability = 0.5;  ///< per-bus chance of an off-band draw
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scenario {
  Eigen::VectorXd v_env;
  Eigen::VectorXd q0;
  std::string label;
};

/// One draw for an n-bus feeder. High/Low force at least one off-band bus;
/// Mixed forces at least one high and one low bus when n >= 2. q0 = 0.
Scenario sample_scenario(const ScenarioConfig& cfg, std::size_t n, std::mt19937_64& rng);

/// `count` scenarios cycling High, Low, Mixed, from a single seeded stream.
std::vector<Scenario> make_scenario_suite(std::size_t n, std::size_t count, std::uint64_t seed,
                                          const ScenarioConfig& ranges = {});

/// JSON array of {"v_env": [...], "q0": [...], "label": "..."}.
std::vector<Scenario> parse_scenarios_json(const std::string& text);
std::string scenarios_to_json(const std::vector<Scenario>& suite);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);
void save_scenarios(const std::vector<Scenario>& suite, const std::filesystem::path& path);

/// Exogenous disturbance trace: one v_env vector per distinct time stamp.
struct EnvTrace {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> v_env;
};

/// CSV with header `t,bus_id,v_env`; every time stamp must list buses 1..n.
EnvTrace parse_env_trace_csv(const std::string& text, std::size_t n);
EnvTrace load_env_trace(const std::filesystem::path& path, std::size_t n);

/// Closed loop driven by a time-varying v_env: one control step per trace
/// sample (zero-order hold), q carried across samples.
Trajectory replay_trace(const Policy& policy, const Eigen::MatrixXd& X, const VoltageBand& band,
                        const EnvTrace& trace, const Eigen::VectorXd& q0, double dt, const CostParams& cp,
                        double blowup = 10.0);

}  // namespace voltstab
