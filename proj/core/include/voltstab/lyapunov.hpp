#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voltstab/dynamics.hpp"
#include "voltstab/linalg.hpp"
#include "voltstab/monotone_check.hpp"
#include "voltstab/scenario.hpp"

namespace voltstab {

/// V(v) = 1/2 g(v)^T X g(v), equivalently 1/2 f^T X^-1 f for the closed-loop
/// velocity f = X g. Every evaluation computes both forms and throws if they
/// disagree beyond 1e-9 (relative to max(1, V)).
class KrasovskiiFunction {
 public:
  /// Throws ValidationError if X is not positive definite.
  explicit KrasovskiiFunction(Eigen::MatrixXd X);

  double value(const Policy& policy, const Eigen::VectorXd& v) const;
  double value_of_action(const Eigen::VectorXd& g) const;
  /// dV/dt = (X g)^T diag(dg/dv) (X g), right-hand slopes at kinks.
  double time_derivative(const Policy& policy, const Eigen::VectorXd& v) const;

  const Eigen::MatrixXd& X() const { return X_; }

 private:
  Eigen::MatrixXd X_;
  linalg::Cholesky chol_;
};

double krasovskii_value(const Eigen::MatrixXd& X, const Policy& policy, const Eigen::VectorXd& v);
double lyapunov_time_derivative(const Eigen::MatrixXd& X, const Policy& policy, const Eigen::VectorXd& v);

/// True iff g_i(v_i) = 0 on every bus.
bool equilibrium_check(const Policy& policy, const Eigen::VectorXd& v);

/// Per-step slack for the Euler decrease test: for a nonincreasing policy
/// with slope bound L, V(t+1) <= V(t) + kappa dt^2 |u(t)|^2 with
/// kappa = 1/2 |X|^3 L^2.
double decrease_slack_kappa(const Eigen::MatrixXd& X, double lipschitz);

struct CertifyConfig {
  std::size_t grid_points = 200;  ///< per bus, over [lower - margin, upper + margin]
  double margin = 0.5;
  std::size_t joint_samples = 10000;
  std::size_t rollouts = 100;
  SimulationConfig sim{};
  double tolerance = 1e-3;  ///< dist_to_band(v_T) must fall below this
  double eps = 1e-3;
  std::size_t refine = 10;  ///< dt divisor for re-running a rollout that breaks the slack
  std::uint64_t seed = 0;
  ScenarioConfig ranges{};
  std::size_t max_witnesses = 8;

  void validate() const;
  std::string canonical_json() const;
};

struct CertificateWitness {
  long bus = -1;  ///< -1 for joint samples and rollouts
  long scenario = -1;
  long step = -1;
  double value = 0.0;
  std::string detail;
};

struct CertificateClause {
  std::string name;
  bool passed = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::vector<CertificateWitness> witnesses;
};

/// Sampled rendering of the stability argument:
///   jacobian_nonpositive  dg_i/dv_i <= 0 on the grid and joint samples
///   strict_outside_band   dg_i/dv_i <= -eps on out-of-band grid points
///   lyapunov_derivative   dV/dt <= 0 at joint samples, and < 0 unless g = 0
///   lyapunov_decrease     V nonincreasing along rollouts within kappa dt^2 |u|^2
///   convergence_to_band   dist_to_band(v_T) <= tolerance on every rollout
struct StabilityCertificate {
  std::string policy_id;
  std::vector<CertificateClause> clauses;
  double kappa = 0.0;
  double lipschitz = 0.0;
  std::size_t refined_rollouts = 0;
  CertifyConfig config;
  std::string config_hash;

  bool passed() const;
  const CertificateClause& clause(const std::string& name) const;
  std::string to_json() const;
  std::string to_text() const;
};

StabilityCertificate certify_policy(const Eigen::MatrixXd& X, const Policy& policy, const VoltageBand& band,
                                    const CertifyConfig& cfg = {}, const std::string& policy_id = "policy");

}  // namespace voltstab
