#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "voltstab/grid.hpp"
#include "voltstab/policy.hpp"

namespace voltstab {

/// Reactive injections q, the uncontrollable voltage component v_env, and
/// the voltages v = X q + v_env. v is always recomputed, never set.
class GridState {
 public:
  GridState(const Eigen::MatrixXd& X, Eigen::VectorXd q, Eigen::VectorXd v_env);

  const Eigen::VectorXd& q() const { return q_; }
  const Eigen::VectorXd& v() const { return v_; }
  const Eigen::VectorXd& v_env() const { return v_env_; }
  std::size_t size() const { return static_cast<std::size_t>(q_.size()); }

 private:
  Eigen::VectorXd q_;
  Eigen::VectorXd v_env_;
  Eigen::VectorXd v_;
};

/// Forward-Euler step of dq/dt = u: q' = q + dt u, v' = X q' + v_env.
/// Throws DivergenceError for non-finite u.
GridState step(const GridState& state, const Eigen::VectorXd& u, double dt, const Eigen::MatrixXd& X);

struct CostParams {
  double eta1 = 100.0;  ///< voltage-deviation weight
  double eta2 = 50.0;   ///< action weight
  double gamma = 0.99;  ///< per-step discount

  void validate() const;
};

/// Signed band violation: v - upper above the band, v - lower below, else 0.
double band_violation(double v, double lower, double upper);

/// Per-bus costs c_i = eta1 * violation_i^2 + eta2 * u_i^2.
Eigen::VectorXd stage_cost_per_bus(const Eigen::VectorXd& v, const Eigen::VectorXd& u, const VoltageBand& band,
                                   const CostParams& cp);
double stage_cost(const Eigen::VectorXd& v, const Eigen::VectorXd& u, const VoltageBand& band, const CostParams& cp);

/// Euclidean distance from v to the box S_v.
double dist_to_band(const Eigen::VectorXd& v, const VoltageBand& band);

struct SimulationConfig {
  double dt = 0.1;
  std::size_t horizon = 100;
  double blowup = 10.0;  ///< |v_i| above this declares divergence, p.u.

  void validate() const;
};

/// States v[0..T], q[0..T]; actions u[0..T-1] with stage costs cost[t] =
/// c(v[t], u[t]). A diverged trajectory stops at the first state past the
/// blow-up bound.
struct Trajectory {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> v;
  std::vector<Eigen::VectorXd> q;
  std::vector<Eigen::VectorXd> u;
  std::vector<double> cost;
  double discounted_cost = 0.0;
  bool diverged = false;

  std::size_t steps() const { return u.size(); }
};

/// Noise-free closed-loop simulation with u(t) = policy(v(t)).
Trajectory rollout(const Policy& policy, const Eigen::MatrixXd& X, const VoltageBand& band,
                   const Eigen::VectorXd& v_env, const Eigen::VectorXd& q0, const SimulationConfig& sim,
                   const CostParams& cp);

/// Smallest t with dist_to_band(v(s)) <= tolerance for all s >= t; nullopt
/// when the final state is outside or the trajectory diverged.
std::optional<std::size_t> recovery_time(const Trajectory& traj, const VoltageBand& band, double tolerance = 0.0);

}  // namespace voltstab
