#include "voltstab/dynamics.hpp"

#include <cmath>
#include <string>

#include "voltstab/error.hpp"

namespace voltstab {

GridState::GridState(const Eigen::MatrixXd& X, Eigen::VectorXd q, Eigen::VectorXd v_env)
    : q_(std::move(q)), v_env_(std::move(v_env)) {
  if (X.rows() != X.cols() || X.rows() != q_.size() || v_env_.size() != q_.size()) {
    throw DimensionError("GridState: X, q and v_env sizes disagree");
  }
  v_ = X * q_ + v_env_;
}

GridState step(const GridState& state, const Eigen::VectorXd& u, double dt, const Eigen::MatrixXd& X) {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (static_cast<std::size_t>(u.size()) != state.size()) {
    throw DimensionError("step: action has length " + std::to_string(u.size()) + ", expected " +
                         std::to_string(state.size()));
  }
  if (!u.allFinite()) throw DivergenceError("step: non-finite control action");
  return GridState(X, state.q() + dt * u, state.v_env());
}

void CostParams::validate() const {
  if (!(eta1 >= 0.0) || !(eta2 >= 0.0)) throw ValidationError("cost", "eta1 and eta2 must be nonnegative");
  if (eta1 == 0.0 && eta2 == 0.0) throw ValidationError("cost", "eta1 and eta2 cannot both be zero");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("cost", "gamma must lie in (0, 1]");
}

double band_violation(double v, double lower, double upper) {
  if (v > upper) return v - upper;
  if (v < lower) return v - lower;
  return 0.0;
}

Eigen::VectorXd stage_cost_per_bus(const Eigen::VectorXd& v, const Eigen::VectorXd& u, const VoltageBand& band,
                                   const CostParams& cp) {
  if (v.size() != u.size() || static_cast<std::size_t>(v.size()) != band.size()) {
    throw DimensionError("stage_cost: v, u and band sizes disagree");
  }
  Eigen::VectorXd c(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double dev = band_violation(v(i), band.lower(i), band.upper(i));
    c(i) = cp.eta1 * dev * dev + cp.eta2 * u(i) * u(i);
  }
  return c;
}

double stage_cost(const Eigen::VectorXd& v, const Eigen::VectorXd& u, const VoltageBand& band, const CostParams& cp) {
  return stage_cost_per_bus(v, u, band, cp).sum();
}

double dist_to_band(const Eigen::VectorXd& v, const VoltageBand& band) {
  if (static_cast<std::size_t>(v.size()) != band.size()) throw DimensionError("dist_to_band: size mismatch");
  double sq = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double dev = band_violation(v(i), band.lower(i), band.upper(i));
    sq += dev * dev;
  }
  return std::sqrt(sq);
}

void SimulationConfig::validate() const {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (horizon < 1) throw ValidationError("horizon", "must be at least 1");
  if (!(blowup > 0.0)) throw ValidationError("blowup", "must be positive");
}

namespace {

bool blown_up(const Eigen::VectorXd& v, double bound) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i)) || std::abs(v(i)) > bound) return true;
  }
  return false;
}

}  // namespace

Trajectory rollout(const Policy& policy, const Eigen::MatrixXd& X, const VoltageBand& band,
                   const Eigen::VectorXd& v_env, const Eigen::VectorXd& q0, const SimulationConfig& sim,
                   const CostParams& cp) {
  sim.validate();
  Trajectory traj;
  traj.dt = sim.dt;
  traj.v.reserve(sim.horizon + 1);
  traj.q.reserve(sim.horizon + 1);
  GridState state(X, q0, v_env);
  traj.v.push_back(state.v());
  traj.q.push_back(state.q());
  if (blown_up(state.v(), sim.blowup)) {
    traj.diverged = true;
    return traj;
  }
  double discount = 1.0;
  for (std::size_t t = 0; t < sim.horizon; ++t) {
    Eigen::VectorXd u = policy(state.v());
    if (!u.allFinite()) {
      traj.diverged = true;
      break;
    }
    const double c = stage_cost(state.v(), u, band, cp);
    traj.discounted_cost += discount * c;
    discount *= cp.gamma;
    state = step(state, u, sim.dt, X);
    traj.u.push_back(std::move(u));
    traj.cost.push_back(c);
    traj.v.push_back(state.v());
    traj.q.push_back(state.q());
    if (blown_up(state.v(), sim.blowup)) {
      traj.diverged = true;
      break;
    }
  }
  return traj;
}

std::optional<std::size_t> recovery_time(const Trajectory& traj, const VoltageBand& band, double tolerance) {
  if (traj.v.empty()) throw ValidationError("trajectory", "empty trajectory");
  if (traj.diverged) return std::nullopt;
  std::optional<std::size_t> first;
  for (std::size_t t = traj.v.size(); t-- > 0;) {
    if (dist_to_band(traj.v[t], band) > tolerance) break;
    first = t;
  }
  return first;
}

}  // namespace voltstab
