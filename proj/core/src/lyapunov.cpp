#include "voltstab/lyapunov.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"
#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

namespace {

constexpr double kFormTolerance = 1e-9;

}  // namespace

KrasovskiiFunction::KrasovskiiFunction(Eigen::MatrixXd X) : X_(std::move(X)), chol_(X_) {
  if (!chol_.ok()) throw ValidationError("X", "not positive definite");
}

double KrasovskiiFunction::value_of_action(const Eigen::VectorXd& g) const {
  if (g.size() != X_.rows()) throw DimensionError("Lyapunov value: action has the wrong length");
  const Eigen::VectorXd f = X_ * g;
  const double direct = 0.5 * g.dot(f);
  const double via_inverse = 0.5 * f.dot(chol_.solve(f));
  if (std::abs(direct - via_inverse) > kFormTolerance * std::max(1.0, std::abs(direct))) {
    throw Error("Lyapunov forms disagree: " + format_real(direct) + " vs " + format_real(via_inverse));
  }
  return direct;
}

double KrasovskiiFunction::value(const Policy& policy, const Eigen::VectorXd& v) const {
  return value_of_action(policy(v));
}

double KrasovskiiFunction::time_derivative(const Policy& policy, const Eigen::VectorXd& v) const {
  const Eigen::VectorXd f = X_ * policy(v);
  return f.dot(policy.slopes(v).cwiseProduct(f));
}

double krasovskii_value(const Eigen::MatrixXd& X, const Policy& policy, const Eigen::VectorXd& v) {
  return KrasovskiiFunction(X).value(policy, v);
}

double lyapunov_time_derivative(const Eigen::MatrixXd& X, const Policy& policy, const Eigen::VectorXd& v) {
  return KrasovskiiFunction(X).time_derivative(policy, v);
}

bool equilibrium_check(const Policy& policy, const Eigen::VectorXd& v) {
  const Eigen::VectorXd g = policy(v);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g(i) != 0.0) return false;
  }
  return true;
}

double decrease_slack_kappa(const Eigen::MatrixXd& X, double lipschitz) {
  const double norm = linalg::symmetric_norm(X);
  return 0.5 * norm * norm * norm * lipschitz * lipschitz;
}

void CertifyConfig::validate() const {
  if (grid_points < 2) throw ValidationError("grid_points", "need at least 2");
  if (!(margin > 0.0)) throw ValidationError("margin", "must be positive");
  if (!(tolerance >= 0.0)) throw ValidationError("tolerance", "must be nonnegative");
  if (!(eps > 0.0)) throw ValidationError("eps", "must be positive");
  if (refine < 1) throw ValidationError("refine", "must be at least 1");
  sim.validate();
  ranges.validate();
}

std::string CertifyConfig::canonical_json() const {
  const nlohmann::json j = {
      {"grid_points", grid_points},
      {"margin", margin},
      {"joint_samples", joint_samples},
      {"rollouts", rollouts},
      {"dt", sim.dt},
      {"horizon", sim.horizon},
      {"blowup", sim.blowup},
      {"tolerance", tolerance},
      {"eps", eps},
      {"refine", refine},
      {"seed", seed},
      {"ranges",
       {{"high", {ranges.high.lo, ranges.high.hi}},
        {"low", {ranges.low.lo, ranges.low.hi}},
        {"nominal", {ranges.nominal.lo, ranges.nominal.hi}},
        {"violation_probability", ranges.violation_probability}}},
  };
  return j.dump();
}

bool StabilityCertificate::passed() const {
  for (const CertificateClause& c : clauses) {
    if (!c.passed) return false;
  }
  return true;
}

const CertificateClause& StabilityCertificate::clause(const std::string& name) const {
  for (const CertificateClause& c : clauses) {
    if (c.name == name) return c;
  }
  throw ValidationError("clause", "no clause named '" + name + "'");
}

std::string StabilityCertificate::to_json() const {
  nlohmann::json j;
  j["policy_id"] = policy_id;
  j["passed"] = passed();
  j["config_hash"] = config_hash;
  j["config"] = nlohmann::json::parse(config.canonical_json());
  j["tolerances"] = {{"eps", config.eps},
                     {"convergence", config.tolerance},
                     {"slack_kappa", kappa},
                     {"lipschitz", lipschitz}};
  j["refined_rollouts"] = refined_rollouts;
  j["clauses"] = nlohmann::json::array();
  for (const CertificateClause& c : clauses) {
    nlohmann::json w = nlohmann::json::array();
    for (const CertificateWitness& x : c.witnesses) {
      w.push_back({{"bus", x.bus}, {"scenario", x.scenario}, {"step", x.step}, {"value", x.value},
                   {"detail", x.detail}});
    }
    j["clauses"].push_back(
        {{"name", c.name}, {"passed", c.passed}, {"checked", c.checked}, {"violations", c.violations}, {"witnesses", w}});
  }
  return j.dump(2) + "\n";
}

std::string StabilityCertificate::to_text() const {
  std::ostringstream out;
  out << "certificate for " << policy_id << ": " << (passed() ? "PASS" : "FAIL") << "\n";
  out << "  eps=" << format_real(config.eps) << " tolerance=" << format_real(config.tolerance)
      << " kappa=" << format_real(kappa) << " dt=" << format_real(config.sim.dt) << " horizon=" << config.sim.horizon
      << "\n";
  for (const CertificateClause& c : clauses) {
    out << "  " << (c.passed ? "pass " : "FAIL ") << c.name << " (" << c.violations << " of " << c.checked
        << " checks violated)\n";
    for (const CertificateWitness& w : c.witnesses) {
      out << "    witness";
      if (w.bus >= 0) out << " bus=" << w.bus + 1;
      if (w.scenario >= 0) out << " scenario=" << w.scenario;
      if (w.step >= 0) out << " step=" << w.step;
      out << " value=" << format_real(w.value) << " " << w.detail << "\n";
    }
  }
  if (refined_rollouts > 0) out << "  " << refined_rollouts << " rollout(s) re-checked at dt/" << config.refine << "\n";
  out << "  config hash " << config_hash << "\n";
  return out.str();
}

namespace {

void record(CertificateClause& c, CertificateWitness w, std::size_t cap) {
  c.passed = false;
  ++c.violations;
  if (c.witnesses.size() < cap) c.witnesses.push_back(std::move(w));
}

struct RolloutCheck {
  bool decrease_ok = true;
  bool refined = false;
  long bad_step = -1;
  double excess = 0.0;
  bool converged = true;
  double final_dist = 0.0;
};

// First step where V rises by more than the slack, or -1. V(t) is computed
// from the recorded action u(t) = g(v(t)).
long first_slack_violation(const KrasovskiiFunction& lyap, const Trajectory& traj, double kappa, double& excess) {
  if (traj.u.empty()) return -1;
  double prev = lyap.value_of_action(traj.u[0]);
  for (std::size_t t = 1; t < traj.u.size(); ++t) {
    const double next = lyap.value_of_action(traj.u[t]);
    const double rise = next - prev - kappa * traj.dt * traj.dt * traj.u[t - 1].squaredNorm();
    if (rise > 1e-15 * (1.0 + prev)) {
      excess = rise;
      return static_cast<long>(t - 1);
    }
    prev = next;
  }
  return -1;
}

}  // namespace

StabilityCertificate certify_policy(const Eigen::MatrixXd& X, const Policy& policy, const VoltageBand& band,
                                    const CertifyConfig& cfg, const std::string& policy_id) {
  cfg.validate();
  if (policy.size() != band.size() || static_cast<std::size_t>(X.rows()) != band.size()) {
    throw DimensionError("certify_policy: X, policy and band cover different bus counts");
  }
  const KrasovskiiFunction lyap(X);
  const std::size_t n = band.size();
  const std::size_t cap = cfg.max_witnesses;
  const double slope_floor = cfg.eps * (1.0 - 1e-9);

  StabilityCertificate cert;
  cert.policy_id = policy_id;
  cert.config = cfg;
  cert.config_hash = content_hash(cfg.canonical_json());
  cert.lipschitz = policy.lipschitz_bound();
  cert.kappa = decrease_slack_kappa(X, cert.lipschitz);

  CertificateClause jac{"jacobian_nonpositive", true, 0, 0, {}};
  CertificateClause strict{"strict_outside_band", true, 0, 0, {}};
  CertificateClause deriv{"lyapunov_derivative", true, 0, 0, {}};
  CertificateClause decrease{"lyapunov_decrease", true, 0, 0, {}};
  CertificateClause converge{"convergence_to_band", true, 0, 0, {}};

  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double lo = band.lower(k) - cfg.margin;
    const double hi = band.upper(k) + cfg.margin;
    for (std::size_t j = 0; j < cfg.grid_points; ++j) {
      const double v = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(cfg.grid_points - 1);
      const double s = policy.slope(i, v);
      ++jac.checked;
      if (!(s <= 0.0)) record(jac, {static_cast<long>(i), -1, -1, v, "slope=" + format_real(s)}, cap);
      if (v < band.lower(k) || v > band.upper(k)) {
        ++strict.checked;
        if (!(s <= -slope_floor)) record(strict, {static_cast<long>(i), -1, -1, v, "slope=" + format_real(s)}, cap);
      }
    }
  }

  // Joint samples: each bus independently in band, above it, or below it.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> region(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < cfg.joint_samples; ++s) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double lo = band.lower(i);
      const double hi = band.upper(i);
      switch (region(rng)) {
        case 0: v(i) = lo + (hi - lo) * unit(rng); break;
        case 1: v(i) = hi + cfg.margin * unit(rng); break;
        default: v(i) = lo - cfg.margin * unit(rng); break;
      }
    }
    const Eigen::VectorXd d = policy.slopes(v);
    ++jac.checked;
    if (d.maxCoeff() > 0.0) {
      Eigen::Index at = 0;
      d.maxCoeff(&at);
      record(jac, {static_cast<long>(at), static_cast<long>(s), -1, v(at), "joint slope=" + format_real(d(at))}, cap);
    }
    const double vdot = lyap.time_derivative(policy, v);
    ++deriv.checked;
    if (vdot > 0.0) {
      record(deriv, {-1, static_cast<long>(s), -1, vdot, "dV/dt > 0"}, cap);
    } else if (vdot == 0.0 && !equilibrium_check(policy, v)) {
      record(deriv, {-1, static_cast<long>(s), -1, vdot, "dV/dt = 0 away from equilibrium"}, cap);
    }
  }

  const std::vector<Scenario> suite = make_scenario_suite(n, cfg.rollouts, cfg.seed, cfg.ranges);
  std::vector<RolloutCheck> checks(suite.size());
  const CostParams cp;
  detail::parallel_for(suite.size(), [&](std::size_t k) {
    RolloutCheck& rc = checks[k];
    const Trajectory traj = rollout(policy, X, band, suite[k].v_env, suite[k].q0, cfg.sim, cp);
    rc.converged = !traj.diverged && dist_to_band(traj.v.back(), band) <= cfg.tolerance;
    rc.final_dist = traj.diverged ? std::numeric_limits<double>::infinity() : dist_to_band(traj.v.back(), band);
    if (!traj.diverged) {
      rc.bad_step = first_slack_violation(lyap, traj, cert.kappa, rc.excess);
      if (rc.bad_step < 0) return;
    }
    // An Euler artifact disappears under a finer step; instability does not.
    rc.refined = true;
    SimulationConfig fine = cfg.sim;
    fine.dt = cfg.sim.dt / static_cast<double>(cfg.refine);
    fine.horizon = cfg.sim.horizon * cfg.refine;
    const Trajectory again = rollout(policy, X, band, suite[k].v_env, suite[k].q0, fine, cp);
    double excess = 0.0;
    const long bad = again.diverged ? 0 : first_slack_violation(lyap, again, cert.kappa, excess);
    rc.decrease_ok = bad < 0;
    if (!rc.decrease_ok) {
      rc.bad_step = bad;
      rc.excess = again.diverged ? std::numeric_limits<double>::infinity() : excess;
    }
  });
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const RolloutCheck& rc = checks[k];
    ++decrease.checked;
    ++converge.checked;
    if (rc.refined) ++cert.refined_rollouts;
    if (!rc.decrease_ok) {
      record(decrease, {-1, static_cast<long>(k), rc.bad_step, rc.excess, "V rises beyond slack"}, cap);
    }
    if (!rc.converged) {
      record(converge, {-1, static_cast<long>(k), static_cast<long>(cfg.sim.horizon), rc.final_dist,
                        "dist_to_band at horizon"},
             cap);
    }
  }
  cert.clauses = {jac, strict, deriv, decrease, converge};
  return cert;
}

}  // namespace voltstab
