#include "voltstab/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"
#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

namespace {

std::size_t cutoff(const Trajectory& traj, const VoltageBand& band, double tolerance) {
  const auto rec = recovery_time(traj, band, tolerance);
  return rec ? *rec : traj.v.size();
}

class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

Stat summarize(const std::vector<double>& xs) {
  Stat s;
  s.n = xs.size();
  if (xs.empty()) return s;
  KahanSum sum;
  for (double x : xs) sum.add(x);
  s.mean = sum.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    KahanSum sq;
    for (double x : xs) sq.add((x - s.mean) * (x - s.mean));
    s.std = std::sqrt(sq.value() / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace

double transient_cost(const Trajectory& traj, const VoltageBand& band, double tolerance) {
  const std::size_t end = cutoff(traj, band, tolerance);
  double total = 0.0;
  for (std::size_t t = 0; t < end && t < traj.q.size(); ++t) total += traj.q[t].cwiseAbs().sum();
  return total;
}

double transient_effort(const Trajectory& traj, const VoltageBand& band, double tolerance) {
  const std::size_t end = cutoff(traj, band, tolerance);
  double total = 0.0;
  for (std::size_t t = 0; t < end && t < traj.u.size(); ++t) total += traj.u[t].squaredNorm();
  return total;
}

void EvalConfig::validate() const {
  sim.validate();
  cost.validate();
  if (!(tolerance >= 0.0)) throw ValidationError("tolerance", "must be nonnegative");
  if (histogram_bins == 0) throw ValidationError("histogram_bins", "must be positive");
  if (!(histogram_max > 0.0)) throw ValidationError("histogram_max", "must be positive");
}

std::string EvalConfig::canonical_json() const {
  const nlohmann::json j = {{"dt", sim.dt},
                            {"horizon", sim.horizon},
                            {"blowup", sim.blowup},
                            {"eta1", cost.eta1},
                            {"eta2", cost.eta2},
                            {"gamma", cost.gamma},
                            {"tolerance", tolerance},
                            {"histogram_bins", histogram_bins},
                            {"histogram_max", histogram_max}};
  return j.dump();
}

const PolicyMetrics& EvalReport::find(const std::string& name) const {
  for (const PolicyMetrics& p : policies) {
    if (p.name == name) return p;
  }
  throw ValidationError("policy", "no policy named '" + name + "' in report");
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "policy,metric,mean,std,n\n";
  auto row = [&out](const std::string& policy, const char* metric, const Stat& s) {
    out << policy << "," << metric << "," << format_real(s.mean) << "," << format_real(s.std) << "," << s.n << "\n";
  };
  for (const PolicyMetrics& p : policies) {
    row(p.name, "stability_rate", Stat{p.stability_rate, 0.0, scenario_count});
    row(p.name, "recovery_time", p.recovery_time);
    row(p.name, "transient_cost", p.transient_cost);
    row(p.name, "transient_effort_u2", p.transient_effort);
    row(p.name, "discounted_cost", p.discounted_cost);
    row(p.name, "over_voltage_ratio", p.over_voltage_ratio);
    row(p.name, "under_voltage_ratio", p.under_voltage_ratio);
  }
  return out.str();
}

std::string EvalReport::histogram_csv() const {
  std::ostringstream out;
  out << "policy,kind,bin,lo,hi,count\n";
  const double width = config.histogram_max / static_cast<double>(config.histogram_bins);
  for (const PolicyMetrics& p : policies) {
    for (const auto& [kind, counts] : {std::pair{"over", &p.over_histogram}, std::pair{"under", &p.under_histogram}}) {
      for (std::size_t b = 0; b < counts->size(); ++b) {
        const bool last = b + 1 == counts->size();
        out << p.name << "," << kind << "," << b << "," << format_real(width * static_cast<double>(b)) << ","
            << (last ? std::string("inf") : format_real(width * static_cast<double>(b + 1))) << "," << (*counts)[b]
            << "\n";
      }
    }
  }
  return out.str();
}

std::string EvalReport::metadata_json() const {
  nlohmann::json j;
  j["scenario_count"] = scenario_count;
  j["bus_count"] = bus_count;
  j["suite_hash"] = suite_hash;
  j["config_hash"] = config_hash;
  j["config"] = nlohmann::json::parse(config.canonical_json());
  j["policies"] = nlohmann::json::array();
  for (const PolicyMetrics& p : policies) j["policies"].push_back(p.name);
  return j.dump(2) + "\n";
}

EvalReport evaluate(const std::vector<NamedPolicy>& policies, const Eigen::MatrixXd& X, const VoltageBand& band,
                    double v0, const std::vector<Scenario>& suite, const EvalConfig& cfg) {
  cfg.validate();
  if (suite.empty()) throw ValidationError("suite", "needs at least one scenario");
  if (!(v0 > 0.0)) throw ValidationError("v0", "must be positive");
  const std::size_t n = band.size();
  for (const Scenario& s : suite) {
    if (static_cast<std::size_t>(s.v_env.size()) != n) throw DimensionError("scenario size does not match the band");
  }
  EvalReport report;
  report.scenario_count = suite.size();
  report.bus_count = n;
  report.config = cfg;
  report.suite_hash = content_hash(scenarios_to_json(suite));
  report.config_hash = content_hash(cfg.canonical_json());

  auto bin_of = [&cfg](double ratio) {
    if (!(ratio < cfg.histogram_max)) return cfg.histogram_bins - 1;
    const auto b = static_cast<std::size_t>(ratio / cfg.histogram_max * static_cast<double>(cfg.histogram_bins));
    return std::min(b, cfg.histogram_bins - 1);
  };

  for (const NamedPolicy& np : policies) {
    if (!np.policy || np.policy->size() != n) throw DimensionError("policy '" + np.name + "' does not match the band");
    PolicyMetrics m;
    m.name = np.name;
    m.trajectories.resize(suite.size());
    detail::parallel_for(suite.size(), [&](std::size_t k) {
      m.trajectories[k] = rollout(*np.policy, X, band, suite[k].v_env, suite[k].q0, cfg.sim, cfg.cost);
    });
    std::vector<double> rec, tc, te, dc, over, under;
    m.over_histogram.assign(cfg.histogram_bins, 0);
    m.under_histogram.assign(cfg.histogram_bins, 0);
    std::size_t stable = 0;
    for (const Trajectory& traj : m.trajectories) {
      const auto r = recovery_time(traj, band, cfg.tolerance);
      if (r) {
        ++stable;
        rec.push_back(static_cast<double>(*r));
      }
      tc.push_back(transient_cost(traj, band, cfg.tolerance));
      te.push_back(transient_effort(traj, band, cfg.tolerance));
      dc.push_back(traj.discounted_cost);
      const Eigen::VectorXd& vt = traj.v.back();
      for (Eigen::Index i = 0; i < vt.size(); ++i) {
        const double o = traj.diverged ? std::numeric_limits<double>::infinity() : std::max(0.0, vt(i) - v0) / v0;
        const double u = traj.diverged ? std::numeric_limits<double>::infinity() : std::max(0.0, v0 - vt(i)) / v0;
        if (!traj.diverged) {
          over.push_back(o);
          under.push_back(u);
        }
        ++m.over_histogram[bin_of(o)];
        ++m.under_histogram[bin_of(u)];
      }
    }
    m.stability_rate = static_cast<double>(stable) / static_cast<double>(suite.size());
    m.recovery_time = summarize(rec);
    m.transient_cost = summarize(tc);
    m.transient_effort = summarize(te);
    m.discounted_cost = summarize(dc);
    m.over_voltage_ratio = summarize(over);
    m.under_voltage_ratio = summarize(under);
    report.policies.push_back(std::move(m));
  }
  return report;
}

std::string trajectory_csv(const Trajectory& traj, const VoltageBand& band, const CostParams& cp) {
  std::ostringstream out;
  out << "t,bus,v,q,u,cost\n";
  for (std::size_t t = 0; t < traj.v.size(); ++t) {
    const bool has_action = t < traj.u.size();
    Eigen::VectorXd c;
    if (has_action) c = stage_cost_per_bus(traj.v[t], traj.u[t], band, cp);
    for (Eigen::Index i = 0; i < traj.v[t].size(); ++i) {
      out << t << "," << i + 1 << "," << format_real(traj.v[t](i)) << "," << format_real(traj.q[t](i)) << ",";
      if (has_action) out << format_real(traj.u[t](i)) << "," << format_real(c(i));
      else out << ",";
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace voltstab
