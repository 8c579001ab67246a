#include "voltstab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::HighVoltage: return "high";
    case ScenarioKind::LowVoltage: return "low";
    case ScenarioKind::Mixed: return "mixed";
  }
  return "mixed";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "high") return ScenarioKind::HighVoltage;
  if (name == "low") return ScenarioKind::LowVoltage;
  if (name == "mixed") return ScenarioKind::Mixed;
  throw ValidationError("scenario kind", "unknown kind '" + name + "' (expected high, low or mixed)");
}

void ScenarioConfig::validate() const {
  for (const Range* r : {&high, &low, &nominal}) {
    if (!(r->lo <= r->hi)) throw ValidationError("scenario range", "empty range");
  }
  if (!(violation_probability >= 0.0 && violation_probability <= 1.0)) {
    throw ValidationError("violation_probability", "must lie in [0, 1]");
  }
}

Scenario sample_scenario(const ScenarioConfig& cfg, std::size_t n, std::mt19937_64& rng) {
  cfg.validate();
  if (n == 0) throw ValidationError("n", "scenario needs at least one bus");
  const auto size = static_cast<Eigen::Index>(n);
  auto draw = [&rng](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, size - 1);

  Scenario s{Eigen::VectorXd(size), Eigen::VectorXd::Zero(size), to_string(cfg.kind)};
  // 0 nominal, 1 high, 2 low
  std::vector<int> role(n, 0);
  switch (cfg.kind) {
    case ScenarioKind::HighVoltage:
    case ScenarioKind::LowVoltage: {
      const int off = cfg.kind == ScenarioKind::HighVoltage ? 1 : 2;
      for (auto& r : role) r = coin(rng) < cfg.violation_probability ? off : 0;
      if (std::none_of(role.begin(), role.end(), [](int r) { return r != 0; })) {
        role[static_cast<std::size_t>(pick(rng))] = off;
      }
      break;
    }
    case ScenarioKind::Mixed: {
      for (auto& r : role) {
        const double c = coin(rng);
        r = c < cfg.violation_probability / 2 ? 1 : (c < cfg.violation_probability ? 2 : 0);
      }
      const bool has_high = std::find(role.begin(), role.end(), 1) != role.end();
      const bool has_low = std::find(role.begin(), role.end(), 2) != role.end();
      if (n == 1) {
        if (!has_high && !has_low) role[0] = coin(rng) < 0.5 ? 1 : 2;
      } else {
        // Reassign a bus without removing the last bus of the other kind.
        auto force = [&](int want, int other) {
          const auto others = std::count(role.begin(), role.end(), other);
          std::vector<std::size_t> candidates;
          for (std::size_t i = 0; i < n; ++i) {
            if (role[i] != other || others > 1) candidates.push_back(i);
          }
          std::uniform_int_distribution<std::size_t> which(0, candidates.size() - 1);
          role[candidates[which(rng)]] = want;
        };
        if (!has_high) force(1, 2);
        if (!has_low) force(2, 1);
      }
      break;
    }
  }
  for (Eigen::Index i = 0; i < size; ++i) {
    switch (role[static_cast<std::size_t>(i)]) {
      case 1: s.v_env(i) = draw(cfg.high); break;
      case 2: s.v_env(i) = draw(cfg.low); break;
      default: s.v_env(i) = draw(cfg.nominal); break;
    }
  }
  return s;
}

std::vector<Scenario> make_scenario_suite(std::size_t n, std::size_t count, std::uint64_t seed,
                                          const ScenarioConfig& ranges) {
  std::mt19937_64 rng(seed);
  std::vector<Scenario> suite;
  suite.reserve(count);
  constexpr ScenarioKind kKinds[] = {ScenarioKind::HighVoltage, ScenarioKind::LowVoltage, ScenarioKind::Mixed};
  for (std::size_t k = 0; k < count; ++k) {
    ScenarioConfig cfg = ranges;
    cfg.kind = kKinds[k % 3];
    Scenario s = sample_scenario(cfg, n, rng);
    s.label = to_string(cfg.kind) + "-" + std::to_string(k);
    suite.push_back(std::move(s));
  }
  return suite;
}

namespace {

using nlohmann::json;

Eigen::VectorXd to_vector(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(where + " must be an array of numbers");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

std::vector<Scenario> parse_scenarios_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("scenario JSON: top level must be an array");
  std::vector<Scenario> suite;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const std::string where = "scenarios[" + std::to_string(k) + "]";
    const json& item = doc[k];
    if (!item.is_object() || !item.contains("v_env")) throw ParseError(where + ": needs 'v_env'");
    Scenario s;
    s.v_env = to_vector(item["v_env"], where + ".v_env");
    s.q0 = item.contains("q0") ? to_vector(item["q0"], where + ".q0") : Eigen::VectorXd::Zero(s.v_env.size());
    if (s.q0.size() != s.v_env.size()) throw ParseError(where + ": q0 and v_env lengths differ");
    s.label = item.value("label", "scenario-" + std::to_string(k));
    suite.push_back(std::move(s));
  }
  return suite;
}

std::string scenarios_to_json(const std::vector<Scenario>& suite) {
  json doc = json::array();
  for (const Scenario& s : suite) doc.push_back({{"v_env", to_json(s.v_env)}, {"q0", to_json(s.q0)}, {"label", s.label}});
  return doc.dump(2) + "\n";
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  return parse_scenarios_json(read_text_file(path));
}

void save_scenarios(const std::vector<Scenario>& suite, const std::filesystem::path& path) {
  write_text_file(path, scenarios_to_json(suite));
}

EnvTrace parse_env_trace_csv(const std::string& text, std::size_t n) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,bus_id,v_env") throw ParseError("trace CSV: expected header 't,bus_id,v_env'");

  std::map<double, std::map<int, double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string t_s, bus_s, v_s;
    if (!std::getline(fields, t_s, ',') || !std::getline(fields, bus_s, ',') || !std::getline(fields, v_s)) {
      throw ParseError("trace CSV line " + std::to_string(line_no) + ": expected 3 fields");
    }
    try {
      const double t = std::stod(t_s);
      const int bus = std::stoi(bus_s);
      const double v = std::stod(v_s);
      if (bus < 1 || bus > static_cast<int>(n)) {
        throw ParseError("trace CSV line " + std::to_string(line_no) + ": bus_id out of range");
      }
      if (!rows[t].emplace(bus, v).second) {
        throw ParseError("trace CSV line " + std::to_string(line_no) + ": duplicate (t, bus_id)");
      }
    } catch (const std::logic_error&) {
      throw ParseError("trace CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  EnvTrace trace;
  for (const auto& [t, buses] : rows) {
    if (buses.size() != n) {
      throw ParseError("trace CSV: time " + format_real(t) + " lists " + std::to_string(buses.size()) + " of " +
                       std::to_string(n) + " buses");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (const auto& [bus, value] : buses) v(bus - 1) = value;
    trace.t.push_back(t);
    trace.v_env.push_back(std::move(v));
  }
  if (trace.t.empty()) throw ParseError("trace CSV: no samples");
  return trace;
}

EnvTrace load_env_trace(const std::filesystem::path& path, std::size_t n) {
  return parse_env_trace_csv(read_text_file(path), n);
}

Trajectory replay_trace(const Policy& policy, const Eigen::MatrixXd& X, const VoltageBand& band,
                        const EnvTrace& trace, const Eigen::VectorXd& q0, double dt, const CostParams& cp,
                        double blowup) {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  Trajectory traj;
  traj.dt = dt;
  Eigen::VectorXd q = q0;
  double discount = 1.0;
  for (std::size_t k = 0; k < trace.v_env.size(); ++k) {
    GridState state(X, q, trace.v_env[k]);
    traj.v.push_back(state.v());
    traj.q.push_back(state.q());
    if (!state.v().allFinite() || state.v().cwiseAbs().maxCoeff() > blowup) {
      traj.diverged = true;
      break;
    }
    if (k + 1 == trace.v_env.size()) break;
    Eigen::VectorXd u = policy(state.v());
    const double c = stage_cost(state.v(), u, band, cp);
    traj.discounted_cost += discount * c;
    discount *= cp.gamma;
    q = step(state, u, dt, X).q();
    traj.u.push_back(std::move(u));
    traj.cost.push_back(c);
  }
  return traj;
}

}  // namespace voltstab
