#include "cli.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voltstab/checkpoint.hpp"
#include "voltstab/ddpg.hpp"
#include "voltstab/error.hpp"
#include "voltstab/evaluate.hpp"
#include "voltstab/grid.hpp"
#include "voltstab/lyapunov.hpp"
#include "voltstab/network_io.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

namespace {

constexpr int kOk = 0;
constexpr int kCertificateFailed = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct UsageError : Error {
  using Error::Error;
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n') c = ';';
  }
  while (!s.empty() && s.back() == ';') s.pop_back();
  return s;
}

struct Grid {
  RadialNetwork network;
  SensitivityMatrices sens;
};

Grid load_grid(const std::string& path, std::ostream& err) {
  if (path.empty()) {
    RadialNetwork net = five_bus_feeder();
    SensitivityMatrices sens = build_sensitivity(net);
    return {std::move(net), std::move(sens)};
  }
  NetworkLoadResult loaded = load_network(path);
  for (const std::string& w : loaded.warnings) err << "warning: " << w << "\n";
  SensitivityMatrices sens = build_sensitivity(loaded.network);
  return {std::move(loaded.network), std::move(sens)};
}

std::shared_ptr<const Policy> resolve_policy(const std::string& name, const VoltageBand& band, LoadMode mode) {
  if (name == "linear") return std::make_shared<LinearDeadbandPolicy>(band);
  if (name == "zero") return std::make_shared<ZeroPolicy>(band.size());
  LoadedPolicy loaded = load_checkpoint(name, mode);
  if (loaded.band.size() != band.size()) {
    throw UsageError("checkpoint " + name + " covers " + std::to_string(loaded.band.size()) + " buses, network has " +
                     std::to_string(band.size()));
  }
  return loaded.policy;
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability-constrained reinforcement learning for distribution-grid voltage control", "voltstab"};
  app.require_subcommand(1);

  // generate-network
  auto* gen = app.add_subcommand("generate-network", "Random radial feeder (or the bundled five-bus feeder) as JSON");
  std::size_t gen_buses = 0;
  std::uint64_t gen_seed = 0;
  bool gen_five_bus = false;
  ImpedanceRange gen_range;
  std::string gen_out;
  gen->add_option("--buses", gen_buses, "Non-substation bus count");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_flag("--five-bus", gen_five_bus, "Write the bundled five-bus feeder instead");
  gen->add_option("--r-min", gen_range.r_min, "Minimum line resistance, p.u.");
  gen->add_option("--r-max", gen_range.r_max, "Maximum line resistance, p.u.");
  gen->add_option("--x-min", gen_range.x_min, "Minimum line reactance, p.u.");
  gen->add_option("--x-max", gen_range.x_max, "Maximum line reactance, p.u.");
  gen->add_option("--out", gen_out, "Output JSON")->required();

  // generate-scenarios
  auto* scen = app.add_subcommand("generate-scenarios", "Seeded disturbance suite as JSON");
  std::string scen_network;
  std::size_t scen_count = 0;
  std::uint64_t scen_seed = 0;
  std::string scen_out;
  scen->add_option("--network", scen_network, "Network JSON (default: five-bus feeder)");
  scen->add_option("--count", scen_count, "Scenario count")->required();
  scen->add_option("--seed", scen_seed, "RNG seed");
  scen->add_option("--out", scen_out, "Output JSON")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Closed-loop rollout of one policy, written as a trajectory CSV");
  std::string sim_network, sim_policy = "linear", sim_suite, sim_trace, sim_out;
  std::size_t sim_index = 0;
  std::uint64_t sim_seed = 0;
  SimulationConfig sim_cfg;
  sim->add_option("--network", sim_network, "Network JSON (default: five-bus feeder)");
  sim->add_option("--policy", sim_policy, "Checkpoint path, or 'linear' / 'zero'");
  sim->add_option("--scenarios", sim_suite, "Scenario JSON");
  sim->add_option("--index", sim_index, "Scenario index within --scenarios");
  sim->add_option("--seed", sim_seed, "Seed for a sampled mixed scenario when no file is given");
  sim->add_option("--trace", sim_trace, "Disturbance trace CSV (t,bus_id,v_env) to replay instead");
  sim->add_option("--dt", sim_cfg.dt, "Integration step");
  sim->add_option("--horizon", sim_cfg.horizon, "Steps");
  sim->add_option("--out", sim_out, "Trajectory CSV")->required();

  // train
  auto* tr = app.add_subcommand("train", "DDPG training; writes a checkpoint and a per-episode log");
  std::string tr_network, tr_config, tr_preset = "benchmark", tr_out, tr_log;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::size_t> tr_episodes;
  bool tr_time = false;
  tr->add_option("--network", tr_network, "Network JSON (default: five-bus feeder)");
  tr->add_option("--config", tr_config, "key = value config file; unspecified keys take the preset's values");
  tr->add_option("--preset", tr_preset, "Starting values: 'benchmark' or 'default'")
      ->check(CLI::IsMember({"benchmark", "default"}));
  tr->add_option("--seed", tr_seed, "Override the config seed");
  tr->add_option("--episodes", tr_episodes, "Override the episode count");
  tr->add_flag("--time", tr_time, "Record wall-clock milliseconds in the log");
  tr->add_option("--out", tr_out, "Checkpoint JSON")->required();
  tr->add_option("--log", tr_log, "Training log CSV")->required();

  // certify
  auto* cert = app.add_subcommand("certify", "Sampled stability certificate; exit 1 when any clause fails");
  std::string cert_network, cert_policy, cert_json, cert_text;
  CertifyConfig cert_cfg;
  cert->add_option("--network", cert_network, "Network JSON (default: five-bus feeder)");
  cert->add_option("--policy", cert_policy, "Checkpoint path, or 'linear' / 'zero'")->required();
  cert->add_option("--json", cert_json, "Certificate JSON output");
  cert->add_option("--text", cert_text, "Text summary output (also printed to stdout)");
  cert->add_option("--seed", cert_cfg.seed, "Sampling seed");
  cert->add_option("--rollouts", cert_cfg.rollouts, "Rollout count");
  cert->add_option("--joint-samples", cert_cfg.joint_samples, "Joint voltage samples");
  cert->add_option("--dt", cert_cfg.sim.dt, "Integration step");
  cert->add_option("--horizon", cert_cfg.sim.horizon, "Rollout steps");
  cert->add_option("--tolerance", cert_cfg.tolerance, "Final distance to the band");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare policies on one scenario suite");
  std::string ev_network, ev_suite, ev_out, ev_plot_dir;
  std::vector<std::string> ev_policies;
  std::optional<std::size_t> ev_count;
  std::uint64_t ev_seed = 0;
  EvalConfig ev_cfg;
  ev_cfg.sim.dt = TrainConfig::benchmark_preset().dt;
  ev->add_option("--network", ev_network, "Network JSON (default: five-bus feeder)");
  ev->add_option("--policy", ev_policies, "NAME=PATH, PATH may be 'linear' or 'zero'; repeatable")->required();
  ev->add_option("--scenarios", ev_count, "Size of a seeded suite");
  ev->add_option("--suite", ev_suite, "Scenario JSON instead of a seeded suite");
  ev->add_option("--seed", ev_seed, "Suite seed");
  ev->add_option("--dt", ev_cfg.sim.dt, "Integration step");
  ev->add_option("--horizon", ev_cfg.sim.horizon, "Steps per rollout");
  ev->add_option("--tolerance", ev_cfg.tolerance, "Recovery tolerance on dist_to_band");
  ev->add_option("--out", ev_out, "Report CSV")->required();
  ev->add_option("--plot-dir", ev_plot_dir, "Directory for histogram, trace and metadata files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  }

  try {
    if (*gen) {
      if (!gen_five_bus && gen_buses == 0) throw UsageError("--buses must be at least 1 (or pass --five-bus)");
      RadialNetwork net = gen_five_bus ? five_bus_feeder() : generate_random_feeder(gen_buses, gen_seed, gen_range);
      ensure_parent(gen_out);
      save_network(net, gen_out);
      out << "wrote " << net.size() << "-bus feeder to " << gen_out << " (min eigenvalue of X "
          << format_real(check_positive_definite(build_sensitivity(net).X)) << ")\n";
      return kOk;
    }
    if (*scen) {
      if (scen_count == 0) throw UsageError("--count must be at least 1");
      const Grid grid = load_grid(scen_network, err);
      ensure_parent(scen_out);
      save_scenarios(make_scenario_suite(grid.network.size(), scen_count, scen_seed), scen_out);
      out << "wrote " << scen_count << " scenarios to " << scen_out << "\n";
      return kOk;
    }
    if (*sim) {
      const Grid grid = load_grid(sim_network, err);
      const VoltageBand band = grid.network.band();
      const auto policy = resolve_policy(sim_policy, band, LoadMode::Strict);
      const CostParams cp;
      Trajectory traj;
      if (!sim_trace.empty()) {
        const EnvTrace trace = load_env_trace(sim_trace, grid.network.size());
        traj = replay_trace(*policy, grid.sens.X, band, trace, Eigen::VectorXd::Zero(trace.v_env[0].size()),
                            sim_cfg.dt, cp, sim_cfg.blowup);
      } else {
        Scenario s;
        if (!sim_suite.empty()) {
          const std::vector<Scenario> suite = load_scenarios(sim_suite);
          if (sim_index >= suite.size()) throw UsageError("--index is past the end of the scenario file");
          s = suite[sim_index];
        } else {
          std::mt19937_64 rng(sim_seed);
          s = sample_scenario(ScenarioConfig{}, grid.network.size(), rng);
        }
        if (static_cast<std::size_t>(s.v_env.size()) != grid.network.size()) {
          throw UsageError("scenario size does not match the network");
        }
        traj = rollout(*policy, grid.sens.X, band, s.v_env, s.q0, sim_cfg, cp);
      }
      ensure_parent(sim_out);
      write_text_file(sim_out, trajectory_csv(traj, band, cp));
      const auto rec = recovery_time(traj, band, 1e-3);
      out << "steps " << traj.steps() << ", diverged " << (traj.diverged ? "yes" : "no") << ", recovery "
          << (rec ? std::to_string(*rec) : std::string("none")) << ", discounted cost "
          << format_real(traj.discounted_cost) << "\n";
      return kOk;
    }
    if (*tr) {
      const Grid grid = load_grid(tr_network, err);
      TrainConfig cfg = tr_preset == "benchmark" ? TrainConfig::benchmark_preset() : TrainConfig{};
      if (!tr_config.empty()) {
        // Keys in the file override the preset.
        cfg = TrainConfig::from_kv(cfg.to_kv() + read_text_file(tr_config));
      }
      if (tr_seed) cfg.seed = *tr_seed;
      if (tr_episodes) cfg.episodes = *tr_episodes;
      if (tr_time) cfg.record_wall_time = true;
      cfg.validate();
      const VoltageBand band = grid.network.band();
      const TrainResult result = train(grid.sens.X, band, cfg);
      ensure_parent(tr_out);
      ensure_parent(tr_log);
      if (cfg.actor == ActorKind::StackedRelu) {
        write_text_file(tr_out, stacked_relu_checkpoint(result.raw, band, cfg.constraint));
      } else {
        write_text_file(tr_out, mlp_checkpoint(result.actor_nets, cfg.v_scaling, band));
      }
      write_text_file(tr_log, training_log_csv(result.log));
      out << "trained " << cfg.episodes << " episodes (" << to_string(cfg.actor) << ", " << to_string(cfg.scope)
          << " critic); checkpoint " << tr_out << ", log " << tr_log << "\n";
      return kOk;
    }
    if (*cert) {
      const Grid grid = load_grid(cert_network, err);
      const VoltageBand band = grid.network.band();
      const auto policy = resolve_policy(cert_policy, band, LoadMode::Audit);
      const StabilityCertificate c = certify_policy(grid.sens.X, *policy, band, cert_cfg, cert_policy);
      if (!cert_json.empty()) {
        ensure_parent(cert_json);
        write_text_file(cert_json, c.to_json());
      }
      if (!cert_text.empty()) {
        ensure_parent(cert_text);
        write_text_file(cert_text, c.to_text());
      }
      out << c.to_text();
      return c.passed() ? kOk : kCertificateFailed;
    }
    if (*ev) {
      if (ev_count && *ev_count == 0) throw UsageError("--scenarios must be at least 1");
      if (!ev_count && ev_suite.empty()) throw UsageError("pass --scenarios N or --suite FILE");
      if (ev_count && !ev_suite.empty()) throw UsageError("--scenarios and --suite are mutually exclusive");
      const Grid grid = load_grid(ev_network, err);
      const VoltageBand band = grid.network.band();
      std::vector<NamedPolicy> policies;
      for (const std::string& item : ev_policies) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
          throw UsageError("--policy expects NAME=PATH, got '" + item + "'");
        }
        policies.push_back({item.substr(0, eq), resolve_policy(item.substr(eq + 1), band, LoadMode::Strict)});
      }
      const std::vector<Scenario> suite =
          ev_suite.empty() ? make_scenario_suite(grid.network.size(), *ev_count, ev_seed) : load_scenarios(ev_suite);
      if (suite.empty()) throw UsageError("scenario suite is empty");
      const EvalReport report = evaluate(policies, grid.sens.X, band, grid.network.v0(), suite, ev_cfg);
      ensure_parent(ev_out);
      write_text_file(ev_out, report.to_csv());
      if (!ev_plot_dir.empty()) {
        const std::filesystem::path dir(ev_plot_dir);
        std::filesystem::create_directories(dir);
        write_text_file(dir / "histogram.csv", report.histogram_csv());
        write_text_file(dir / "metadata.json", report.metadata_json());
        for (const PolicyMetrics& m : report.policies) {
          write_text_file(dir / ("trace_" + m.name + ".csv"), trajectory_csv(m.trajectories.front(), band, ev_cfg.cost));
        }
      }
      out << report.to_csv();
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: runtime: " << one_line(e.what()) << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace voltstab
