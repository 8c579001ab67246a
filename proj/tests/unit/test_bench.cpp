#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "voltstab/checkpoint.hpp"
#include "voltstab/error.hpp"
#include "voltstab/evaluate.hpp"
#include "voltstab/grid.hpp"
#include "voltstab/stacked_relu.hpp"
#include "voltstab/text_format.hpp"

using namespace voltstab;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Trajectory two_bus(const std::vector<double>& v1, const std::vector<std::pair<double, double>>& q) {
  Trajectory t;
  for (std::size_t k = 0; k < v1.size(); ++k) {
    t.v.push_back(vec({v1[k], 1.0}));
    t.q.push_back(vec({q[k].first, q[k].second}));
  }
  for (std::size_t k = 0; k + 1 < v1.size(); ++k) {
    t.u.push_back(vec({0.5, -0.5}));
    t.cost.push_back(0.0);
  }
  return t;
}

struct Cli {
  int code = -1;
  std::string out, err;
};

Cli run(std::vector<std::string> args) {
  args.insert(args.begin(), "voltstab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Cli r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("voltstab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST(TransientCost, InBandFromTheStartIsZero) {
  const Trajectory t = two_bus({1.0, 1.0, 1.0}, {{0.1, 0.2}, {0.1, 0.2}, {0.1, 0.2}});
  EXPECT_EQ(transient_cost(t, VoltageBand::uniform(2)), 0.0);
  EXPECT_EQ(transient_effort(t, VoltageBand::uniform(2)), 0.0);
}

TEST(TransientCost, HandSum) {
  // recovers at step 2: sum |q| over t = 0, 1
  const Trajectory t = two_bus({1.08, 1.06, 1.04, 1.03}, {{0.0, 0.0}, {-0.1, 0.05}, {-0.2, 0.1}, {-0.3, 0.1}});
  EXPECT_NEAR(transient_cost(t, VoltageBand::uniform(2)), 0.15, 1e-15);
  EXPECT_NEAR(transient_effort(t, VoltageBand::uniform(2)), 2 * 0.5, 1e-15);
  // never recovers: whole horizon
  const Trajectory never = two_bus({1.08, 1.07, 1.06}, {{0.0, 0.0}, {-0.1, 0.0}, {-0.2, 0.0}});
  EXPECT_NEAR(transient_cost(never, VoltageBand::uniform(2)), 0.3, 1e-15);
}

TEST(TransientCost, EarlierRecoveryNeverCostsMore) {
  const Trajectory t = two_bus({1.08, 1.06, 1.051, 1.0505, 1.04}, {{0, 0}, {-0.1, 0}, {-0.2, 0}, {-0.25, 0}, {-0.3, 0}});
  const VoltageBand band = VoltageBand::uniform(2);
  double prev = INFINITY;
  for (double tol : {0.0, 6e-4, 2e-3, 0.02, 0.05}) {
    const double c = transient_cost(t, band, tol);
    EXPECT_LE(c, prev);
    prev = c;
  }
}

TEST(Evaluate, ZeroPolicyNeverRecovers) {
  const RadialNetwork net = five_bus_feeder();
  const auto suite = make_scenario_suite(4, 30, 1);
  const EvalReport rep = evaluate({{"zero", std::make_shared<ZeroPolicy>(4)}}, build_sensitivity(net).X, net.band(),
                                  net.v0(), suite);
  const PolicyMetrics& m = rep.find("zero");
  EXPECT_EQ(m.stability_rate, 0.0);
  EXPECT_EQ(m.transient_effort.mean, 0.0);
  EXPECT_EQ(m.recovery_time.n, 0u);
  EXPECT_THROW(rep.find("missing"), ValidationError);
}

TEST(Evaluate, OneBusRecoveryMatchesClosedForm) {
  const RadialNetwork net = single_line_feeder(0.02, 0.05);
  const Eigen::MatrixXd X = build_sensitivity(net).X;
  const double gap = 0.03, tol = 1e-3, dt = 0.1;
  const std::vector<Scenario> suite{{vec({1.05 + gap}), vec({0.0}), "over"}};
  EvalConfig cfg;
  cfg.sim.dt = dt;
  cfg.sim.horizon = 1000;
  cfg.tolerance = tol;
  const EvalReport rep =
      evaluate({{"linear", std::make_shared<LinearDeadbandPolicy>(net.band())}}, X, net.band(), net.v0(), suite, cfg);
  // gap (1 - dt X)^t <= tol
  const double steps = std::ceil(std::log(tol / gap) / std::log(1.0 - dt * X(0, 0)));
  EXPECT_EQ(rep.find("linear").recovery_time.mean, steps);
  EXPECT_EQ(rep.find("linear").stability_rate, 1.0);
}

TEST(Evaluate, ReproducibleCsvAndHistogramTotals) {
  const RadialNetwork net = five_bus_feeder();
  const Eigen::MatrixXd X = build_sensitivity(net).X;
  std::mt19937_64 rng(2);
  const std::vector<NamedPolicy> policies{
      {"linear", std::make_shared<LinearDeadbandPolicy>(net.band())},
      {"stable", std::make_shared<StackedReluPolicy>(constrain(random_raw(4, 16, rng), net.band()))},
      {"zero", std::make_shared<ZeroPolicy>(4)}};
  const auto suite = make_scenario_suite(4, 40, 5);
  const EvalReport a = evaluate(policies, X, net.band(), net.v0(), suite);
  const EvalReport b = evaluate(policies, X, net.band(), net.v0(), make_scenario_suite(4, 40, 5));
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_EQ(a.histogram_csv(), b.histogram_csv());
  EXPECT_EQ(a.suite_hash, b.suite_hash);
  EXPECT_NE(a.suite_hash, evaluate(policies, X, net.band(), net.v0(), make_scenario_suite(4, 40, 6)).suite_hash);
  for (const PolicyMetrics& m : a.policies) {
    std::size_t over = 0, under = 0;
    for (auto c : m.over_histogram) over += c;
    for (auto c : m.under_histogram) under += c;
    EXPECT_EQ(over, 40u * 4u);
    EXPECT_EQ(under, 40u * 4u);
    EXPECT_GE(m.stability_rate, 0.0);
    EXPECT_LE(m.stability_rate, 1.0);
    EXPECT_GE(m.transient_cost.std, 0.0);
    EXPECT_EQ(m.trajectories.size(), 40u);
  }
  EXPECT_EQ(a.to_csv().substr(0, a.to_csv().find('\n')), "policy,metric,mean,std,n");
  const auto meta = nlohmann::json::parse(a.metadata_json());
  EXPECT_EQ(meta["scenario_count"].get<std::size_t>(), 40u);
}

TEST(Evaluate, TrajectoryCsvFormat) {
  const Trajectory t = two_bus({1.08, 1.06}, {{0.0, 0.0}, {-0.1, 0.05}});
  const std::string csv = trajectory_csv(t, VoltageBand::uniform(2), {});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,bus,v,q,u,cost");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(format_real(0.1 + 0.2), "0.3");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  Cli r = run({"evaluate", "--policy", "lin=linear", "--scenarios", "0", "--out", path("x.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"certify", "--policy", path("missing.json")}).code, 2);
  EXPECT_EQ(run({"simulate", "--network", path("missing.json"), "--out", path("t.csv")}).code, 2);
  write_text_file(path("bad.kv"), "colour = blue\n");
  EXPECT_EQ(run({"train", "--config", path("bad.kv"), "--out", path("c.json"), "--log", path("l.csv")}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, CertifyConstrainedPassesInvertedFails) {
  std::mt19937_64 rng(1);
  const VoltageBand band = five_bus_feeder().band();
  write_text_file(path("good.json"), stacked_relu_checkpoint(random_raw(4, 16, rng, 16.0, 24.0), band, {}));
  Cli good = run({"certify", "--policy", path("good.json"), "--rollouts", "20", "--joint-samples", "1000", "--json",
                  path("good_cert.json")});
  EXPECT_EQ(good.code, 0) << good.out << good.err;
  EXPECT_TRUE(nlohmann::json::parse(read_text_file(path("good_cert.json")))["passed"].get<bool>());

  std::vector<StackedReluParams> params = constrain(zero_raw(4, 16), band);
  for (auto& p : params) {
    p.w_plus = -p.w_plus;
    p.w_minus = -p.w_minus;
  }
  write_text_file(path("bad.json"), explicit_stacked_relu_checkpoint(params));
  Cli bad = run({"certify", "--policy", path("bad.json"), "--rollouts", "20", "--joint-samples", "1000"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL jacobian_nonpositive"), std::string::npos) << bad.out;
  EXPECT_NE(bad.out.find("witness"), std::string::npos);
}

TEST_F(CliTest, GenerateSimulateEvaluatePipeline) {
  ASSERT_EQ(run({"generate-network", "--buses", "6", "--seed", "3", "--out", path("net.json")}).code, 0);
  ASSERT_EQ(run({"generate-scenarios", "--network", path("net.json"), "--count", "5", "--out", path("s.json")}).code,
            0);
  Cli sim = run({"simulate", "--network", path("net.json"), "--scenarios", path("s.json"), "--index", "1", "--out",
                 path("traj.csv")});
  ASSERT_EQ(sim.code, 0) << sim.err;
  EXPECT_EQ(read_text_file(path("traj.csv")).rfind("t,bus,v,q,u,cost\n", 0), 0u);
  EXPECT_EQ(run({"simulate", "--network", path("net.json"), "--scenarios", path("s.json"), "--index", "9", "--out",
                 path("traj.csv")})
                .code,
            2);

  write_text_file(path("trace.csv"), "t,bus_id,v_env\n0,1,1.08\n0,2,1.0\n6,1,1.07\n6,2,0.99\n");
  EXPECT_EQ(run({"simulate", "--trace", path("trace.csv"), "--out", path("tr.csv")}).code, 2);  // 4-bus default
  write_text_file(path("trace4.csv"),
                  "t,bus_id,v_env\n0,1,1.08\n0,2,1.0\n0,3,1.0\n0,4,0.93\n6,1,1.07\n6,2,0.99\n6,3,1.0\n6,4,0.94\n");
  EXPECT_EQ(run({"simulate", "--trace", path("trace4.csv"), "--out", path("tr.csv")}).code, 0);

  Cli ev = run({"evaluate", "--network", path("net.json"), "--suite", path("s.json"), "--policy", "lin=linear",
                "--policy", "idle=zero", "--out", path("r.csv"), "--plot-dir", path("plots")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_TRUE(fs::exists(path("plots/histogram.csv")));
  EXPECT_TRUE(fs::exists(path("plots/metadata.json")));
  EXPECT_TRUE(fs::exists(path("plots/trace_lin.csv")));
  EXPECT_EQ(read_text_file(path("r.csv")), ev.out);
}

TEST_F(CliTest, TrainWritesLoadableCheckpoint) {
  Cli tr = run({"train", "--episodes", "12", "--seed", "2", "--out", path("ck.json"), "--log", path("log.csv")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  const LoadedPolicy p = load_checkpoint(path("ck.json"));
  EXPECT_EQ(p.kind, "stacked_relu");
  std::string log = read_text_file(path("log.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 13);

  write_text_file(path("mlp.kv"), "actor = mlp\nhidden = 8\nepisodes = 3\n");
  ASSERT_EQ(run({"train", "--config", path("mlp.kv"), "--out", path("mlp.json"), "--log", path("mlp.csv")}).code, 0);
  EXPECT_EQ(load_checkpoint(path("mlp.json")).kind, "mlp");
}
