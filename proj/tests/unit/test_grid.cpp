#include <gtest/gtest.h>

#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "voltstab/error.hpp"
#include "voltstab/grid.hpp"
#include "voltstab/linalg.hpp"
#include "voltstab/network_io.hpp"

using namespace voltstab;

namespace {

// Lines on the path from the substation to `bus`, found by walking parents.
std::set<std::size_t> path_lines(const RadialNetwork& net, int bus) {
  std::set<std::size_t> out;
  while (bus != 0) {
    out.insert(net.line_into(bus));
    bus = net.parent(bus);
  }
  return out;
}

Eigen::MatrixXd brute_force_X(const RadialNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::MatrixXd X(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const auto a = path_lines(net, i), b = path_lines(net, j);
      double sum = 0.0;
      for (std::size_t l : a) {
        if (b.count(l)) sum += net.lines()[l].x;
      }
      X(i - 1, j - 1) = 2.0 * sum;
    }
  }
  return X;
}

RadialNetwork fig1_feeder(double x) {
  std::vector<Bus> buses{{1}, {2}, {3}, {4}};
  std::vector<Line> lines{{0, 1, 0.02, x}, {1, 2, 0.02, x}, {2, 3, 0.02, x}, {2, 4, 0.02, x}};
  return RadialNetwork(buses, lines);
}

}  // namespace

TEST(Linalg, JacobiMatchesEigenSolver) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int n : {1, 2, 5, 12, 30}) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
    const Eigen::MatrixXd s = 0.5 * (a + a.transpose());
    const Eigen::VectorXd ours = linalg::symmetric_eigenvalues(s);
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues();
    EXPECT_LT((ours - ref).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + ref.cwiseAbs().maxCoeff())) << "n=" << n;
  }
}

TEST(Linalg, ClosedFormEigenvalues) {
  EXPECT_DOUBLE_EQ(check_positive_definite(Eigen::MatrixXd::Identity(3, 3)), 1.0);
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 2, 1;
  EXPECT_NEAR(check_positive_definite(m), -1.0, 1e-14);
  EXPECT_FALSE(linalg::is_positive_definite(m));
}

TEST(Linalg, AsymmetricInputRejected) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(check_positive_definite(m), ValidationError);
  EXPECT_THROW(linalg::symmetric_eigenvalues(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
}

TEST(Linalg, CholeskySolve) {
  Eigen::MatrixXd m(3, 3);
  m << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const linalg::Cholesky c(m);
  ASSERT_TRUE(c.ok());
  const Eigen::VectorXd b = Eigen::Vector3d(1, -2, 0.5);
  EXPECT_LT((m * c.solve(b) - b).norm(), 1e-13);
  EXPECT_LT((c.factor() * c.factor().transpose() - m).norm(), 1e-13);
}

TEST(Sensitivity, SingleLine) {
  const SensitivityMatrices s = build_sensitivity(single_line_feeder(0.02, 0.05));
  ASSERT_EQ(s.X.rows(), 1);
  EXPECT_DOUBLE_EQ(s.X(0, 0), 0.10);
  EXPECT_DOUBLE_EQ(s.R(0, 0), 0.04);
}

TEST(Sensitivity, Fig1TopologyAgainstPathEnumeration) {
  const RadialNetwork net = fig1_feeder(0.05);
  const Eigen::MatrixXd X = build_sensitivity(net).X;
  EXPECT_LT((X - brute_force_X(net)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(X(2, 3), 0.20, 1e-15);
  EXPECT_NEAR(X(3, 3), 0.30, 1e-15);
}

TEST(Sensitivity, RandomFeedersSymmetricAndMatchOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RadialNetwork net = generate_random_feeder(3 + seed, seed);
    const Eigen::MatrixXd X = build_sensitivity(net).X;
    EXPECT_EQ(linalg::asymmetry(X), 0.0);
    EXPECT_LT((X - brute_force_X(net)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Sensitivity, HundredRandomFeedersPositiveDefinite) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(1, 56);
  for (int k = 0; k < 100; ++k) {
    const RadialNetwork net = generate_random_feeder(size(rng), rng());
    const SensitivityMatrices s = build_sensitivity(net);
    EXPECT_GT(check_positive_definite(s.X), 0.0);
    EXPECT_GT(check_positive_definite(s.R), 0.0);
  }
}

TEST(Distflow, ZeroInjection) {
  const RadialNetwork net = five_bus_feeder();
  const DistflowSolution sol = solve_distflow(net, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4));
  EXPECT_EQ(sol.flows.P.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.flows.Q.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE((sol.v.array() == net.v0()).all());
}

TEST(Distflow, SingleLineByHand) {
  const RadialNetwork net = single_line_feeder(0.02, 0.05);
  const DistflowSolution sol = solve_distflow(net, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.1));
  EXPECT_NEAR(sol.v(0), net.v0() + 0.01, 1e-15);
}

TEST(Distflow, RecursionMatchesMatrixForm) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 0.2);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const RadialNetwork net = generate_random_feeder(8, seed);
    const SensitivityMatrices s = build_sensitivity(net);
    Eigen::VectorXd p(8), q(8);
    for (int i = 0; i < 8; ++i) {
      p(i) = nd(rng);
      q(i) = nd(rng);
    }
    const DistflowSolution sol = solve_distflow(net, p, q);
    const Eigen::VectorXd lin = s.R * p + s.X * q + Eigen::VectorXd::Constant(8, net.v0());
    EXPECT_LT((sol.v - lin).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(conservation_residual(net, p, q, sol.flows), 1e-12);
  }
}

TEST(Distflow, WrongLengthThrows) {
  EXPECT_THROW(solve_distflow(five_bus_feeder(), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4)),
               DimensionError);
}

TEST(RandomFeeder, DeterministicAndValid) {
  const RadialNetwork a = generate_random_feeder(55, 17), b = generate_random_feeder(55, 17);
  ASSERT_EQ(a.lines().size(), b.lines().size());
  for (std::size_t k = 0; k < a.lines().size(); ++k) {
    EXPECT_EQ(a.lines()[k].from, b.lines()[k].from);
    EXPECT_EQ(a.lines()[k].x, b.lines()[k].x);
    EXPECT_EQ(a.lines()[k].r, b.lines()[k].r);
  }
  EXPECT_GT(check_positive_definite(build_sensitivity(a).X), 0.0);
  EXPECT_EQ(generate_random_feeder(1, 4).size(), 1u);
  EXPECT_EQ(generate_random_feeder(1, 4).lines()[0].from, 0);
}

TEST(RandomFeeder, BadArguments) {
  EXPECT_THROW(generate_random_feeder(0, 1), ValidationError);
  EXPECT_THROW(generate_random_feeder(3, 1, ImpedanceRange{-0.1, 0.1, 0.1, 0.2}), ValidationError);
}

TEST(NetworkValidation, NamesTheOffendingElement) {
  auto expect_subject = [](const std::function<void()>& f, const std::string& subject) {
    try {
      f();
      ADD_FAILURE() << "no exception, expected " << subject;
    } catch (const ValidationError& e) {
      EXPECT_EQ(e.subject(), subject) << e.what();
    }
  };
  expect_subject([] { RadialNetwork({{1}, {2}}, {{0, 1, 0.1, 0.1}, {1, 2, 0.1, 0.0}}); }, "line 1->2");
  expect_subject([] { RadialNetwork({{1}, {1}}, {{0, 1, 0.1, 0.1}, {0, 1, 0.1, 0.1}}); }, "bus 1");
  expect_subject([] { RadialNetwork({{1}, {2}}, {{0, 1, 0.1, 0.1}}); }, "lines");
  // 1 and 2 feed each other; nothing reaches them from the substation.
  expect_subject([] { RadialNetwork({{1}, {2}, {3}}, {{0, 3, 0.1, 0.1}, {2, 1, 0.1, 0.1}, {1, 2, 0.1, 0.1}}); },
                 "bus 1");
  expect_subject([] { RadialNetwork({Bus{1, 1.02, 1.05}}, {{0, 1, 0.1, 0.1}}); }, "bus 1");
}

TEST(NetworkJson, RoundTripAndWarnings) {
  const RadialNetwork net = generate_random_feeder(6, 2);
  const NetworkLoadResult back = parse_network_json(network_to_json(net));
  EXPECT_TRUE(back.warnings.empty());
  EXPECT_EQ(build_sensitivity(back.network).X, build_sensitivity(net).X);

  const std::string text = R"({"v0": 1.0, "colour": "red",
    "buses": [{"id": 1, "v_lower": 0.94}],
    "lines": [{"from": 0, "to": 1, "r": 0.01, "x": 0.03, "length_km": 2}]})";
  const NetworkLoadResult loaded = parse_network_json(text);
  EXPECT_EQ(loaded.warnings.size(), 2u);
  EXPECT_DOUBLE_EQ(loaded.network.band().lower(0), 0.94);
  EXPECT_DOUBLE_EQ(loaded.network.band().upper(0), kDefaultVUpper);
}

TEST(NetworkJson, MalformedInputs) {
  EXPECT_THROW(parse_network_json("{not json"), ParseError);
  EXPECT_THROW(parse_network_json("[]"), ParseError);
  EXPECT_THROW(parse_network_json(R"({"buses": [{"id": 1}]})"), ParseError);
  EXPECT_THROW(parse_network_json(R"({"buses": [{"id": 1}], "lines": [{"from": 0, "to": 1, "r": "x", "x": 1}]})"),
               ParseError);
  EXPECT_THROW(parse_network_json(R"({"buses": [{"id": 1}], "lines": [{"from": 0, "to": 1, "r": 0.1, "x": -1}]})"),
               ValidationError);
  EXPECT_THROW(load_network("/nonexistent/net.json"), ParseError);
}
