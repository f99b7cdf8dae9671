#include <gtest/gtest.h>

#include <random>

#include "driftbound/network.hpp"
#include "fixtures.hpp"

using namespace driftbound;

namespace {

ReactionNetwork gene() { return fixtures::load("gene.model"); }

TEST(Network, GeneDriftMatrices) {
  const auto d = drift_matrices(gene());
  Eigen::MatrixXd A(2, 2);
  A << -1, 0, 1, -0.1;
  EXPECT_TRUE(d.A.isApprox(A));
  EXPECT_DOUBLE_EQ(d.B(0), 100.0);
  EXPECT_DOUBLE_EQ(d.B(1), 0.0);
  // fixed point of the mean dynamics
  const Eigen::VectorXd mean = -d.A.lu().solve(d.B);
  EXPECT_NEAR(mean(0), 100.0, 1e-9);
  EXPECT_NEAR(mean(1), 1000.0, 1e-9);
}

TEST(Network, Lin3MeansFromDrift) {
  const auto d = drift_matrices(fixtures::load("lin3.model"));
  const Eigen::VectorXd mean = -d.A.lu().solve(d.B);
  EXPECT_NEAR(mean(0), 54.70, 5e-3);
  EXPECT_NEAR(mean(1), 27.21, 5e-3);
  EXPECT_NEAR(mean(2), 18.08, 5e-3);
}

TEST(Network, NonlinearDriftPartAndStrictScope) {
  const auto net = fixtures::load("nonlin3.model");
  const auto d = drift_matrices(net);
  EXPECT_DOUBLE_EQ(d.A(2, 2), -1.0);
  EXPECT_DOUBLE_EQ(d.A(2, 0), 0.0);
  try {
    drift_matrices(net, DriftScope::StrictAffine);
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.kind(), NetworkErrc::NonlinearPresent);
  }
}

TEST(Network, PropensityExamples) {
  const auto q = propensity(gene(), std::vector<std::int64_t>{3, 7});
  ASSERT_EQ(q.size(), 4);
  EXPECT_DOUBLE_EQ(q(0), 100.0);
  EXPECT_DOUBLE_EQ(q(1), 3.0);
  EXPECT_DOUBLE_EQ(q(2), 3.0);
  EXPECT_DOUBLE_EQ(q(3), 0.7);

  const auto q3 = propensity(fixtures::load("nonlin3.model"), std::vector<std::int64_t>{2, 3, 1});
  EXPECT_DOUBLE_EQ(q3(4), 6.0);

  const auto q0 = propensity(gene(), std::vector<std::int64_t>{0, 0});
  EXPECT_DOUBLE_EQ(q0(0), 100.0);
  EXPECT_DOUBLE_EQ(q0(1), 0.0);
  EXPECT_DOUBLE_EQ(q0(2), 0.0);
  EXPECT_DOUBLE_EQ(q0(3), 0.0);
}

TEST(Network, HomodimerUsesFallingFactorial) {
  const auto net = build_network({"a", "b"}, std::vector<ReactionInput>{{{{"a", 2}}, {{"b", 1}}, 0.5}});
  EXPECT_DOUBLE_EQ(propensity(net, std::vector<std::int64_t>{4, 0})(0), 0.5 * 4 * 3);
  EXPECT_DOUBLE_EQ(propensity(net, std::vector<std::int64_t>{1, 0})(0), 0.0);
}

TEST(Network, NegativeStateRejected) {
  try {
    propensity(gene(), std::vector<std::int64_t>{-1, 0});
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.kind(), NetworkErrc::NegativeState);
  }
}

TEST(Network, BuildErrors) {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const NetworkError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error";
    return NetworkErrc::NegativeState;
  };
  using In = std::vector<ReactionInput>;
  EXPECT_EQ(kind_of([] { build_network({"a", "a"}, In{}); }), NetworkErrc::DuplicateSpecies);
  EXPECT_EQ(kind_of([] { build_network({"a"}, In{{{{"b", 1}}, {}, 1.0}}); }), NetworkErrc::UnknownSpecies);
  EXPECT_EQ(kind_of([] { build_network({"a"}, In{{{{"a", 1}}, {{"a", 1}}, 1.0}}); }), NetworkErrc::ZeroNetChange);
  EXPECT_EQ(kind_of([] { build_network({"a"}, In{{{{"a", 3}}, {}, 1.0}}); }), NetworkErrc::OrderTooHigh);
  EXPECT_EQ(kind_of([] { build_network({"a"}, In{{{}, {{"a", 1}}, 0.0}}); }), NetworkErrc::NonPositiveRate);
  EXPECT_EQ(kind_of([] { build_network({"a"}, In{{{}, {{"a", 1}}, -2.0}}); }), NetworkErrc::NonPositiveRate);
}

TEST(Network, ClassifyGene) {
  const auto p = classify_rates(gene());
  EXPECT_EQ(p.affine.size(), 4u);
  EXPECT_TRUE(p.nonlinear.empty());
  const auto p3 = classify_rates(fixtures::load("nonlin3.model"));
  ASSERT_EQ(p3.nonlinear.size(), 1u);
  EXPECT_EQ(p3.nonlinear[0], 4u);
}

TEST(Network, EmptyNetwork) {
  const auto net = fixtures::load("empty.model");
  EXPECT_EQ(net.dimension(), 1u);
  EXPECT_TRUE(net.transitions().empty());
  const auto d = drift_matrices(net);
  EXPECT_TRUE(d.A.isZero());
}

// Properties over random networks and states.

TEST(NetworkProperty, AffineDriftMatchesPropensitySum) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    // integer rates keep every product exact in double arithmetic
    const auto net = fixtures::random_network(rng, 5, 10, true, true);
    const auto d = drift_matrices(net);
    const auto part = classify_rates(net);
    std::uniform_int_distribution<std::int64_t> count(0, 1000);
    for (int s = 0; s < 200; ++s) {
      std::vector<std::int64_t> x(net.dimension());
      Eigen::VectorXd xv(static_cast<Eigen::Index>(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = count(rng);
        xv(static_cast<Eigen::Index>(i)) = static_cast<double>(x[i]);
      }
      const auto q = propensity(net, x);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(xv.size());
      for (const auto k : part.affine) sum += q(static_cast<Eigen::Index>(k)) * net.transitions()[k].change.cast<double>();
      ASSERT_EQ(sum, d(xv));
    }
  }
}

TEST(NetworkProperty, PropensitiesNonNegative) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = fixtures::random_network(rng, 6, 12);
    std::uniform_int_distribution<std::int64_t> count(0, 50);
    for (int s = 0; s < 200; ++s) {
      std::vector<std::int64_t> x(net.dimension());
      for (auto& v : x) v = count(rng);
      for (const double q : propensity(net, x)) ASSERT_GE(q, 0.0);
    }
  }
}

TEST(NetworkProperty, ClassificationIsAPartition) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = fixtures::random_network(rng, 6, 12);
    const auto p = classify_rates(net);
    EXPECT_EQ(p.affine.size() + p.nonlinear.size(), net.transitions().size());
    for (const auto k : p.nonlinear) EXPECT_EQ(net.reactions()[k].order(), 2);
    for (const auto k : p.affine) EXPECT_LE(net.reactions()[k].order(), 1);
  }
}

}  // namespace
