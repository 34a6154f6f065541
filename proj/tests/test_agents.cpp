#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "msglab/agents.hpp"
#include "msglab/env.hpp"

using namespace msglab;

namespace {

NetworkSpec mlp(int in, int out) {
  NetworkSpec s;
  s.input_dim = in;
  s.output_dim = out;
  s.arch = Architecture::Mlp;
  s.hidden = 16;
  s.init_scale = 1.0;
  return s;
}

Eigen::MatrixXd random_states(int n, int dim, std::mt19937_64& rng) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, dim);
  for (int r = 0; r < n; ++r) m(r, static_cast<int>(rng() % static_cast<unsigned>(dim))) = 1.0;
  return m;
}

}  // namespace

TEST(Network, EvaluateMatchesForward) {
  std::mt19937_64 rng(1);
  Network net(mlp(6, 4), rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 6);
  const auto graph = net.forward(ad::Tensor::constant(x)).value();
  EXPECT_TRUE(graph.isApprox(net.evaluate(x), 1e-14));
}

TEST(Network, FlatParametersRoundTrip) {
  std::mt19937_64 rng(2);
  Network net(mlp(3, 2), rng);
  EXPECT_EQ(net.parameter_count(), 3 * 16 + 16 + 16 * 2 + 2);
  Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(net.parameter_count(), -1.0, 1.0);
  net.set_flat_parameters(theta);
  EXPECT_EQ(net.flat_parameters(), theta);
  EXPECT_THROW(net.set_flat_parameters(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Network, CloneIsIndependent) {
  std::mt19937_64 rng(3);
  Network a(mlp(3, 2), rng);
  Network b = a.clone();
  b.set_flat_parameters(Eigen::VectorXd::Zero(b.parameter_count()));
  EXPECT_NE(a.flat_parameters(), b.flat_parameters());
  b.copy_from(a);
  EXPECT_EQ(a.flat_parameters(), b.flat_parameters());
}

TEST(Network, InputWidthChecked) {
  std::mt19937_64 rng(4);
  Network net(mlp(3, 2), rng);
  EXPECT_THROW(net.evaluate(Eigen::MatrixXd::Zero(2, 4)), std::invalid_argument);
}

TEST(Scheme, DistributionNormalized) {
  std::mt19937_64 rng(5);
  for (auto arch : {Architecture::Tabular, Architecture::Mlp}) {
    NetworkSpec spec = mlp(27, 9);
    spec.arch = arch;
    SignalingScheme scheme(spec, rng);
    const Eigen::MatrixXd phi = scheme.distribution(random_states(64, 27, rng));
    EXPECT_LE((phi.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
    EXPECT_GE(phi.minCoeff(), 0.0);
  }
}

TEST(Scheme, GumbelMaxSamplesFollowDistribution) {
  std::mt19937_64 rng(6);
  NetworkSpec spec = mlp(2, 3);
  spec.arch = Architecture::Tabular;
  SignalingScheme scheme(spec, rng);
  Eigen::VectorXd flat(6);
  flat << 0.5, -1.0, 0.0, 1.0, 1.5, -0.5;
  scheme.network().set_flat_parameters(flat);
  const Eigen::MatrixXd states = Eigen::MatrixXd::Identity(2, 2).row(0).replicate(60000, 1);
  const SampledSignals s = scheme.sample(states, rng);
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(3);
  for (int k : s.index) freq[k] += 1.0 / 60000.0;
  const Eigen::VectorXd phi = scheme.distribution(states.topRows(1)).row(0).transpose();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(freq[k], phi[k], 0.01);
  EXPECT_EQ(s.noise.rows(), 60000);
}

TEST(Scheme, SignalGraphIsExactOneHot) {
  std::mt19937_64 rng(7);
  SignalingScheme scheme(mlp(4, 5), rng);
  const Eigen::MatrixXd states = random_states(10, 4, rng);
  const SampledSignals s = scheme.sample(states, rng);
  const auto logits = scheme.logits_graph(ad::Tensor::constant(states));
  const Eigen::MatrixXd y = scheme.signal_graph(logits, s.index, s.noise).value();
  for (int r = 0; r < 10; ++r) {
    EXPECT_EQ(y.row(r).sum(), 1.0);
    EXPECT_EQ(y(r, s.index[static_cast<std::size_t>(r)]), 1.0);
  }
  EXPECT_THROW(scheme.signal_graph(logits, s.index, Eigen::MatrixXd()), std::invalid_argument);
}

TEST(Receiver, DistributionNormalizedWithAndWithoutObservation) {
  std::mt19937_64 rng(8);
  ReceiverPolicy with_obs(9, mlp(18, 4), rng);
  const Eigen::MatrixXd pi = with_obs.distribution(random_states(32, 9, rng), random_states(32, 9, rng));
  EXPECT_LE((pi.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
  ReceiverPolicy blind(0, mlp(2, 2), rng);
  const Eigen::MatrixXd pj = blind.distribution(Eigen::MatrixXd(5, 0), random_states(5, 2, rng));
  EXPECT_LE((pj.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(Receiver, PosteriorFeaturesAreBayesRule) {
  std::mt19937_64 rng(9);
  NetworkSpec spec = mlp(2, 2);
  spec.arch = Architecture::Tabular;
  SignalingScheme scheme(spec, rng);
  Eigen::VectorXd eta(4);
  eta << 0.3, -0.2, 1.1, 0.4;
  scheme.network().set_flat_parameters(eta);
  ReceiverPolicy policy(0, spec, rng);
  Eigen::VectorXd prior(2);
  prior << 1.0 / 3.0, 2.0 / 3.0;
  policy.use_posterior_decoding(prior);
  const Eigen::MatrixXd mu = policy.signal_features(scheme);
  const Eigen::MatrixXd phi = scheme.distribution(Eigen::MatrixXd::Identity(2, 2));
  for (int k = 0; k < 2; ++k) {
    const double z = prior[0] * phi(0, k) + prior[1] * phi(1, k);
    EXPECT_NEAR(mu(k, 0), prior[0] * phi(0, k) / z, 1e-12);
    EXPECT_NEAR(mu(k, 1), prior[1] * phi(1, k) / z, 1e-12);
  }
}

TEST(Critic, TargetSyncsOnInterval) {
  std::mt19937_64 rng(10);
  Critic c(CriticKind::SenderV_i, mlp(3, 1), rng, 3);
  const Eigen::VectorXd before = c.target().flat_parameters();
  c.network().set_flat_parameters(Eigen::VectorXd::Zero(c.network().parameter_count()));
  c.after_update();
  c.after_update();
  EXPECT_EQ(c.target().flat_parameters(), before);
  c.after_update();
  EXPECT_EQ(c.target().flat_parameters(), c.network().flat_parameters());
}

TEST(Agents, HeadCountsPerCritic) {
  std::mt19937_64 rng(11);
  const Spaces sp = make_reaching_goals(3)->spaces();
  AgentOptions opts;
  opts.arch = Architecture::Mlp;
  AgentSet a = make_agents(sp, opts, rng);
  EXPECT_EQ(a.sender_w_i.network().spec().output_dim, 4);
  EXPECT_EQ(a.sender_w_j.network().spec().output_dim, 4);
  EXPECT_EQ(a.sender_q_i.network().spec().output_dim, 9);
  EXPECT_EQ(a.sender_v_i.network().spec().output_dim, 1);
  EXPECT_EQ(a.receiver_v.network().spec().output_dim, 1);
  EXPECT_EQ(a.networks().size(), 7u);
}

TEST(Agents, SaveLoadRoundTrip) {
  std::mt19937_64 rng(12);
  const Spaces sp = make_reaching_goals(3)->spaces();
  AgentOptions opts;
  opts.arch = Architecture::Mlp;
  opts.hidden = 8;
  AgentSet a = make_agents(sp, opts, rng);
  AgentSet b = make_agents(sp, opts, rng);
  const auto path = (std::filesystem::temp_directory_path() / "msglab_agents_test.bin").string();
  save_parameters(path, a, "goals3", 42);
  const ParameterHeader h = load_parameters(path, b);
  EXPECT_EQ(h.env_id, "goals3");
  EXPECT_EQ(h.seed, 42u);
  const auto na = a.networks(), nb = b.networks();
  for (std::size_t i = 0; i < na.size(); ++i) EXPECT_EQ(na[i]->flat_parameters(), nb[i]->flat_parameters());

  opts.hidden = 9;
  AgentSet c = make_agents(sp, opts, rng);
  EXPECT_THROW(load_parameters(path, c), std::runtime_error);
  std::remove(path.c_str());
}

TEST(Agents, StandardNormalMoments) {
  std::mt19937_64 rng(13);
  double m = 0.0, v = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = standard_normal(rng);
    m += x;
    v += x * x;
  }
  EXPECT_NEAR(m / n, 0.0, 0.01);
  EXPECT_NEAR(v / n, 1.0, 0.02);
}
