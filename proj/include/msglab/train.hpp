#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msglab/agents.hpp"
#include "msglab/env.hpp"
#include "msglab/learn.hpp"

namespace msglab {

enum class Algorithm { PG, PGOC, DIAL, SG, SGOC };

std::string to_string(Algorithm algo);
/// Accepts pg, pgoc, dial, sg, sgoc in any case.
Algorithm parse_algorithm(const std::string& text);
bool uses_constraints(Algorithm algo);

struct TrainConfig {
  Algorithm algorithm = Algorithm::SGOC;
  double gamma = 0.99;
  double lr_critic = 1e-3;
  double lr_actor = 3e-4;
  double lr_scheme = 3e-4;
  int batch_episodes = 32;
  long total_episodes = 20000;
  /// Episodes between metric rows; 0 emits nothing.
  long eval_interval = 320;
  LagrangeConfig lagrange;
  AgentOptions agent;
  /// Keeps the scheme at its random initialization.
  bool freeze_sender = false;
  bool bootstrap = false;
  bool sender_baseline = true;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.0;

  /// Every violated invariant, empty when valid.
  std::vector<std::string> violations() const;
};

struct MetricsRow {
  std::uint64_t seed = 0;
  long episode_index = 0;
  double reward_sender = 0.0;
  double reward_receiver = 0.0;
  double social_welfare = 0.0;
  double honesty = 0.0;
  double min_constraint_slack = 0.0;
  double wallclock = 0.0;
};

/// Independent streams per seed, so that for example the constraint pair draws
/// never shift the environment or sampling sequence.
struct RngStreams {
  std::mt19937_64 env;
  std::mt19937_64 sampling;
  std::mt19937_64 init;
  std::mt19937_64 pairs;

  explicit RngStreams(std::uint64_t seed);
};

/// Runs `episodes` episodes in lockstep. Each transition keeps its Gumbel noise.
std::vector<Trajectory> rollout(Environment& env, const AgentSet& agents, int episodes,
                                RngStreams& rng);

/// Letter game: |phi(1|S) - phi(1|W)|. Goals: fraction of batch signals that
/// point at the green goal.
double honesty_metric(const Environment& env, const SignalingScheme& scheme, const Batch& batch);

struct TrainResult {
  std::vector<MetricsRow> rows;
  AgentSet agents;
  Multipliers multipliers;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

/// Throws std::invalid_argument listing every config violation before any
/// training happens.
TrainResult train(const TrainConfig& cfg, Environment& env, std::uint64_t seed,
                  const MetricsSink& sink = {});

/// Mean of `field` over the last `fraction` of rows (at least one row).
double final_mean(const std::vector<MetricsRow>& rows, double MetricsRow::*field,
                  double fraction = 0.1);

}  // namespace msglab
