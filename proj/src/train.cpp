#include "msglab/train.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace msglab {

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::PG: return "pg";
    case Algorithm::PGOC: return "pgoc";
    case Algorithm::DIAL: return "dial";
    case Algorithm::SG: return "sg";
    case Algorithm::SGOC: return "sgoc";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "pg") return Algorithm::PG;
  if (t == "pgoc") return Algorithm::PGOC;
  if (t == "dial") return Algorithm::DIAL;
  if (t == "sg") return Algorithm::SG;
  if (t == "sgoc") return Algorithm::SGOC;
  throw std::invalid_argument("unknown algorithm '" + text + "'");
}

bool uses_constraints(Algorithm algo) {
  return algo == Algorithm::PGOC || algo == Algorithm::SGOC;
}

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> v;
  if (!(gamma >= 0.0 && gamma <= 1.0)) v.push_back("gamma must lie in [0, 1]");
  if (!(lr_critic > 0.0)) v.push_back("lr_critic must be > 0");
  if (!(lr_actor > 0.0)) v.push_back("lr_actor must be > 0");
  if (!(lr_scheme > 0.0)) v.push_back("lr_scheme must be > 0");
  if (!(lagrange.multiplier_lr > 0.0)) v.push_back("lr_multiplier must be > 0");
  if (!(lagrange.lambda >= 0.0)) v.push_back("lambda must be >= 0");
  if (!(lagrange.epsilon >= 0.0)) v.push_back("epsilon must be >= 0");
  if (lagrange.constraint_samples < 1) v.push_back("constraint_samples must be >= 1");
  if (batch_episodes < 1) v.push_back("batch must be >= 1");
  if (total_episodes < 0) v.push_back("episodes must be >= 0");
  if (eval_interval < 0) v.push_back("eval_interval must be >= 0");
  if (!(agent.temperature > 0.0)) v.push_back("temperature must be > 0");
  if (agent.hidden < 1) v.push_back("hidden must be >= 1");
  if (agent.sync_interval < 1) v.push_back("target_sync must be >= 1");
  if (!(agent.init_scale >= 0.0)) v.push_back("init_scale must be >= 0");
  if (entropy_coef < 0.0) v.push_back("entropy must be >= 0");
  if (max_grad_norm < 0.0) v.push_back("max_grad_norm must be >= 0");
  return v;
}

RngStreams::RngStreams(std::uint64_t seed) {
  auto stream = [seed](std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
  };
  env = stream(1);
  sampling = stream(2);
  init = stream(3);
  pairs = stream(4);
}

std::vector<Trajectory> rollout(Environment& env, const AgentSet& agents, int episodes,
                                RngStreams& rng) {
  const Spaces sp = env.spaces();
  std::vector<Trajectory> out(static_cast<std::size_t>(episodes));
  std::vector<MsgState> states;
  for (int b = 0; b < episodes; ++b) states.push_back(env.reset(rng.env()));
  std::vector<char> active(static_cast<std::size_t>(episodes), 1);
  const Eigen::MatrixXd features = agents.policy.signal_features(agents.scheme);

  for (int live = episodes; live > 0;) {
    std::vector<int> ids;
    for (int b = 0; b < episodes; ++b)
      if (active[static_cast<std::size_t>(b)]) ids.push_back(b);
    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd s(n, sp.state_dim), o(n, sp.obs_dim), f(n, features.cols());
    std::vector<Observation> obs;
    for (Eigen::Index k = 0; k < n; ++k) {
      const MsgState& st = states[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])];
      s.row(k) = st.encoding.transpose();
      obs.push_back(env.observe(st));
      if (sp.obs_dim > 0) o.row(k) = obs.back().encoding.transpose();
    }
    const SampledSignals sig = agents.scheme.sample(s, rng.sampling);
    for (Eigen::Index k = 0; k < n; ++k) f.row(k) = features.row(sig.index[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd pi = agents.policy.distribution(o, f);
    for (Eigen::Index k = 0; k < n; ++k) {
      const int b = ids[static_cast<std::size_t>(k)];
      Transition t;
      t.state = states[static_cast<std::size_t>(b)];
      t.observation = obs[static_cast<std::size_t>(k)];
      t.signal.index = sig.index[static_cast<std::size_t>(k)];
      t.signal.one_hot = Eigen::VectorXd::Unit(sp.signal_count, t.signal.index);
      t.signal_soft_probs = sig.probs.row(k).transpose();
      t.gumbel_noise = sig.noise.row(k);
      t.action.index = ad::sample_categorical(pi.row(k).transpose(), rng.sampling);
      StepResult r = env.step(t.state, t.action);
      t.reward_sender = r.reward_sender;
      t.reward_receiver = r.reward_receiver;
      t.next_state = r.next;
      t.done = r.done;
      states[static_cast<std::size_t>(b)] = std::move(r.next);
      if (t.done) {
        active[static_cast<std::size_t>(b)] = 0;
        --live;
      }
      out[static_cast<std::size_t>(b)].transitions.push_back(std::move(t));
    }
  }
  return out;
}

double honesty_metric(const Environment& env, const SignalingScheme& scheme, const Batch& batch) {
  if (env.kind() == EnvKind::RecommendationLetter) {
    const Eigen::MatrixXd phi = scheme.distribution(Eigen::MatrixXd::Identity(2, 2));
    return std::abs(phi(RecommendationLetter::kStrong, 1) - phi(RecommendationLetter::kWeak, 1));
  }
  const auto& goals = dynamic_cast<const ReachingGoals&>(env);
  if (batch.size() == 0) return 0.0;
  const int n2 = goals.cells();
  long hits = 0;
  for (Eigen::Index r = 0; r < batch.size(); ++r) {
    Eigen::Index green = 0;
    batch.states.row(r).segment(2 * n2, n2).maxCoeff(&green);
    hits += batch.signals[static_cast<std::size_t>(r)] == green;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

TrainResult train(const TrainConfig& cfg, Environment& env, std::uint64_t seed,
                  const MetricsSink& sink) {
  if (auto v = cfg.violations(); !v.empty()) {
    std::ostringstream os;
    os << "invalid training config:";
    for (const auto& s : v) os << "\n  - " << s;
    throw std::invalid_argument(os.str());
  }
  const auto start = std::chrono::steady_clock::now();
  RngStreams rng(seed);
  const Spaces sp = env.spaces();
  TrainResult res;
  res.agents = make_agents(sp, cfg.agent, rng.init);
  res.multipliers = Multipliers(sp.signal_count);
  AgentSet& ag = res.agents;

  Adam scheme_opt(ag.scheme.network().parameters(), cfg.lr_scheme);
  Adam policy_opt(ag.policy.network().parameters(), cfg.lr_actor);
  std::vector<std::pair<Critic*, Adam>> critics;
  for (Critic* c : {&ag.receiver_v, &ag.sender_w_i, &ag.sender_w_j, &ag.sender_v_i, &ag.sender_q_i})
    critics.emplace_back(c, Adam(c->network().parameters(), cfg.lr_critic));
  for (Adam* o : {&scheme_opt, &policy_opt}) o->set_max_grad_norm(cfg.max_grad_norm);
  for (auto& [c, o] : critics) o.set_max_grad_norm(cfg.max_grad_norm);
  const SenderCritics sc{&ag.sender_w_i, &ag.sender_v_i, &ag.sender_q_i, &ag.sender_w_j};

  long done = 0;
  long next_emit = cfg.eval_interval;
  double sum_i = 0.0, sum_j = 0.0;
  long window = 0;
  while (done < cfg.total_episodes) {
    const int b = static_cast<int>(std::min<long>(cfg.batch_episodes, cfg.total_episodes - done));
    const auto trajs = rollout(env, ag, b, rng);
    const Batch batch = Batch::from(trajs, cfg.gamma, sp.signal_count, sp.action_count);

    for (auto& [c, o] : critics) critic_update(*c, o, batch, cfg.gamma, cfg.bootstrap);

    if (!cfg.freeze_sender) {
      switch (cfg.algorithm) {
        case Algorithm::SG:
          sender_ascent(ag.scheme, scheme_opt,
                        signaling_objective(ag.scheme, ag.policy, sc, batch, cfg.sender_baseline));
          break;
        case Algorithm::PG:
          sender_ascent(ag.scheme, scheme_opt,
                        pg_objective(ag.scheme, sc, batch, cfg.sender_baseline));
          break;
        case Algorithm::SGOC:
        case Algorithm::PGOC: {
          ad::Tensor obj =
              cfg.algorithm == Algorithm::SGOC
                  ? signaling_objective(ag.scheme, ag.policy, sc, batch, cfg.sender_baseline)
                  : pg_objective(ag.scheme, sc, batch, cfg.sender_baseline);
          const auto pairs = sample_constraint_pairs(batch.signals, sp.signal_count,
                                                     cfg.lagrange.constraint_samples, rng.pairs);
          const Eigen::MatrixXd e = expected_receiver_value(ag.policy, ag.scheme, ag.sender_w_j, batch);
          constrained_sender_update(ag.scheme, scheme_opt, obj, batch.states, e, pairs,
                                    cfg.lagrange, &res.multipliers);
          break;
        }
        case Algorithm::DIAL:
          dial_update(ag.scheme, scheme_opt, ag.policy, ag.receiver_v, batch);
          break;
      }
    }
    receiver_policy_update(ag.policy, policy_opt, ag.scheme, ag.receiver_v, batch,
                           cfg.entropy_coef);

    for (const auto& t : trajs) {
      for (const auto& tr : t.transitions) {
        sum_i += tr.reward_sender;
        sum_j += tr.reward_receiver;
      }
    }
    window += b;
    done += b;

    if (cfg.eval_interval > 0 && done >= next_emit) {
      MetricsRow row;
      row.seed = seed;
      row.episode_index = done;
      row.reward_sender = sum_i / static_cast<double>(window);
      row.reward_receiver = sum_j / static_cast<double>(window);
      row.social_welfare = row.reward_sender + row.reward_receiver;
      row.honesty = honesty_metric(env, ag.scheme, batch);
      Eigen::MatrixXd c = constraint_matrix(
          ag.scheme.distribution(batch.states),
          expected_receiver_value(ag.policy, ag.scheme, ag.sender_w_j, batch));
      c.diagonal().setConstant(std::numeric_limits<double>::infinity());
      row.min_constraint_slack = sp.signal_count > 1 ? c.minCoeff() : 0.0;
      row.wallclock =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      res.rows.push_back(row);
      if (sink) sink(row);
      sum_i = sum_j = 0.0;
      window = 0;
      while (next_emit <= done) next_emit += cfg.eval_interval;
    }
  }
  return res;
}

double final_mean(const std::vector<MetricsRow>& rows, double MetricsRow::*field, double fraction) {
  if (rows.empty()) return std::nan("");
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows.size()))));
  double acc = 0.0;
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) acc += rows[i].*field;
  return acc / static_cast<double>(n);
}

}  // namespace msglab
