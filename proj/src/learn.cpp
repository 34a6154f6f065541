#include "msglab/learn.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace msglab {

using ad::Tensor;

namespace {

Tensor constant_col(const Eigen::VectorXd& v) { return Tensor::constant(Eigen::MatrixXd(v)); }

Eigen::VectorXd pick(const Eigen::MatrixXd& m, const std::vector<int>& heads) {
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[r] = m(r, heads[static_cast<std::size_t>(r)]);
  return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& table, const std::vector<int>& index) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(index.size()), table.cols());
  for (std::size_t k = 0; k < index.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = table.row(index[k]);
  return out;
}

void require_nonempty(const Batch& batch, const char* who) {
  if (batch.size() == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
}

}  // namespace

// -- Adam -------------------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: learning rate must be > 0");
  for (const auto& p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  double scale = 1.0;
  if (max_norm_ > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_) sq += p.grad().squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm_) scale = max_norm_ / norm;
  }
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Eigen::MatrixXd g = params_[i].grad() * scale;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params_[i].leaf_value().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

// -- Returns and batches ----------------------------------------------------------------

ReturnsBuffer compute_returns(const Trajectory& trajectory, double gamma) {
  const auto n = static_cast<Eigen::Index>(trajectory.length());
  ReturnsBuffer out;
  out.gamma = gamma;
  out.g_i.resize(n);
  out.g_j.resize(n);
  double gi = 0.0, gj = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const Transition& tr = trajectory.transitions[static_cast<std::size_t>(t)];
    if (tr.done) gi = gj = 0.0;
    gi = tr.reward_sender + gamma * gi;
    gj = tr.reward_receiver + gamma * gj;
    out.g_i[t] = gi;
    out.g_j[t] = gj;
  }
  return out;
}

Eigen::MatrixXd Batch::signal_one_hot() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), signal_count);
  for (Eigen::Index r = 0; r < size(); ++r) out(r, signals[static_cast<std::size_t>(r)]) = 1.0;
  return out;
}

Batch Batch::from(const std::vector<Trajectory>& trajectories, double gamma, int signal_count,
                  int action_count) {
  Eigen::Index n = 0;
  for (const auto& tr : trajectories) n += static_cast<Eigen::Index>(tr.length());
  Batch b;
  b.signal_count = signal_count;
  b.action_count = action_count;
  if (n == 0) return b;
  const auto it = std::find_if(trajectories.begin(), trajectories.end(),
                               [](const Trajectory& t) { return !t.empty(); });
  const Transition& first = it->transitions.front();
  b.states.resize(n, first.state.encoding.size());
  b.observations.resize(n, first.observation.encoding.size());
  b.r_i.resize(n);
  b.r_j.resize(n);
  b.g_i.resize(n);
  b.g_j.resize(n);
  bool has_noise = true;
  for (const auto& tr : trajectories)
    for (const auto& t : tr.transitions) has_noise = has_noise && t.gumbel_noise.size() == signal_count;
  if (has_noise) b.noise.resize(n, signal_count);
  Eigen::Index r = 0;
  for (const auto& tr : trajectories) {
    const ReturnsBuffer ret = compute_returns(tr, gamma);
    for (std::size_t k = 0; k < tr.length(); ++k, ++r) {
      const Transition& t = tr.transitions[k];
      b.states.row(r) = t.state.encoding.transpose();
      if (b.observations.cols() > 0) b.observations.row(r) = t.observation.encoding.transpose();
      b.signals.push_back(t.signal.index);
      b.actions.push_back(t.action.index);
      if (has_noise) b.noise.row(r) = t.gumbel_noise;
      b.r_i[r] = t.reward_sender;
      b.r_j[r] = t.reward_receiver;
      b.g_i[r] = ret.g_i[static_cast<Eigen::Index>(k)];
      b.g_j[r] = ret.g_j[static_cast<Eigen::Index>(k)];
      b.done.push_back(t.done || k + 1 == tr.length());
    }
  }
  return b;
}

// -- Critics ----------------------------------------------------------------------------

CriticData critic_data(CriticKind kind, const Batch& batch) {
  CriticData d;
  switch (kind) {
    case CriticKind::ReceiverV:
      if (batch.observations.cols() == 0) {
        d.inputs = batch.signal_one_hot();
      } else {
        d.inputs.resize(batch.size(), batch.observations.cols() + batch.signal_count);
        d.inputs << batch.observations, batch.signal_one_hot();
      }
      d.heads.assign(static_cast<std::size_t>(batch.size()), 0);
      break;
    case CriticKind::SenderW_i:
    case CriticKind::SenderW_j:
      d.inputs = batch.states;
      d.heads = batch.actions;
      break;
    case CriticKind::SenderV_i:
      d.inputs = batch.states;
      d.heads.assign(static_cast<std::size_t>(batch.size()), 0);
      break;
    case CriticKind::SenderQ_i:
      d.inputs = batch.states;
      d.heads = batch.signals;
      break;
  }
  return d;
}

Eigen::VectorXd critic_values(const Critic& critic, const Batch& batch) {
  const CriticData d = critic_data(critic.kind(), batch);
  return pick(critic.evaluate(d.inputs), d.heads);
}

Eigen::VectorXd critic_targets(const Critic& critic, const Batch& batch, double gamma,
                               bool bootstrap) {
  const bool receiver =
      critic.kind() == CriticKind::ReceiverV || critic.kind() == CriticKind::SenderW_j;
  if (!bootstrap) return receiver ? batch.g_j : batch.g_i;
  const Eigen::VectorXd& r = receiver ? batch.r_j : batch.r_i;
  const CriticData d = critic_data(critic.kind(), batch);
  const Eigen::VectorXd next = pick(critic.evaluate_target(d.inputs), d.heads);
  Eigen::VectorXd y = r;
  for (Eigen::Index t = 0; t + 1 < batch.size(); ++t)
    if (!batch.done[static_cast<std::size_t>(t)]) y[t] += gamma * next[t + 1];
  return y;
}

double critic_update(Critic& critic, Adam& opt, const Batch& batch, double gamma,
                     bool bootstrap) {
  require_nonempty(batch, "critic_update");
  const CriticData d = critic_data(critic.kind(), batch);
  const Eigen::VectorXd y = critic_targets(critic, batch, gamma, bootstrap);
  Tensor pred = ad::gather(critic.network().forward(Tensor::constant(d.inputs)), d.heads);
  Tensor loss = ad::mean(ad::square(pred - constant_col(y)));
  opt.zero_grad();
  loss.backward();
  opt.step();
  critic.after_update();
  return loss.item();
}

// -- Receiver ---------------------------------------------------------------------------

Eigen::MatrixXd receiver_features(const ReceiverPolicy& policy, const SignalingScheme& scheme,
                                  const std::vector<int>& signals) {
  return rows_of(policy.signal_features(scheme), signals);
}

void receiver_policy_update(ReceiverPolicy& policy, Adam& opt, const SignalingScheme& scheme,
                            const Critic& receiver_v, const Batch& batch, double entropy_coef) {
  require_nonempty(batch, "receiver_policy_update");
  const Eigen::VectorXd adv = batch.g_j - critic_values(receiver_v, batch);
  Tensor logits = policy.logits_graph(Tensor::constant(batch.observations),
                                      Tensor::constant(receiver_features(policy, scheme, batch.signals)));
  Tensor logp_all = ad::log_softmax(logits);
  Tensor logp = ad::gather(logp_all, batch.actions);
  Tensor loss = -ad::mean(ad::mul(constant_col(adv), logp));
  if (entropy_coef > 0.0)
    loss = loss + entropy_coef * ad::mean(ad::sum_cols(ad::mul(ad::softmax(logits), logp_all)));
  opt.zero_grad();
  loss.backward();
  opt.step();
}

double receiver_a2c_update(ReceiverPolicy& policy, Critic& receiver_v, Adam& policy_opt,
                           Adam& critic_opt, const SignalingScheme& scheme, const Batch& batch,
                           double gamma, double entropy_coef) {
  require_nonempty(batch, "receiver_a2c_update");
  const double loss = critic_update(receiver_v, critic_opt, batch, gamma);
  receiver_policy_update(policy, policy_opt, scheme, receiver_v, batch, entropy_coef);
  return loss;
}

// -- Sender objectives ------------------------------------------------------------------

Tensor signal_features_graph(const SignalingScheme& scheme, const ReceiverPolicy& policy,
                             const Tensor& scheme_logits, const Batch& batch) {
  if (policy.encoding() == SignalEncoding::OneHot)
    return scheme.signal_graph(scheme_logits, batch.signals, batch.noise);
  const Eigen::Index n = policy.prior().size();
  Tensor log_phi = ad::log_softmax(scheme.logits_graph(Tensor::constant(Eigen::MatrixXd::Identity(n, n))));
  Tensor log_prior = Tensor::constant(Eigen::MatrixXd(policy.prior().array().log().matrix().transpose()));
  Tensor mu = ad::softmax(ad::add_row(ad::transpose(log_phi), log_prior));
  return ad::select_rows(mu, batch.signals);
}

Tensor signaling_objective(const SignalingScheme& scheme, const ReceiverPolicy& policy,
                           const SenderCritics& critics, const Batch& batch, bool baseline) {
  require_nonempty(batch, "signaling_objective");
  if (critics.w_i == nullptr || (baseline && critics.v_i == nullptr))
    throw std::invalid_argument("signaling_objective: missing sender critic");
  Eigen::VectorXd adv = pick(critics.w_i->evaluate(batch.states), batch.actions);
  if (baseline) adv -= critics.v_i->evaluate(batch.states).col(0);
  Tensor logits = scheme.logits_graph(Tensor::constant(batch.states));
  Tensor x = signal_features_graph(scheme, policy, logits, batch);
  Tensor log_pi = ad::gather(
      ad::log_softmax(policy.logits_graph(Tensor::constant(batch.observations), x)), batch.actions);
  Tensor log_phi = ad::gather(ad::log_softmax(logits), batch.signals);
  return ad::mean(ad::mul(constant_col(adv), log_pi + log_phi));
}

Tensor pg_objective(const SignalingScheme& scheme, const SenderCritics& critics,
                    const Batch& batch, bool baseline) {
  require_nonempty(batch, "pg_objective");
  if (critics.q_i == nullptr || (baseline && critics.v_i == nullptr))
    throw std::invalid_argument("pg_objective: missing sender critic");
  Eigen::VectorXd adv = pick(critics.q_i->evaluate(batch.states), batch.signals);
  if (baseline) adv -= critics.v_i->evaluate(batch.states).col(0);
  Tensor log_phi = ad::gather(ad::log_softmax(scheme.logits_graph(Tensor::constant(batch.states))),
                              batch.signals);
  return ad::mean(ad::mul(constant_col(adv), log_phi));
}

Eigen::VectorXd signaling_gradient(SignalingScheme& scheme, ReceiverPolicy& policy,
                                   const SenderCritics& critics, const Batch& batch,
                                   bool baseline) {
  Tensor j = signaling_objective(scheme, policy, critics, batch, baseline);
  scheme.network().zero_grad();
  j.backward();
  policy.network().zero_grad();
  return scheme.network().flat_grad();
}

Eigen::VectorXd pg_signal_gradient(SignalingScheme& scheme, const SenderCritics& critics,
                                   const Batch& batch, bool baseline) {
  Tensor j = pg_objective(scheme, critics, batch, baseline);
  scheme.network().zero_grad();
  j.backward();
  return scheme.network().flat_grad();
}

// -- Constraints ------------------------------------------------------------------------

Eigen::MatrixXd expected_receiver_value(const ReceiverPolicy& policy,
                                        const SignalingScheme& scheme, const Critic& w_j,
                                        const Batch& batch) {
  const Eigen::MatrixXd w = w_j.evaluate(batch.states);
  const Eigen::MatrixXd features = policy.signal_features(scheme);
  const Eigen::Index n = batch.size();
  Eigen::MatrixXd e(n, features.rows());
  for (Eigen::Index s = 0; s < features.rows(); ++s) {
    const Eigen::MatrixXd f = features.row(s).replicate(n, 1);
    e.col(s) = policy.distribution(batch.observations, f).cwiseProduct(w).rowwise().sum();
  }
  return e;
}

ConstraintEstimate constraint_value_and_grad(SignalingScheme& scheme,
                                             const ReceiverPolicy& policy, const Critic& w_j,
                                             const Batch& batch, int sigma, int sigma_prime) {
  require_nonempty(batch, "constraint_value_and_grad");
  const int k = scheme.signal_count();
  if (sigma < 0 || sigma >= k || sigma_prime < 0 || sigma_prime >= k)
    throw std::out_of_range("constraint_value_and_grad: signal index out of range");
  const Eigen::MatrixXd e = expected_receiver_value(policy, scheme, w_j, batch);
  const Eigen::VectorXd diff = e.col(sigma) - e.col(sigma_prime);
  Tensor probs = ad::softmax(scheme.logits_graph(Tensor::constant(batch.states)));
  Tensor c = ad::mean(ad::mul(ad::column(probs, sigma), constant_col(diff)));
  scheme.network().zero_grad();
  c.backward();
  return {sigma, sigma_prime, c.item(), scheme.network().flat_grad()};
}

Eigen::MatrixXd constraint_matrix(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& expected) {
  const Eigen::Index k = probs.cols();
  Eigen::MatrixXd c(k, k);
  for (Eigen::Index x = 0; x < k; ++x)
    for (Eigen::Index y = 0; y < k; ++y)
      c(x, y) = probs.col(x).cwiseProduct(expected.col(x) - expected.col(y)).mean();
  return c;
}

std::vector<std::pair<int, int>> sample_constraint_pairs(const std::vector<int>& signals,
                                                         int signal_count, int k,
                                                         std::mt19937_64& rng) {
  std::set<std::pair<int, int>> pairs;
  if (signal_count < 2) return {};
  for (int s : signals)
    for (int i = 0; i < k; ++i) {
      int other = static_cast<int>(ad::uniform01(rng) * (signal_count - 1));
      if (other >= s) ++other;
      pairs.emplace(s, other);
    }
  return {pairs.begin(), pairs.end()};
}

ConstraintStep constraint_weights(const Eigen::VectorXd& values,
                                  const std::vector<std::pair<int, int>>& pairs,
                                  const LagrangeConfig& cfg, Multipliers* multipliers) {
  ConstraintStep out;
  out.pairs = pairs;
  out.values = values;
  const auto p = static_cast<Eigen::Index>(pairs.size());
  out.weights = Eigen::VectorXd::Zero(p);
  if (p == 0) return out;
  out.mean = values.mean();
  out.min = values.minCoeff();
  const double honesty_slack = out.mean - cfg.epsilon;
  if (cfg.mode == LagrangeMode::Lagrangian) {
    const double h = honesty_slack < 0.0 ? cfg.lambda / static_cast<double>(p) : 0.0;
    for (Eigen::Index i = 0; i < p; ++i) out.weights[i] = (values[i] < 0.0 ? cfg.lambda : 0.0) + h;
    return out;
  }
  if (multipliers == nullptr) throw std::invalid_argument("constraint_weights: DGD needs multipliers");
  const double h = multipliers->honesty / static_cast<double>(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto [x, y] = pairs[static_cast<std::size_t>(i)];
    out.weights[i] = multipliers->pair(x, y) + h;
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto [x, y] = pairs[static_cast<std::size_t>(i)];
    multipliers->pair(x, y) = std::max(0.0, multipliers->pair(x, y) - cfg.multiplier_lr * values[i]);
  }
  multipliers->honesty = std::max(0.0, multipliers->honesty - cfg.multiplier_lr * honesty_slack);
  return out;
}

ConstraintStep constrained_sender_update(SignalingScheme& scheme, Adam& opt,
                                         const Tensor& objective, const Eigen::MatrixXd& states,
                                         const Eigen::MatrixXd& expected,
                                         const std::vector<std::pair<int, int>>& pairs,
                                         const LagrangeConfig& cfg, Multipliers* multipliers) {
  Tensor probs = ad::softmax(scheme.logits_graph(Tensor::constant(states)));
  const Eigen::MatrixXd& phi = probs.value();
  Eigen::VectorXd values(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [x, y] = pairs[i];
    values[static_cast<Eigen::Index>(i)] =
        phi.col(x).cwiseProduct(expected.col(x) - expected.col(y)).mean();
  }
  ConstraintStep step = constraint_weights(values, pairs, cfg, multipliers);

  // sum_p w_p C_p = mean_t sum_sigma phi(sigma|s_t) M(t, sigma)
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(phi.rows(), phi.cols());
  bool active = false;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = step.weights[static_cast<Eigen::Index>(i)];
    if (w == 0.0) continue;
    active = true;
    const auto [x, y] = pairs[i];
    m.col(x) += w * (expected.col(x) - expected.col(y));
  }
  Tensor total = objective;
  if (active) total = total + ad::mean(ad::sum_cols(ad::mul(probs, Tensor::constant(m))));
  opt.zero_grad();
  (-total).backward();
  opt.step();
  return step;
}

void sender_ascent(SignalingScheme&, Adam& opt, const Tensor& objective) {
  opt.zero_grad();
  (-objective).backward();
  opt.step();
}

// -- DIAL -------------------------------------------------------------------------------

double dial_update(SignalingScheme& scheme, Adam& opt, const ReceiverPolicy& policy,
                   const Critic& receiver_v, const Batch& batch) {
  require_nonempty(batch, "dial_update");
  if (policy.encoding() != SignalEncoding::OneHot)
    throw std::invalid_argument("dial_update: needs one-hot signal encoding");
  Tensor logits = scheme.logits_graph(Tensor::constant(batch.states));
  Tensor x = scheme.signal_graph(logits, batch.signals, batch.noise);
  Tensor input = batch.observations.cols() > 0
                     ? ad::concat_cols(Tensor::constant(batch.observations), x)
                     : x;
  Tensor v = receiver_v.network().forward(input);
  Tensor loss = ad::mean(ad::square(v - constant_col(batch.g_j)));
  opt.zero_grad();
  loss.backward();
  opt.step();
  return loss.item();
}

}  // namespace msglab
