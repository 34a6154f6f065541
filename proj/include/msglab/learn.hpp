#pragma once

#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msglab/agents.hpp"
#include "msglab/autodiff.hpp"
#include "msglab/env.hpp"

namespace msglab {

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ad::Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// Descends along the accumulated grads. A positive `max_norm` rescales the
  /// joint grad to at most that norm first.
  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  void set_max_grad_norm(double n) { max_norm_ = n; }
  long steps() const { return t_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, max_norm_ = 0.0;
  long t_ = 0;
};

struct ReturnsBuffer {
  Eigen::VectorXd g_i;
  Eigen::VectorXd g_j;
  double gamma = 1.0;
};

/// G_t = r_t + gamma G_{t+1} computed backward, zero after the terminal step.
ReturnsBuffer compute_returns(const Trajectory& trajectory, double gamma);

/// Trajectories flattened into rows; rows of one episode are contiguous.
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd observations;
  std::vector<int> signals;
  std::vector<int> actions;
  /// Gumbel noise per row; empty when no transition kept it.
  Eigen::MatrixXd noise;
  Eigen::VectorXd r_i, r_j;
  Eigen::VectorXd g_i, g_j;
  std::vector<char> done;
  int signal_count = 0;
  int action_count = 0;

  Eigen::Index size() const { return states.rows(); }
  Eigen::MatrixXd signal_one_hot() const;

  static Batch from(const std::vector<Trajectory>& trajectories, double gamma, int signal_count,
                    int action_count);
};

// -- Critics -------------------------------------------------------------------------

/// Input matrix and output head per row for a critic kind.
struct CriticData {
  Eigen::MatrixXd inputs;
  std::vector<int> heads;
};

CriticData critic_data(CriticKind kind, const Batch& batch);

/// Monte-Carlo returns, or one-step SARSA targets through the target network
/// when `bootstrap` is set.
Eigen::VectorXd critic_targets(const Critic& critic, const Batch& batch, double gamma,
                               bool bootstrap);

/// One Adam step on the mean squared error; returns the loss before the step.
double critic_update(Critic& critic, Adam& opt, const Batch& batch, double gamma,
                     bool bootstrap = false);

/// Critic outputs picked at each row's head.
Eigen::VectorXd critic_values(const Critic& critic, const Batch& batch);

// -- Receiver ------------------------------------------------------------------------

/// Signal features of every row, as the receiver consumed them in the rollout.
Eigen::MatrixXd receiver_features(const ReceiverPolicy& policy, const SignalingScheme& scheme,
                                  const std::vector<int>& signals);

/// Policy step along E[(G^j - V^j(o, sigma)) grad log pi(a | o, sigma)]. The
/// signal is fed as a constant, so nothing flows to the sender.
void receiver_policy_update(ReceiverPolicy& policy, Adam& opt, const SignalingScheme& scheme,
                            const Critic& receiver_v, const Batch& batch,
                            double entropy_coef = 0.0);

/// Critic regression followed by the policy step. Returns the critic loss.
/// Throws std::invalid_argument on an empty batch.
double receiver_a2c_update(ReceiverPolicy& policy, Critic& receiver_v, Adam& policy_opt,
                           Adam& critic_opt, const SignalingScheme& scheme, const Batch& batch,
                           double gamma, double entropy_coef = 0.0);

// -- Sender objectives ---------------------------------------------------------------

struct SenderCritics {
  const Critic* w_i = nullptr;
  const Critic* v_i = nullptr;
  const Critic* q_i = nullptr;
  const Critic* w_j = nullptr;
};

/// Signal features inside a graph: the straight-through Gumbel signal, or the
/// posterior mu(. | sigma) as a function of the scheme.
ad::Tensor signal_features_graph(const SignalingScheme& scheme, const ReceiverPolicy& policy,
                                 const ad::Tensor& scheme_logits, const Batch& batch);

/// Surrogate whose eta-gradient is the signaling gradient
/// mean[(W^i(s,a) - b(s)) (grad log pi(a|o,sigma) + grad log phi(sigma|s))],
/// with b = V^i when `baseline` is set and 0 otherwise.
ad::Tensor signaling_objective(const SignalingScheme& scheme, const ReceiverPolicy& policy,
                               const SenderCritics& critics, const Batch& batch,
                               bool baseline = true);

/// Surrogate whose eta-gradient is mean[(Q^i(s,sigma) - b(s)) grad log phi(sigma|s)].
ad::Tensor pg_objective(const SignalingScheme& scheme, const SenderCritics& critics,
                        const Batch& batch, bool baseline = true);

/// Flattened eta-gradient estimates of the sender's value.
Eigen::VectorXd signaling_gradient(SignalingScheme& scheme, ReceiverPolicy& policy,
                                   const SenderCritics& critics, const Batch& batch,
                                   bool baseline = true);
Eigen::VectorXd pg_signal_gradient(SignalingScheme& scheme, const SenderCritics& critics,
                                   const Batch& batch, bool baseline = false);

// -- Extended obedience constraints -----------------------------------------------------

struct ConstraintEstimate {
  int sigma = 0;
  int sigma_prime = 0;
  double value = 0.0;
  Eigen::VectorXd grad_eta;
};

/// E(t, sigma) = sum_a pi(a | o_t, sigma) W^j(s_t, a), with pi and W^j held
/// constant.
Eigen::MatrixXd expected_receiver_value(const ReceiverPolicy& policy,
                                        const SignalingScheme& scheme, const Critic& w_j,
                                        const Batch& batch);

/// C(sigma, sigma') estimated as mean_t phi(sigma|s_t) [E(t, sigma) - E(t, sigma')].
ConstraintEstimate constraint_value_and_grad(SignalingScheme& scheme,
                                             const ReceiverPolicy& policy, const Critic& w_j,
                                             const Batch& batch, int sigma, int sigma_prime);

/// Every ordered pair at once: rows sigma, cols sigma'.
Eigen::MatrixXd constraint_matrix(const Eigen::MatrixXd& scheme_probs,
                                  const Eigen::MatrixXd& expected);

/// The realized sigma_t paired with `k` uniform sigma' != sigma_t per row,
/// deduplicated and sorted.
std::vector<std::pair<int, int>> sample_constraint_pairs(const std::vector<int>& signals,
                                                         int signal_count, int k,
                                                         std::mt19937_64& rng);

enum class LagrangeMode { Lagrangian, DGD };

struct LagrangeConfig {
  double lambda = 3.0;
  double epsilon = 0.1;
  LagrangeMode mode = LagrangeMode::Lagrangian;
  double multiplier_lr = 3e-4;
  int constraint_samples = 4;
};

/// Dual-gradient-descent state; one multiplier per ordered pair plus one for
/// the honesty aggregate. Starts at zero.
struct Multipliers {
  Eigen::MatrixXd pair;
  double honesty = 0.0;

  explicit Multipliers(int signal_count = 0)
      : pair(Eigen::MatrixXd::Zero(signal_count, signal_count)) {}
};

struct ConstraintStep {
  std::vector<std::pair<int, int>> pairs;
  Eigen::VectorXd values;
  /// Weight on each grad C_p in the eta update.
  Eigen::VectorXd weights;
  double mean = 0.0;
  double min = 0.0;
};

/// Lagrangian: w_p = lambda [C_p < 0] + lambda [mean C - eps < 0] / P.
/// DGD: w_p = lambda_p + lambda_h / P, after which the multipliers move by
/// lambda <- max(0, lambda - alpha C).
ConstraintStep constraint_weights(const Eigen::VectorXd& values,
                                  const std::vector<std::pair<int, int>>& pairs,
                                  const LagrangeConfig& cfg, Multipliers* multipliers);

/// Ascent on objective + sum_p w_p C_p. Returns the constraint summary.
ConstraintStep constrained_sender_update(SignalingScheme& scheme, Adam& opt,
                                         const ad::Tensor& objective,
                                         const Eigen::MatrixXd& states,
                                         const Eigen::MatrixXd& expected,
                                         const std::vector<std::pair<int, int>>& pairs,
                                         const LagrangeConfig& cfg,
                                         Multipliers* multipliers = nullptr);

/// Plain ascent on a sender objective.
void sender_ascent(SignalingScheme& scheme, Adam& opt, const ad::Tensor& objective);

// -- DIAL ----------------------------------------------------------------------------

/// Sender descends the receiver critic loss (G^j - V^j(o, x))^2 through the
/// straight-through signal x. Returns the loss.
double dial_update(SignalingScheme& scheme, Adam& opt, const ReceiverPolicy& policy,
                   const Critic& receiver_v, const Batch& batch);

}  // namespace msglab
