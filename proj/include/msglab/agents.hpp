#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msglab/autodiff.hpp"
#include "msglab/env.hpp"

namespace msglab {

enum class Architecture { Tabular, Mlp };

struct NetworkSpec {
  int input_dim = 0;
  int output_dim = 0;
  Architecture arch = Architecture::Tabular;
  int hidden = 64;
  /// Std of tabular entries, and of the MLP output layer times sqrt(hidden).
  double init_scale = 0.01;
};

/// Tabular: logits = x W, one row per one-hot input (no bias).
/// Mlp: tanh(x W1 + b1) W2 + b2.
class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, std::mt19937_64& init_rng);

  ad::Tensor forward(const ad::Tensor& input) const;
  /// Same function without building a graph.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& input) const;

  const NetworkSpec& spec() const { return spec_; }
  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<ad::Tensor>& parameters() const { return params_; }
  Eigen::Index parameter_count() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);
  Eigen::VectorXd flat_grad() const;
  void zero_grad();

  /// Independent copy with fresh leaves.
  Network clone() const;
  void copy_from(const Network& other);

 private:
  NetworkSpec spec_;
  std::vector<ad::Tensor> params_;
};

/// Batch of signals drawn with the Gumbel-max trick. The noise is kept so the
/// straight-through pathway can be rebuilt inside a learner's graph.
struct SampledSignals {
  std::vector<int> index;
  Eigen::MatrixXd noise;
  Eigen::MatrixXd probs;
};

/// phi_eta(sigma | s): conditions on the state only.
class SignalingScheme {
 public:
  SignalingScheme() = default;
  SignalingScheme(NetworkSpec spec, std::mt19937_64& init_rng, double temperature = 1.0,
                  bool hard = true);

  int state_dim() const { return net_.spec().input_dim; }
  int signal_count() const { return net_.spec().output_dim; }
  double temperature() const { return temperature_; }
  void set_temperature(double t);
  bool hard() const { return hard_; }

  Network& network() { return net_; }
  const Network& network() const { return net_; }

  Eigen::MatrixXd logits(const Eigen::MatrixXd& states) const { return net_.evaluate(states); }
  /// Row-stochastic |batch| x |Sigma|.
  Eigen::MatrixXd distribution(const Eigen::MatrixXd& states) const;
  Eigen::VectorXd distribution(const MsgState& state, const Observation& obs) const;

  SampledSignals sample(const Eigen::MatrixXd& states, std::mt19937_64& rng) const;
  Signal sample(const MsgState& state, const Observation& obs, std::mt19937_64& rng) const;

  ad::Tensor logits_graph(const ad::Tensor& states) const { return net_.forward(states); }
  /// Straight-through (or soft) Gumbel signal rebuilt from logits and the
  /// recorded indices and noise.
  ad::Tensor signal_graph(const ad::Tensor& logits, const std::vector<int>& index,
                          const Eigen::MatrixXd& noise) const;

 private:
  Network net_;
  double temperature_ = 1.0;
  bool hard_ = true;
};

/// How the receiver reads a signal.
///
/// OneHot feeds the signal vector. Posterior feeds the Bayesian posterior
/// mu(. | sigma) over states, which the receiver can compute because it knows
/// the committed scheme; the scheme must then be tabular over one-hot states.
enum class SignalEncoding { OneHot, Posterior };

/// pi_theta(a | o, sigma). Input is [o, signal features].
class ReceiverPolicy {
 public:
  ReceiverPolicy() = default;
  ReceiverPolicy(int obs_dim, NetworkSpec spec, std::mt19937_64& init_rng);

  int obs_dim() const { return obs_dim_; }
  int signal_feature_dim() const { return net_.spec().input_dim - obs_dim_; }
  int action_count() const { return net_.spec().output_dim; }

  Network& network() { return net_; }
  const Network& network() const { return net_; }

  void use_posterior_decoding(Eigen::VectorXd prior);
  SignalEncoding encoding() const { return encoding_; }
  const Eigen::VectorXd& prior() const { return prior_; }

  /// Signal features for each signal index; one-hot rows or posteriors.
  Eigen::MatrixXd signal_features(const SignalingScheme& scheme) const;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& features) const;
  Eigen::MatrixXd distribution(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& features) const;
  /// One-hot encoding only.
  Eigen::VectorXd distribution(const Observation& obs, const Signal& signal) const;

  ad::Tensor logits_graph(const ad::Tensor& obs, const ad::Tensor& features) const;

 private:
  Network net_;
  int obs_dim_ = 0;
  SignalEncoding encoding_ = SignalEncoding::OneHot;
  Eigen::VectorXd prior_;
};

/// ReceiverV(o, sigma) -> 1, SenderV_i(s) -> 1, SenderW_*(s) -> one value per
/// action, SenderQ_i(s) -> one value per signal.
enum class CriticKind { ReceiverV, SenderW_i, SenderW_j, SenderV_i, SenderQ_i };

std::string to_string(CriticKind kind);

class Critic {
 public:
  Critic() = default;
  Critic(CriticKind kind, NetworkSpec spec, std::mt19937_64& init_rng, int sync_interval = 50);

  CriticKind kind() const { return kind_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }
  const Network& target() const { return target_; }

  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& input) const { return net_.evaluate(input); }
  Eigen::MatrixXd evaluate_target(const Eigen::MatrixXd& input) const {
    return target_.evaluate(input);
  }
  /// Scalar estimate for one input; `head` selects the action or signal.
  double value(const Eigen::VectorXd& input, int head = 0) const;

  /// Counts an optimizer step and hard-syncs the target every sync_interval.
  void after_update();
  void sync_target();
  int updates() const { return updates_; }
  int sync_interval() const { return sync_interval_; }

 private:
  CriticKind kind_ = CriticKind::ReceiverV;
  Network net_;
  Network target_;
  int sync_interval_ = 50;
  int updates_ = 0;
};

struct AgentOptions {
  Architecture arch = Architecture::Tabular;
  int hidden = 64;
  double init_scale = 0.01;
  double temperature = 1.0;
  bool hard = true;
  int sync_interval = 50;
};

/// Both agents plus every critic any algorithm reads.
struct AgentSet {
  SignalingScheme scheme;
  ReceiverPolicy policy;
  Critic receiver_v;
  Critic sender_w_i;
  Critic sender_w_j;
  Critic sender_v_i;
  Critic sender_q_i;

  std::vector<Network*> networks();
};

/// Networks are initialized in a fixed order from `init_rng`.
AgentSet make_agents(const Spaces& spaces, const AgentOptions& options,
                     std::mt19937_64& init_rng);

/// Standard normal draw from two uniform01 draws (Box-Muller).
double standard_normal(std::mt19937_64& rng);

struct ParameterHeader {
  std::string env_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> dims;
};

/// Flat binary: magic, env id, seed, tensor dims, then raw doubles.
void save_parameters(const std::string& path, AgentSet& agents, const std::string& env_id,
                     std::uint64_t seed);
/// Throws std::runtime_error on a malformed file or mismatched dims.
ParameterHeader load_parameters(const std::string& path, AgentSet& agents);

}  // namespace msglab
