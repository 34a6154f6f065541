#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace msglab {

namespace oracle {
template <typename Scalar>
struct TabularMsg;
}

enum class ObsMode { NoObs, PosObs, FullObs };

enum class EnvKind { RecommendationLetter, ReachingGoals };

struct MsgState {
  Eigen::VectorXd encoding;
  int step_index = 0;
};

struct Observation {
  Eigen::VectorXd encoding;
};

struct Signal {
  int index = 0;
  Eigen::VectorXd one_hot;
};

struct Action {
  int index = 0;
};

struct Spaces {
  int state_dim = 0;
  int obs_dim = 0;
  int signal_count = 0;
  int action_count = 0;
  int horizon = 0;
};

struct StepResult {
  MsgState next;
  double reward_sender = 0.0;
  double reward_receiver = 0.0;
  bool done = false;
};

/// One timestep (s, o, sigma, a, r^i, r^j, s').
///
/// `gumbel_noise` is the noise row that produced the signal; learners replay it
/// to rebuild the differentiable signal pathway. An empty row means the
/// pathway was not retained.
struct Transition {
  MsgState state;
  Observation observation;
  Signal signal;
  Eigen::VectorXd signal_soft_probs;
  Eigen::RowVectorXd gumbel_noise;
  Action action;
  double reward_sender = 0.0;
  double reward_receiver = 0.0;
  MsgState next_state;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> transitions;

  std::size_t length() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
};

/// Markov signaling game: the sender sees the state, the receiver sees the
/// emitted observation plus the sender's signal and picks the action that
/// drives transitions and both rewards.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual Spaces spaces() const = 0;

  /// Initial state; reseeds the environment's own RNG stream.
  virtual MsgState reset(std::uint64_t seed) = 0;
  virtual Observation observe(const MsgState& state, ObsMode mode) const = 0;
  Observation observe(const MsgState& state) const { return observe(state, obs_mode_); }
  /// Throws std::out_of_range for an action outside the action space.
  virtual StepResult step(const MsgState& state, const Action& action) = 0;

  /// Exact finite model, when the game has one.
  virtual std::optional<oracle::TabularMsg<double>> tabular_model() const;

  ObsMode obs_mode() const { return obs_mode_; }

 protected:
  explicit Environment(ObsMode mode) : obs_mode_(mode) {}
  std::mt19937_64 rng_{0};

 private:
  ObsMode obs_mode_;
};

/// A professor (sender) writes letters for a stream of students; HR (receiver)
/// decides whether to hire each one. Strong students occur with probability 1/3.
class RecommendationLetter final : public Environment {
 public:
  static constexpr int kStrong = 0;
  static constexpr int kWeak = 1;
  static constexpr int kNoHire = 0;
  static constexpr int kHire = 1;
  static constexpr double kStrongPrior = 1.0 / 3.0;

  explicit RecommendationLetter(int stream_length = 1);

  EnvKind kind() const override { return EnvKind::RecommendationLetter; }
  std::string name() const override { return "recletter"; }
  Spaces spaces() const override;
  MsgState reset(std::uint64_t seed) override;
  using Environment::observe;
  Observation observe(const MsgState& state, ObsMode mode) const override;
  StepResult step(const MsgState& state, const Action& action) override;
  std::optional<oracle::TabularMsg<double>> tabular_model() const override;

  static MsgState make_state(int quality, int step_index = 0);
  static int quality(const MsgState& state);

 private:
  int stream_length_;
  MsgState draw(int step_index);
};

struct ReachingGoalsParams {
  int size = 3;
  ObsMode obs_mode = ObsMode::PosObs;
  int horizon = 50;
  double reach_reward = 20.0;
  double penalty_scale = 5.0;

  /// Amplification used for the 3x3 (20, 5) and 5x5 (12, 3.5) maps.
  static ReachingGoalsParams for_size(int n, ObsMode mode = ObsMode::PosObs);
};

/// Grid world: the receiver walks toward apples. The red apple pays the
/// sender, the green apple pays the receiver, and the receiver can only see
/// its own position.
class ReachingGoals final : public Environment {
 public:
  enum Move { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

  struct Layout {
    int receiver = 0;
    int red = 0;
    int green = 0;
  };

  explicit ReachingGoals(ReachingGoalsParams params);

  EnvKind kind() const override { return EnvKind::ReachingGoals; }
  std::string name() const override;
  Spaces spaces() const override;
  MsgState reset(std::uint64_t seed) override;
  using Environment::observe;
  Observation observe(const MsgState& state, ObsMode mode) const override;
  StepResult step(const MsgState& state, const Action& action) override;

  const ReachingGoalsParams& params() const { return params_; }
  int cells() const { return params_.size * params_.size; }
  MsgState make_state(const Layout& layout, int step_index = 0) const;
  Layout layout(const MsgState& state) const;
  int manhattan(int a, int b) const;

 private:
  ReachingGoalsParams params_;
  int random_cell_except(int excluded);
};

std::unique_ptr<Environment> make_recletter(int stream_length = 1);
std::unique_ptr<Environment> make_reaching_goals(int size, ObsMode mode = ObsMode::PosObs);

ObsMode parse_obs_mode(const std::string& text);
std::string to_string(ObsMode mode);

}  // namespace msglab
