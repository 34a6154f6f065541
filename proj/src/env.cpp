#include "msglab/env.hpp"

#include <cstdlib>

#include "msglab/autodiff.hpp"
#include "msglab/oracle.hpp"

namespace msglab {

std::optional<oracle::TabularMsg<double>> Environment::tabular_model() const {
  return std::nullopt;
}

// -- RecommendationLetter -----------------------------------------------------

RecommendationLetter::RecommendationLetter(int stream_length)
    : Environment(ObsMode::NoObs), stream_length_(stream_length) {
  if (stream_length < 1) throw std::invalid_argument("recletter: stream length must be >= 1");
}

Spaces RecommendationLetter::spaces() const { return {2, 0, 2, 2, stream_length_}; }

MsgState RecommendationLetter::make_state(int quality, int step_index) {
  MsgState s;
  s.encoding = Eigen::VectorXd::Zero(2);
  s.encoding[quality] = 1.0;
  s.step_index = step_index;
  return s;
}

int RecommendationLetter::quality(const MsgState& state) {
  return state.encoding[kStrong] > 0.5 ? kStrong : kWeak;
}

MsgState RecommendationLetter::draw(int step_index) {
  const int q = ad::uniform01(rng_) < kStrongPrior ? kStrong : kWeak;
  return make_state(q, step_index);
}

MsgState RecommendationLetter::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return draw(0);
}

Observation RecommendationLetter::observe(const MsgState&, ObsMode) const {
  return {Eigen::VectorXd(0)};
}

StepResult RecommendationLetter::step(const MsgState& state, const Action& action) {
  if (action.index != kHire && action.index != kNoHire)
    throw std::out_of_range("recletter: invalid action " + std::to_string(action.index));
  StepResult out;
  if (action.index == kHire) {
    out.reward_sender = 1.0;
    out.reward_receiver = quality(state) == kStrong ? 1.0 : -1.0;
  }
  const int next_step = state.step_index + 1;
  out.done = next_step == stream_length_;
  out.next = out.done ? make_state(quality(state), next_step) : draw(next_step);
  return out;
}

std::optional<oracle::TabularMsg<double>> RecommendationLetter::tabular_model() const {
  oracle::TabularMsg<double> m;
  m.initial = Eigen::Vector2d(kStrongPrior, 1.0 - kStrongPrior);
  m.observation_of_state = {0, 0};
  m.observation_count = 1;
  m.signal_count = 2;
  m.sender_reward.resize(2, 2);
  m.receiver_reward.resize(2, 2);
  m.sender_reward << 0.0, 1.0, 0.0, 1.0;
  m.receiver_reward << 0.0, 1.0, 0.0, -1.0;
  // Students are i.i.d.: every (s, a) leads to the prior.
  m.transition.assign(2, Eigen::MatrixXd(2, 2));
  for (auto& p : m.transition) p.rowwise() = m.initial.transpose();
  return m;
}

// -- ReachingGoals --------------------------------------------------------------

ReachingGoalsParams ReachingGoalsParams::for_size(int n, ObsMode mode) {
  ReachingGoalsParams p;
  p.size = n;
  p.obs_mode = mode;
  if (n >= 5) {
    p.reach_reward = 12.0;
    p.penalty_scale = 3.5;
  }
  return p;
}

ReachingGoals::ReachingGoals(ReachingGoalsParams params)
    : Environment(params.obs_mode), params_(params) {
  if (params.size < 2) throw std::invalid_argument("reaching goals: map size must be >= 2");
  if (params.horizon < 1) throw std::invalid_argument("reaching goals: horizon must be >= 1");
}

std::string ReachingGoals::name() const { return "goals" + std::to_string(params_.size); }

Spaces ReachingGoals::spaces() const {
  const int n2 = cells();
  const int obs = obs_mode() == ObsMode::FullObs ? 2 * n2 : n2;
  return {3 * n2, obs, n2, 4, params_.horizon};
}

int ReachingGoals::random_cell_except(int excluded) {
  const int n2 = cells();
  int c = static_cast<int>(ad::uniform01(rng_) * (n2 - 1));
  if (c >= excluded) ++c;
  return c;
}

MsgState ReachingGoals::make_state(const Layout& layout, int step_index) const {
  const int n2 = cells();
  MsgState s;
  s.encoding = Eigen::VectorXd::Zero(3 * n2);
  s.encoding[layout.receiver] = 1.0;
  s.encoding[n2 + layout.red] = 1.0;
  s.encoding[2 * n2 + layout.green] = 1.0;
  s.step_index = step_index;
  return s;
}

ReachingGoals::Layout ReachingGoals::layout(const MsgState& state) const {
  const int n2 = cells();
  Layout l;
  state.encoding.segment(0, n2).maxCoeff(&l.receiver);
  state.encoding.segment(n2, n2).maxCoeff(&l.red);
  state.encoding.segment(2 * n2, n2).maxCoeff(&l.green);
  return l;
}

int ReachingGoals::manhattan(int a, int b) const {
  const int n = params_.size;
  return std::abs(a / n - b / n) + std::abs(a % n - b % n);
}

MsgState ReachingGoals::reset(std::uint64_t seed) {
  rng_.seed(seed);
  Layout l;
  l.receiver = static_cast<int>(ad::uniform01(rng_) * cells());
  l.red = random_cell_except(l.receiver);
  l.green = random_cell_except(l.receiver);
  return make_state(l, 0);
}

Observation ReachingGoals::observe(const MsgState& state, ObsMode mode) const {
  const int n2 = cells();
  switch (mode) {
    case ObsMode::NoObs:
      return {Eigen::VectorXd::Zero(n2)};
    case ObsMode::PosObs:
      return {state.encoding.segment(0, n2)};
    case ObsMode::FullObs: {
      Eigen::VectorXd o(2 * n2);
      o << state.encoding.segment(0, n2), state.encoding.segment(2 * n2, n2);
      return {o};
    }
  }
  throw std::logic_error("reaching goals: unknown observation mode");
}

StepResult ReachingGoals::step(const MsgState& state, const Action& action) {
  if (action.index < 0 || action.index > 3)
    throw std::out_of_range("reaching goals: invalid action " + std::to_string(action.index));
  const int n = params_.size;
  Layout l = layout(state);
  int row = l.receiver / n;
  int col = l.receiver % n;
  switch (action.index) {
    case kUp: row = std::max(row - 1, 0); break;
    case kDown: row = std::min(row + 1, n - 1); break;
    case kLeft: col = std::max(col - 1, 0); break;
    case kRight: col = std::min(col + 1, n - 1); break;
  }
  l.receiver = row * n + col;

  StepResult out;
  // Coinciding goals are harvested together.
  const bool on_red = l.receiver == l.red;
  const bool on_green = l.receiver == l.green;
  if (on_red) {
    out.reward_sender += params_.reach_reward;
    l.red = random_cell_except(l.receiver);
  }
  if (on_green) {
    out.reward_receiver += params_.reach_reward;
    l.green = random_cell_except(l.receiver);
  }
  const double diameter = 2.0 * (n - 1);
  out.reward_sender -= params_.penalty_scale * manhattan(l.receiver, l.red) / diameter;
  out.reward_receiver -= params_.penalty_scale * manhattan(l.receiver, l.green) / diameter;

  const int next_step = state.step_index + 1;
  out.done = next_step >= params_.horizon;
  out.next = make_state(l, next_step);
  return out;
}

// -- Factories ------------------------------------------------------------------

std::unique_ptr<Environment> make_recletter(int stream_length) {
  return std::make_unique<RecommendationLetter>(stream_length);
}

std::unique_ptr<Environment> make_reaching_goals(int size, ObsMode mode) {
  return std::make_unique<ReachingGoals>(ReachingGoalsParams::for_size(size, mode));
}

ObsMode parse_obs_mode(const std::string& text) {
  if (text == "none" || text == "noobs" || text == "no-obs") return ObsMode::NoObs;
  if (text == "pos" || text == "posobs" || text == "pos-obs") return ObsMode::PosObs;
  if (text == "full" || text == "fullobs" || text == "full-obs") return ObsMode::FullObs;
  throw std::invalid_argument("unknown observation mode '" + text + "'");
}

std::string to_string(ObsMode mode) {
  switch (mode) {
    case ObsMode::NoObs: return "no-obs";
    case ObsMode::PosObs: return "pos-obs";
    case ObsMode::FullObs: return "full-obs";
  }
  return "?";
}

}  // namespace msglab
