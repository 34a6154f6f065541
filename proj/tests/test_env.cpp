#include <gtest/gtest.h>

#include <random>

#include "msglab/env.hpp"

using namespace msglab;

TEST(RecLetter, StrongFrequencyMatchesPrior) {
  RecommendationLetter env;
  std::mt19937_64 seeds(11);
  int strong = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) strong += RecommendationLetter::quality(env.reset(seeds())) == RecommendationLetter::kStrong;
  EXPECT_NEAR(static_cast<double>(strong) / n, 1.0 / 3.0, 0.01);
}

TEST(RecLetter, RewardTable) {
  RecommendationLetter env;
  const auto s = RecommendationLetter::make_state(RecommendationLetter::kStrong);
  const auto w = RecommendationLetter::make_state(RecommendationLetter::kWeak);
  auto r = env.step(s, {RecommendationLetter::kHire});
  EXPECT_EQ(r.reward_sender, 1.0);
  EXPECT_EQ(r.reward_receiver, 1.0);
  r = env.step(w, {RecommendationLetter::kHire});
  EXPECT_EQ(r.reward_sender, 1.0);
  EXPECT_EQ(r.reward_receiver, -1.0);
  for (const auto& st : {s, w}) {
    r = env.step(st, {RecommendationLetter::kNoHire});
    EXPECT_EQ(r.reward_sender, 0.0);
    EXPECT_EQ(r.reward_receiver, 0.0);
  }
}

TEST(RecLetter, ObservationIsEmptyAndSpaces) {
  RecommendationLetter env(4);
  const Spaces sp = env.spaces();
  EXPECT_EQ(sp.state_dim, 2);
  EXPECT_EQ(sp.obs_dim, 0);
  EXPECT_EQ(sp.signal_count, 2);
  EXPECT_EQ(sp.action_count, 2);
  EXPECT_EQ(sp.horizon, 4);
  EXPECT_EQ(env.observe(env.reset(1)).encoding.size(), 0);
}

TEST(RecLetter, StreamEndsAfterLength) {
  RecommendationLetter env(3);
  MsgState s = env.reset(5);
  int steps = 0;
  for (bool done = false; !done; ++steps) {
    const auto r = env.step(s, {RecommendationLetter::kNoHire});
    done = r.done;
    s = r.next;
  }
  EXPECT_EQ(steps, 3);
}

TEST(RecLetter, InvalidActionThrows) {
  RecommendationLetter env;
  EXPECT_THROW(env.step(env.reset(0), {2}), std::out_of_range);
}

TEST(RecLetter, DeterministicGivenSeed) {
  RecommendationLetter a, b;
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(a.reset(s).encoding, b.reset(s).encoding);
}

TEST(Goals, SpacesMatchGridSize) {
  const auto g3 = make_reaching_goals(3);
  Spaces sp = g3->spaces();
  EXPECT_EQ(sp.state_dim, 27);
  EXPECT_EQ(sp.obs_dim, 9);
  EXPECT_EQ(sp.signal_count, 9);
  EXPECT_EQ(sp.action_count, 4);
  EXPECT_EQ(sp.horizon, 50);
  sp = make_reaching_goals(5)->spaces();
  EXPECT_EQ(sp.state_dim, 75);
  EXPECT_EQ(sp.obs_dim, 25);
  EXPECT_EQ(sp.signal_count, 25);
}

TEST(Goals, ResetLayoutValid) {
  ReachingGoals env(ReachingGoalsParams::for_size(3));
  std::vector<int> red_count(9, 0);
  for (std::uint64_t s = 0; s < 9000; ++s) {
    const MsgState st = env.reset(s);
    const auto l = env.layout(st);
    ASSERT_GE(l.receiver, 0);
    ASSERT_LT(l.receiver, 9);
    ASSERT_NE(l.red, l.receiver);
    ASSERT_NE(l.green, l.receiver);
    ASSERT_EQ(st.encoding.sum(), 3.0);
    ++red_count[static_cast<std::size_t>(l.red)];
  }
  for (int c : red_count) EXPECT_NEAR(c / 9000.0, 1.0 / 9.0, 0.02);
}

TEST(Goals, ObservationModes) {
  ReachingGoals env(ReachingGoalsParams::for_size(3));
  const MsgState st = env.make_state({5, 0, 8});
  const auto pos = env.observe(st, ObsMode::PosObs).encoding;
  ASSERT_EQ(pos.size(), 9);
  EXPECT_EQ(pos[5], 1.0);
  EXPECT_EQ(pos.sum(), 1.0);
  const auto none = env.observe(st, ObsMode::NoObs).encoding;
  EXPECT_EQ(none.size(), 9);
  EXPECT_EQ(none.sum(), 0.0);
  const auto full = env.observe(st, ObsMode::FullObs).encoding;
  ASSERT_EQ(full.size(), 18);
  EXPECT_EQ(full[5], 1.0);
  EXPECT_EQ(full[9 + 8], 1.0);
  EXPECT_EQ(full.sum(), 2.0);
}

TEST(Goals, WallClipsMoveButPenaltyApplies) {
  ReachingGoals env(ReachingGoalsParams::for_size(3));
  const MsgState st = env.make_state({0, 8, 4});
  const auto r = env.step(st, {ReachingGoals::kUp});
  EXPECT_EQ(env.layout(r.next).receiver, 0);
  EXPECT_DOUBLE_EQ(r.reward_sender, -5.0 * 4 / 4.0);
  EXPECT_DOUBLE_EQ(r.reward_receiver, -5.0 * 2 / 4.0);
}

TEST(Goals, ReachingGreenPaysReceiverAndRespawns) {
  ReachingGoals env(ReachingGoalsParams::for_size(3));
  env.reset(3);
  const MsgState st = env.make_state({3, 8, 4});
  const auto r = env.step(st, {ReachingGoals::kRight});
  const auto l = env.layout(r.next);
  EXPECT_EQ(l.receiver, 4);
  EXPECT_NE(l.green, 4);
  EXPECT_EQ(l.red, 8);
  EXPECT_DOUBLE_EQ(r.reward_receiver, 20.0 - 5.0 * env.manhattan(4, l.green) / 4.0);
  EXPECT_DOUBLE_EQ(r.reward_sender, -5.0 * 2 / 4.0);
}

TEST(Goals, ReachingRedPaysSender) {
  ReachingGoals env(ReachingGoalsParams::for_size(3));
  env.reset(4);
  const auto r = env.step(env.make_state({1, 2, 6}), {ReachingGoals::kRight});
  EXPECT_GT(r.reward_sender, 10.0);
  EXPECT_NE(env.layout(r.next).red, 2);
}

TEST(Goals, EpisodeEndsAtHorizon) {
  auto env = make_reaching_goals(3);
  MsgState s = env->reset(0);
  int steps = 0;
  for (bool done = false; !done; ++steps) {
    auto r = env->step(s, {steps % 4});
    done = r.done;
    s = r.next;
    const auto l = dynamic_cast<ReachingGoals&>(*env).layout(s);
    ASSERT_NE(l.red, l.receiver);
    ASSERT_NE(l.green, l.receiver);
  }
  EXPECT_EQ(steps, 50);
}

TEST(Goals, InvalidActionThrows) {
  auto env = make_reaching_goals(3);
  EXPECT_THROW(env->step(env->reset(0), {4}), std::out_of_range);
}

TEST(Env, ObsModeParsing) {
  EXPECT_EQ(parse_obs_mode("noobs"), ObsMode::NoObs);
  EXPECT_EQ(parse_obs_mode(to_string(ObsMode::FullObs)), ObsMode::FullObs);
  EXPECT_THROW(parse_obs_mode("xray"), std::invalid_argument);
}
