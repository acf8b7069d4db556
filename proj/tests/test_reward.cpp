#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "avdm/reward.hpp"
#include "avdm/rng.hpp"

using namespace avdm;

namespace {

RewardInput normal_input(double d, double v, double dv = 0.0, double da = 0.0) {
  RewardInput in;
  in.flags = compute_flags(d, v, dv, da, false);
  in.gap = d;
  in.speed = v;
  in.speed_diff = dv;
  in.accel_delta = da;
  return in;
}

RewardInput flagged(StateFlags f) {
  RewardInput in;
  in.flags = f;
  return in;
}

StateFlags only_collision() {
  StateFlags f;
  f.collision = true;
  return f;
}
StateFlags only_uncomfortable() {
  StateFlags f;
  f.uncomfortable = true;
  return f;
}
StateFlags only_low_speed() {
  StateFlags f;
  f.low_speed = true;
  return f;
}
StateFlags only_rejected() {
  StateFlags f;
  f.lc_rejected = true;
  return f;
}

}  // namespace

TEST(Reward, NormalizedPunishments) {
  RewardSpec s;
  s.form = RewardForm::NormalizedRa3;
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_collision())), -1.0);
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_uncomfortable())), -0.8);
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_low_speed())), -0.5);
}

TEST(Reward, AdditionPunishments) {
  RewardSpec s;
  s.form = RewardForm::AdditionRa1;
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_collision())), -100.0);
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_uncomfortable())), -80.0);
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_low_speed())), -50.0);
}

TEST(Reward, AdditionNormalBranch) {
  RewardSpec s;
  s.form = RewardForm::AdditionRa1;
  // h_d * v - d in SI units
  EXPECT_DOUBLE_EQ(reward(s, normal_input(30.0, 10.0)), 2.0 * 10.0 - 30.0);
}

TEST(Reward, NormalizedMaxMatchesHeadwayComputation) {
  RewardSpec s;
  s.form = RewardForm::NormalizedRa3;
  double v = 80.0 / 3.6;
  double d = 2.0 * 80.0 / 3.6;
  double r = reward(s, normal_input(d, v));
  EXPECT_NEAR(r, 0.5556, 1e-4);
  EXPECT_NEAR(r, 0.56, 0.005);
  // the magnified form is exactly 100x on the same input
  RewardSpec s4 = s;
  s4.form = RewardForm::Magnified100Ra4;
  EXPECT_NEAR(reward(s4, normal_input(d, v)), 55.56, 0.01);
}

TEST(Reward, MultiplicationGuard) {
  RewardSpec s;
  s.form = RewardForm::MultiplicationRa2;
  // denominator vanishes at d = h_d * v and at dv = 0; stays finite
  double r1 = reward(s, normal_input(20.0, 10.0, 0.0));
  EXPECT_TRUE(std::isfinite(r1));
  EXPECT_DOUBLE_EQ(r1, 10.0 / s.epsilon);
  double r2 = reward(s, normal_input(2.0 * 10.0, 10.0, 3.0));
  EXPECT_TRUE(std::isfinite(r2));
  double r3 = reward(s, normal_input(50.0, 10.0, -2.0));
  EXPECT_DOUBLE_EQ(r3, 10.0 / std::abs((50.0 - 20.0) * -2.0));
}

TEST(Reward, ScalingIdentityRa4) {
  RewardSpec s3, s4;
  s3.form = RewardForm::NormalizedRa3;
  s4.form = RewardForm::Magnified100Ra4;
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    RewardInput in = normal_input(rng.uniform(0.0, 300.0), rng.uniform(1.5, 22.2),
                                  rng.uniform(-5.0, 5.0), rng.uniform(0.0, 5.0));
    if (!in.flags.normal) continue;
    EXPECT_DOUBLE_EQ(reward(s4, in), 100.0 * reward(s3, in));
  }
  EXPECT_DOUBLE_EQ(reward(s4, flagged(only_collision())), -100.0);
  EXPECT_DOUBLE_EQ(reward(s4, flagged(only_uncomfortable())), -80.0);
  EXPECT_DOUBLE_EQ(reward(s4, flagged(only_low_speed())), -50.0);
}

TEST(Reward, NormalizedBoundedness) {
  RewardSpec s;
  s.form = RewardForm::NormalizedRa3;
  Rng rng(13);
  for (int i = 0; i < 1000000; ++i) {
    double d = rng.uniform(0.0, 3000.0);
    double v = rng.uniform(0.0, s.speed_norm);
    double dv = rng.uniform(-30.0, 30.0);
    double da = rng.uniform(0.0, 12.0);
    bool rej = rng.uniform() < 0.1;
    RewardInput in;
    in.flags = compute_flags(d, v, dv, da, rej);
    in.gap = d;
    in.speed = v;
    in.speed_diff = dv;
    in.accel_delta = da;
    double r = reward(s, in);
    ASSERT_LE(std::abs(r), 1.0) << "d=" << d << " v=" << v;
  }
}

TEST(Reward, IntegratedLcBranches) {
  RewardSpec s;
  s.form = RewardForm::IntegratedLc;
  // punishments share the normalized scale; G maps with U
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_collision())), -1.0);
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_rejected())), -0.8);
  EXPECT_DOUBLE_EQ(reward(s, flagged(only_low_speed())), -0.5);
  // lane keeping: v'
  RewardInput keep = normal_input(50.0, 11.111111111111111);
  EXPECT_NEAR(reward(s, keep), 0.5, 1e-9);
  // executed change: 2*v' - 0.1*(da + da_cf + da_lf)
  RewardInput lc = normal_input(50.0, 11.111111111111111);
  lc.lane_change_executed = true;
  lc.accel_delta = 1.0;
  lc.follower_delta_current = 0.5;
  lc.follower_delta_target = 0.5;
  EXPECT_NEAR(reward(s, lc), 0.8, 1e-9);
}

TEST(Reward, IntegratedLcMonotonicity) {
  RewardSpec s;
  s.form = RewardForm::IntegratedLc;
  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    RewardInput a = normal_input(rng.uniform(20.0, 120.0), rng.uniform(2.0, 22.0));
    a.lane_change_executed = true;
    a.accel_delta = rng.uniform(0.0, 3.0);
    a.follower_delta_current = rng.uniform(0.0, 3.0);
    a.follower_delta_target = rng.uniform(0.0, 3.0);
    double base = reward(s, a);
    RewardInput b = a;
    b.accel_delta += 0.5;
    EXPECT_LT(reward(s, b), base);
    b = a;
    b.follower_delta_current += 0.5;
    EXPECT_LT(reward(s, b), base);
    b = a;
    b.follower_delta_target += 0.5;
    EXPECT_LT(reward(s, b), base);
    b = a;
    b.speed += 0.5;
    EXPECT_GT(reward(s, b), base);
  }
}

TEST(Reward, UpperBounds) {
  RewardSpec s;
  double vmax = 80.0 / 3.6;
  s.form = RewardForm::NormalizedRa3;
  EXPECT_NEAR(reward_upper_bound(s, vmax), 0.5556, 1e-4);
  s.form = RewardForm::Magnified100Ra4;
  EXPECT_NEAR(reward_upper_bound(s, vmax), 55.56, 1e-2);
  s.form = RewardForm::IntegratedLc;
  EXPECT_DOUBLE_EQ(reward_upper_bound(s, vmax), 1.0);
  s.form = RewardForm::AdditionRa1;
  EXPECT_THROW(reward_upper_bound(s, vmax), std::invalid_argument);
  s.form = RewardForm::MultiplicationRa2;
  EXPECT_THROW(reward_upper_bound(s, vmax), std::invalid_argument);
}

// grid search over the lane-keeping branch: nothing sustainable beats v' = 1
TEST(Reward, IntegratedLcKeepBranchGridMax) {
  RewardSpec s;
  s.form = RewardForm::IntegratedLc;
  double best = -1e9;
  for (double d = 0.0; d <= 200.0; d += 1.0) {
    for (int k = 0; k <= 200; ++k) {
      double v = s.speed_norm * k / 200.0;
      RewardInput in = normal_input(d, v);
      if (!in.flags.normal) continue;
      best = std::max(best, reward(s, in));
    }
  }
  EXPECT_NEAR(best, reward_upper_bound(s, s.speed_norm), 1e-9);
}

TEST(Reward, BranchTotality) {
  // every form maps every flagged input to exactly one finite value
  Rng rng(23);
  for (RewardForm form :
       {RewardForm::AdditionRa1, RewardForm::MultiplicationRa2,
        RewardForm::NormalizedRa3, RewardForm::Magnified100Ra4,
        RewardForm::IntegratedLc}) {
    RewardSpec s;
    s.form = form;
    for (int i = 0; i < 2000; ++i) {
      RewardInput in;
      in.flags = compute_flags(rng.uniform(-2.0, 150.0), rng.uniform(-1.0, 22.2),
                               rng.uniform(-10.0, 10.0), rng.uniform(0.0, 8.0),
                               rng.uniform() < 0.3);
      in.gap = std::abs(rng.uniform(-2.0, 150.0));
      in.speed = rng.uniform(0.0, 22.2);
      in.speed_diff = rng.uniform(-10.0, 10.0);
      in.accel_delta = rng.uniform(0.0, 8.0);
      in.lane_change_executed = rng.uniform() < 0.5;
      EXPECT_TRUE(std::isfinite(reward(s, in)));
    }
  }
}

TEST(Reward, SurfaceCsvDeterministic) {
  RewardSpec s;
  s.form = RewardForm::NormalizedRa3;
  std::ostringstream a, b;
  write_reward_surface(a, s, 40.0, 10.0, 10.0, 2.5);
  write_reward_surface(b, s, 40.0, 10.0, 10.0, 2.5);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_TRUE(a.str().rfind("d,v,reward\n", 0) == 0);
}

TEST(Reward, SpecValidation) {
  RewardSpec s;
  s.epsilon = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}
