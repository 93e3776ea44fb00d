#include <gtest/gtest.h>

#include <string>

#include "prunekit/schedule.hpp"

using namespace prunekit;

namespace {

// Direct single-expression evaluations, frozen from a separate calculator:
//   alpha(t)  = a0 * (a0/eps)^(-t/(t_max-1))
//   cubic(t)  = 1 - (1 - t/(t_max-1))^3
constexpr double kAlphaMid200 = 0.0097712415353465015;  // t=100, a0=1, eps=1e-4
constexpr double kAlphaMid40 = 0.0088862381627434067;   // t=20,  a0=1, eps=1e-4
constexpr double kAlphaHalfT1 = 0.40190612016226118;    // t=1, a0=0.5, eps=1e-4, t_max=40
constexpr double kCubicMid200 = 0.87687496851444924;    // t=100
constexpr double kCubicMid40 = 0.88437094354254109;     // t=20
constexpr double kRateMid200 = 0.35074998740577973;     // 0.4 * cubic(100, 200)
constexpr double kRateMid40 = 0.35374837741701648;      // 0.4 * cubic(20, 40)

ScheduleConfig ghfp(int t_max, double goal = 0.4) {
  return ScheduleConfig::for_mode(Mode::GHFP, goal, t_max);
}

// ==========================================================================
// alpha decay
// ==========================================================================

TEST(AlphaSchedule, BoundariesAreExact) {
  for (int t_max : {2, 40, 200}) {
    ScheduleConfig cfg = ghfp(t_max);
    EXPECT_EQ(alpha_schedule(cfg, 0), 1.0);
    EXPECT_EQ(alpha_schedule(cfg, t_max - 1), 0.0);
    cfg.alpha0 = 0.5;
    EXPECT_EQ(alpha_schedule(cfg, 0), 0.5);
    EXPECT_EQ(alpha_schedule(cfg, t_max - 1), 0.0);
  }
}

TEST(AlphaSchedule, MidpointsMatchDirectEvaluation) {
  EXPECT_NEAR(alpha_schedule(ghfp(200), 100), kAlphaMid200, 1e-12);
  EXPECT_NEAR(alpha_schedule(ghfp(40), 20), kAlphaMid40, 1e-12);
  ScheduleConfig half = ghfp(40);
  half.alpha0 = 0.5;
  EXPECT_NEAR(alpha_schedule(half, 1), kAlphaHalfT1, 1e-12);
}

TEST(AlphaSchedule, ZeroAlpha0StaysZero) {
  const ScheduleConfig cfg = ScheduleConfig::for_mode(Mode::SFP, 0.3, 40);
  for (int t = 0; t < 40; ++t) EXPECT_EQ(alpha_schedule(cfg, t), 0.0);
}

TEST(AlphaSchedule, MonotoneNonIncreasing) {
  for (int t_max : {2, 40, 200}) {
    const ScheduleConfig cfg = ghfp(t_max);
    for (int t = 0; t + 1 < t_max; ++t)
      EXPECT_LE(alpha_schedule(cfg, t + 1), alpha_schedule(cfg, t)) << "t_max " << t_max;
  }
}

TEST(AlphaSchedule, SnapsOnlyInsideEpsilon) {
  // One step before the end the raw value still exceeds epsilon; the final
  // epoch lands exactly on it and snaps.
  const ScheduleConfig cfg = ghfp(200);
  EXPECT_GT(alpha_schedule(cfg, 198), 0.0);
  EXPECT_LT(alpha_schedule(cfg, 198), 2e-4);
  EXPECT_EQ(alpha_schedule(cfg, 199), 0.0);
}

TEST(AlphaSchedule, RejectsEpochOutOfRange) {
  const ScheduleConfig cfg = ghfp(40);
  EXPECT_THROW(alpha_schedule(cfg, -1), InvariantError);
  EXPECT_THROW(alpha_schedule(cfg, 40), InvariantError);
}

// ==========================================================================
// hardness ramp
// ==========================================================================

TEST(LambdaSchedule, SoftModesPinZero) {
  for (Mode m : {Mode::SFP, Mode::SRFP, Mode::ASFP, Mode::ASRFP}) {
    const ScheduleConfig cfg = ScheduleConfig::for_mode(m, 0.3, 40);
    for (int t = 0; t < 40; ++t) EXPECT_EQ(lambda_schedule(cfg, t), 0.0) << mode_name(m);
  }
}

TEST(LambdaSchedule, HardModePinsOne) {
  const ScheduleConfig cfg = ScheduleConfig::for_mode(Mode::HFP, 0.3, 40);
  for (int t = 0; t < 40; ++t) EXPECT_EQ(lambda_schedule(cfg, t), 1.0);
}

TEST(LambdaSchedule, SoftAndHardPinsConstant) {
  ScheduleConfig cfg = ScheduleConfig::for_mode(Mode::SoftAndHard, 0.3, 40);
  cfg.lambda_const = 0.25;
  for (int t = 0; t < 40; ++t) EXPECT_EQ(lambda_schedule(cfg, t), 0.25);
}

TEST(LambdaSchedule, GhfpBoundariesAndMidpoints) {
  for (int t_max : {2, 40, 200}) {
    const ScheduleConfig cfg = ghfp(t_max);
    EXPECT_EQ(lambda_schedule(cfg, 0), 0.0);
    EXPECT_EQ(lambda_schedule(cfg, t_max - 1), 1.0);
  }
  EXPECT_NEAR(lambda_schedule(ghfp(200), 100), kCubicMid200, 1e-12);
  EXPECT_NEAR(lambda_schedule(ghfp(40), 20), kCubicMid40, 1e-12);
  ScheduleConfig partial = ghfp(40);
  partial.lambda_i = 0.2;
  partial.lambda_f = 0.8;
  EXPECT_EQ(lambda_schedule(partial, 0), 0.2);
  EXPECT_EQ(lambda_schedule(partial, 39), 0.8);
  EXPECT_NEAR(lambda_schedule(partial, 20), 0.2 + 0.6 * kCubicMid40, 1e-12);
}

TEST(LambdaSchedule, MonotoneNonDecreasing) {
  for (int t_max : {2, 40, 200}) {
    const ScheduleConfig cfg = ghfp(t_max);
    for (int t = 0; t + 1 < t_max; ++t)
      EXPECT_GE(lambda_schedule(cfg, t + 1), lambda_schedule(cfg, t));
  }
}

// ==========================================================================
// rate ramp
// ==========================================================================

TEST(RateSchedule, ConstantHoldsGoal) {
  const ScheduleConfig cfg = ScheduleConfig::for_mode(Mode::SFP, 0.3, 40);
  ASSERT_EQ(cfg.rate_ramp, RateRamp::Constant);
  for (int t = 0; t < 40; ++t) EXPECT_EQ(rate_schedule(cfg, "any", t), 0.3);
}

TEST(RateSchedule, LinearRamp) {
  ScheduleConfig cfg = ghfp(40);
  cfg.rate_ramp = RateRamp::Linear;
  EXPECT_EQ(rate_schedule(cfg, "x", 0), 0.0);
  EXPECT_EQ(rate_schedule(cfg, "x", 39), 0.4);
  EXPECT_NEAR(rate_schedule(cfg, "x", 13), 0.13333333333333333, 1e-12);
}

TEST(RateSchedule, CubicRamp) {
  for (int t_max : {2, 40, 200}) {
    const ScheduleConfig cfg = ghfp(t_max);
    ASSERT_EQ(cfg.rate_ramp, RateRamp::Cubic);
    EXPECT_EQ(rate_schedule(cfg, "x", 0), 0.0);
    EXPECT_EQ(rate_schedule(cfg, "x", t_max - 1), 0.4);
  }
  EXPECT_NEAR(rate_schedule(ghfp(200), "x", 100), kRateMid200, 1e-12);
  EXPECT_NEAR(rate_schedule(ghfp(40), "x", 20), kRateMid40, 1e-12);
}

TEST(RateSchedule, MonotoneNonDecreasing) {
  for (int t_max : {2, 40, 200}) {
    for (RateRamp ramp : {RateRamp::Cubic, RateRamp::Linear, RateRamp::Constant}) {
      ScheduleConfig cfg = ghfp(t_max);
      cfg.rate_ramp = ramp;
      for (int t = 0; t + 1 < t_max; ++t)
        EXPECT_GE(rate_schedule(cfg, "x", t + 1), rate_schedule(cfg, "x", t));
    }
  }
}

TEST(RateSchedule, PerLayerGoalsOverrideGlobal) {
  ScheduleConfig cfg = ghfp(40, 0.3);
  cfg.layer_goals["conv2"] = 0.6;
  EXPECT_EQ(rate_schedule(cfg, "conv2", 39), 0.6);
  EXPECT_EQ(rate_schedule(cfg, "conv1", 39), 0.3);
}

// ==========================================================================
// config plumbing
// ==========================================================================

TEST(ScheduleConfig, ValidationBounds) {
  EXPECT_NO_THROW(ghfp(2).validate());
  ScheduleConfig bad = ghfp(1);
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ghfp(40);
  bad.alpha0 = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ghfp(40);
  bad.epsilon = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ghfp(40);
  bad.epsilon = 1.0;  // must stay below alpha0
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ghfp(40);
  bad.lambda_i = 0.8;
  bad.lambda_f = 0.2;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ghfp(40);
  bad.goal_rate = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ghfp(40);
  bad.layer_goals["conv1"] = -0.2;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ScheduleConfig, ModeNamesRoundTrip) {
  for (Mode m : {Mode::SFP, Mode::SRFP, Mode::ASFP, Mode::ASRFP, Mode::HFP, Mode::GHFP,
                 Mode::SoftAndHard}) {
    EXPECT_EQ(mode_from_name(mode_name(m)), m);
  }
  EXPECT_EQ(mode_from_name("ghfp"), Mode::GHFP);
  EXPECT_THROW(mode_from_name("banana"), ConfigError);
}

TEST(ScheduleCsv, HeaderAndRowCount) {
  const std::string csv = schedule_csv(ghfp(40));
  EXPECT_EQ(csv.rfind("t,alpha,lambda_h,rate\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
  EXPECT_NE(csv.find("\n0,1,0,0\n"), std::string::npos);
  EXPECT_NE(csv.find("\n39,0,1,"), std::string::npos);
  EXPECT_EQ(schedule_csv(ghfp(40)), csv);
}

}  // namespace
