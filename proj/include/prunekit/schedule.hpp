#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>

#include "prunekit/errors.hpp"

namespace prunekit {

/// Family members. The pure-soft modes differ only in alpha0 and ramp
/// convention; HFP hardens everything it prunes; GHFP ramps the hard
/// fraction from lambda_i to lambda_f; SoftAndHard holds it constant.
enum class Mode { SFP, SRFP, ASFP, ASRFP, HFP, GHFP, SoftAndHard };

enum class RateRamp { Cubic, Linear, Constant };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::SFP: return "SFP";
    case Mode::SRFP: return "SRFP";
    case Mode::ASFP: return "ASFP";
    case Mode::ASRFP: return "ASRFP";
    case Mode::HFP: return "HFP";
    case Mode::GHFP: return "GHFP";
    case Mode::SoftAndHard: return "SoftAndHard";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  std::string u;
  for (char c : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "SFP") return Mode::SFP;
  if (u == "SRFP") return Mode::SRFP;
  if (u == "ASFP") return Mode::ASFP;
  if (u == "ASRFP") return Mode::ASRFP;
  if (u == "HFP") return Mode::HFP;
  if (u == "GHFP") return Mode::GHFP;
  if (u == "SOFTANDHARD") return Mode::SoftAndHard;
  throw ConfigError("unknown mode '" + s +
                    "'; known: SFP, SRFP, ASFP, ASRFP, HFP, GHFP, SoftAndHard");
}

inline const char* ramp_name(RateRamp r) {
  switch (r) {
    case RateRamp::Cubic: return "cubic";
    case RateRamp::Linear: return "linear";
    case RateRamp::Constant: return "constant";
  }
  return "?";
}

inline RateRamp ramp_from_name(const std::string& s) {
  if (s == "cubic") return RateRamp::Cubic;
  if (s == "linear") return RateRamp::Linear;
  if (s == "constant") return RateRamp::Constant;
  throw ConfigError("unknown rate ramp '" + s + "'; known: cubic, linear, constant");
}

struct ScheduleConfig {
  Mode mode = Mode::GHFP;
  double alpha0 = 1.0;
  double epsilon = 1e-4;
  double lambda_i = 0.0;
  double lambda_f = 1.0;
  double lambda_const = 0.5;  // SoftAndHard only
  int t_max = 200;
  double goal_rate = 0.0;
  std::map<std::string, double> layer_goals;  // per-layer overrides
  RateRamp rate_ramp = RateRamp::Cubic;

  void validate() const {
    if (t_max < 2) throw ConfigError("schedule: t_max must be >= 2, got " + std::to_string(t_max));
    if (!(alpha0 >= 0.0 && alpha0 <= 1.0))
      throw ConfigError("schedule: alpha0 must be in [0,1], got " + std::to_string(alpha0));
    if (!(epsilon > 0.0))
      throw ConfigError("schedule: epsilon must be > 0, got " + std::to_string(epsilon));
    if (alpha0 > 0.0 && epsilon >= alpha0)
      throw ConfigError("schedule: epsilon must be < alpha0, got epsilon " +
                        std::to_string(epsilon) + ", alpha0 " + std::to_string(alpha0));
    if (!(lambda_i >= 0.0 && lambda_i <= 1.0) || !(lambda_f >= 0.0 && lambda_f <= 1.0))
      throw ConfigError("schedule: lambda_i and lambda_f must be in [0,1]");
    if (lambda_i > lambda_f)
      throw ConfigError("schedule: decreasing hardness (lambda_i " + std::to_string(lambda_i) +
                        " > lambda_f " + std::to_string(lambda_f) + ") is not allowed");
    if (!(lambda_const >= 0.0 && lambda_const <= 1.0))
      throw ConfigError("schedule: lambda_const must be in [0,1]");
    if (!(goal_rate >= 0.0 && goal_rate < 1.0))
      throw ConfigError("schedule: goal_rate must be in [0,1), got " + std::to_string(goal_rate));
    for (const auto& [id, g] : layer_goals)
      if (!(g >= 0.0 && g < 1.0))
        throw ConfigError("schedule: goal rate for '" + id + "' must be in [0,1), got " +
                          std::to_string(g));
  }

  double goal_for(const std::string& layer_id) const {
    auto it = layer_goals.find(layer_id);
    return it != layer_goals.end() ? it->second : goal_rate;
  }

  /// Conventional settings per mode; alpha0 and ramp stay overridable.
  static ScheduleConfig for_mode(Mode m, double goal, int t_max_) {
    ScheduleConfig cfg;
    cfg.mode = m;
    cfg.goal_rate = goal;
    cfg.t_max = t_max_;
    switch (m) {
      case Mode::SFP:
        cfg.alpha0 = 0.0;
        cfg.rate_ramp = RateRamp::Constant;
        break;
      case Mode::SRFP:
        cfg.alpha0 = 1.0;
        cfg.rate_ramp = RateRamp::Constant;
        break;
      case Mode::ASFP:
        cfg.alpha0 = 0.0;
        break;
      case Mode::ASRFP:
        cfg.alpha0 = 1.0;
        break;
      case Mode::HFP:
        cfg.alpha0 = 0.0;
        cfg.lambda_i = cfg.lambda_f = 1.0;
        break;
      case Mode::GHFP:
        break;
      case Mode::SoftAndHard:
        break;
    }
    return cfg;
  }
};

namespace detail {

inline void check_epoch(int t, int t_max) {
  if (t < 0 || t >= t_max)
    throw InvariantError("schedule: epoch " + std::to_string(t) + " outside [0," +
                         std::to_string(t_max) + ")");
}

/// 0 at t=0, 1 at t=t_max-1, cubic in between. Exact at both ends.
inline double cubic_ramp(int t, int t_max) {
  const double r = static_cast<double>(t_max - 1 - t) / static_cast<double>(t_max - 1);
  return 1.0 - r * r * r;
}

}  // namespace detail

/// Decay factor applied to softly pruned filters: alpha0 at t=0, shrinking
/// exponentially so the raw value reaches epsilon at t_max-1, where it is
/// set to exactly 0. Any computed value at or below epsilon snaps to 0.
inline double alpha_schedule(const ScheduleConfig& cfg, int t) {
  detail::check_epoch(t, cfg.t_max);
  if (cfg.alpha0 == 0.0) return 0.0;
  if (t == 0) return cfg.alpha0;
  if (t == cfg.t_max - 1) return 0.0;
  const double exponent = -static_cast<double>(t) / static_cast<double>(cfg.t_max - 1);
  const double a = cfg.alpha0 * std::pow(cfg.alpha0 / cfg.epsilon, exponent);
  return a <= cfg.epsilon ? 0.0 : a;
}

/// Fraction of this epoch's pruned filters treated as hard.
inline double lambda_schedule(const ScheduleConfig& cfg, int t) {
  detail::check_epoch(t, cfg.t_max);
  switch (cfg.mode) {
    case Mode::SFP:
    case Mode::SRFP:
    case Mode::ASFP:
    case Mode::ASRFP:
      return 0.0;
    case Mode::HFP:
      return 1.0;
    case Mode::SoftAndHard:
      return cfg.lambda_const;
    case Mode::GHFP:
      break;
  }
  if (t == 0) return cfg.lambda_i;
  if (t == cfg.t_max - 1) return cfg.lambda_f;
  return cfg.lambda_i + (cfg.lambda_f - cfg.lambda_i) * detail::cubic_ramp(t, cfg.t_max);
}

/// Pruning rate of one layer at epoch t, ramping 0 -> goal (cubic/linear)
/// or pinned at goal (constant).
inline double rate_schedule(const ScheduleConfig& cfg, const std::string& layer_id, int t) {
  detail::check_epoch(t, cfg.t_max);
  const double goal = cfg.goal_for(layer_id);
  switch (cfg.rate_ramp) {
    case RateRamp::Constant:
      return goal;
    case RateRamp::Linear:
      if (t == cfg.t_max - 1) return goal;
      return goal * static_cast<double>(t) / static_cast<double>(cfg.t_max - 1);
    case RateRamp::Cubic:
      if (t == 0) return 0.0;
      if (t == cfg.t_max - 1) return goal;
      return goal * detail::cubic_ramp(t, cfg.t_max);
  }
  return goal;
}

/// Full trajectory as CSV, one row per epoch, %.17g so values round-trip.
inline std::string schedule_csv(const ScheduleConfig& cfg) {
  cfg.validate();
  std::ostringstream out;
  out << "t,alpha,lambda_h,rate\n";
  char row[128];
  for (int t = 0; t < cfg.t_max; ++t) {
    std::snprintf(row, sizeof(row), "%d,%.17g,%.17g,%.17g\n", t, alpha_schedule(cfg, t),
                  lambda_schedule(cfg, t), rate_schedule(cfg, "", t));
    out << row;
  }
  return out.str();
}

}  // namespace prunekit
