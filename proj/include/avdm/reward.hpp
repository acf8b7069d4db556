#ifndef AVDM_REWARD_HPP
#define AVDM_REWARD_HPP

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "avdm/sim_types.hpp"

namespace avdm {

enum class RewardForm {
  AdditionRa1,        // h_d*v - d, punishments -100/-80/-50
  MultiplicationRa2,  // v / |(d - h_d*v)*dv|, punishments -100/-80/-50
  NormalizedRa3,      // v' - d', punishments -1/-0.8/-0.5
  Magnified100Ra4,    // 100*(v' - d'), punishments -100/-80/-50
  IntegratedLc        // v' while keeping, 2v' - 0.1*(da+da_cf+da_lf) on a change
};

inline std::string to_string(RewardForm f) {
  switch (f) {
    case RewardForm::AdditionRa1: return "ra1";
    case RewardForm::MultiplicationRa2: return "ra2";
    case RewardForm::NormalizedRa3: return "ra3";
    case RewardForm::Magnified100Ra4: return "ra4";
    default: return "integrated_lc";
  }
}

inline RewardForm reward_form_from_string(const std::string& s) {
  if (s == "ra1") return RewardForm::AdditionRa1;
  if (s == "ra2") return RewardForm::MultiplicationRa2;
  if (s == "ra3") return RewardForm::NormalizedRa3;
  if (s == "ra4") return RewardForm::Magnified100Ra4;
  if (s == "integrated_lc") return RewardForm::IntegratedLc;
  throw std::invalid_argument("unknown reward form: " + s);
}

struct RewardSpec {
  RewardForm form = RewardForm::NormalizedRa3;
  double desired_headway = 2.0;         // h_d [s]
  double gap_norm = 100.0;              // d' = min(d, gap_norm) / gap_norm
  double speed_norm = 80.0 / 3.6;       // v' = v / speed_norm
  double speed_diff_norm = 40.0 / 3.6;  // kept with the other normalizers
  double lc_accel_weight = 0.1;
  double lc_speed_weight = 2.0;
  double epsilon = 1e-3;                // denominator guard for ra2
  bool rejection_precedes_jerk = false; // branch pick when both G and U fire

  void validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("reward: epsilon must be > 0");
    if (gap_norm <= 0.0 || speed_norm <= 0.0 || speed_diff_norm <= 0.0)
      throw std::invalid_argument("reward: normalizers must be > 0");
    if (desired_headway <= 0.0)
      throw std::invalid_argument("reward: desired_headway must be > 0");
  }
};

/// All quantities in SI; flags already classified with their precedence.
struct RewardInput {
  StateFlags flags;
  double gap = 0.0;         // d [m]
  double speed = 0.0;       // v [m/s]
  double speed_diff = 0.0;  // dv [m/s]
  double accel_delta = 0.0; // da [m/s^2]
  bool lane_change_executed = false;
  double follower_delta_current = 0.0;  // da_cf [m/s^2], 0 without a change
  double follower_delta_target = 0.0;   // da_lf [m/s^2], 0 without a change
};

namespace detail {

// Punishment triple (C/R, U/G, L) per form. Normalized forms use the unit
// scale, the others the 100 scale.
struct Punishments {
  double collision;
  double uncomfortable;
  double low_speed;
};

inline Punishments punishments_for(RewardForm form) {
  if (form == RewardForm::NormalizedRa3 || form == RewardForm::IntegratedLc)
    return {-1.0, -0.8, -0.5};
  return {-100.0, -80.0, -50.0};
}

}  // namespace detail

/// One scalar reward per step. Branch selection by flags with precedence
/// C/R > U/G > L > normal; the normal branch depends on the configured form.
/// The normalized gap d' saturates at 1 (gaps beyond gap_norm all look like
/// open road), matching the observation encoding.
inline double reward(const RewardSpec& spec, const RewardInput& in) {
  const auto p = detail::punishments_for(spec.form);
  switch (select_branch(in.flags)) {
    case RewardBranch::CollisionReverse:
      return p.collision;
    case RewardBranch::UncomfortableOrRejected:
      return p.uncomfortable;
    case RewardBranch::LowSpeed:
      return p.low_speed;
    case RewardBranch::Normal:
      break;
  }
  double v_n = in.speed / spec.speed_norm;
  double d_n = std::min(in.gap, spec.gap_norm) / spec.gap_norm;
  switch (spec.form) {
    case RewardForm::AdditionRa1:
      return spec.desired_headway * in.speed - in.gap;
    case RewardForm::MultiplicationRa2: {
      double denom = std::abs((in.gap - spec.desired_headway * in.speed) *
                              in.speed_diff);
      return in.speed / std::max(spec.epsilon, denom);
    }
    case RewardForm::NormalizedRa3:
      return v_n - d_n;
    case RewardForm::Magnified100Ra4:
      return 100.0 * (v_n - d_n);
    case RewardForm::IntegratedLc:
      if (in.lane_change_executed) {
        return spec.lc_speed_weight * v_n -
               spec.lc_accel_weight * (in.accel_delta + in.follower_delta_current +
                                       in.follower_delta_target);
      }
      return v_n;
  }
  throw std::invalid_argument("reward: unknown form");
}

/// Maximum achievable single-step reward in the normal state, for the bounded
/// forms. For the normalized forms this is v'_max - d'_min with d'_min the
/// smallest gap that does not conflict with the desired headway at top speed.
/// For the integrated form it is the sustainable lane-keeping ceiling v' = 1
/// (a single executed change can transiently score up to lc_speed_weight).
inline double reward_upper_bound(const RewardSpec& spec, double max_speed) {
  double v_max_n = max_speed / spec.speed_norm;
  double d_min_n = spec.desired_headway * max_speed / spec.gap_norm;
  switch (spec.form) {
    case RewardForm::NormalizedRa3:
      return v_max_n - d_min_n;
    case RewardForm::Magnified100Ra4:
      return 100.0 * (v_max_n - d_min_n);
    case RewardForm::IntegratedLc:
      return v_max_n;
    default:
      throw std::invalid_argument(
          "reward_upper_bound: form " + to_string(spec.form) + " is unbounded");
  }
}

/// Writes the normal-state reward surface over a (gap, speed) grid as CSV
/// (long format: d,v,reward). Flags are derived from the grid point itself
/// with dv = da = 0.
inline void write_reward_surface(std::ostream& os, const RewardSpec& spec,
                                 double d_max = 120.0, double v_max = 80.0 / 3.6,
                                 double d_step = 2.0, double v_step = 0.5) {
  os << "d,v,reward\n";
  char buf[96];
  for (double d = 0.0; d <= d_max + 1e-9; d += d_step) {
    for (double v = 0.0; v <= v_max + 1e-9; v += v_step) {
      RewardInput in;
      in.flags = compute_flags(d, v, 0.0, 0.0, false);
      in.gap = d;
      in.speed = v;
      double r = reward(spec, in);
      std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.9g\n", d, v, r);
      os << buf;
    }
  }
}

}  // namespace avdm

#endif  // AVDM_REWARD_HPP
