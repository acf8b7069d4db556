#ifndef AVDM_SIM_TYPES_HPP
#define AVDM_SIM_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace avdm {

enum class ObsMode { CF, LC };

inline std::string to_string(ObsMode m) { return m == ObsMode::CF ? "CF" : "LC"; }

inline ObsMode obs_mode_from_string(const std::string& s) {
  if (s == "CF") return ObsMode::CF;
  if (s == "LC") return ObsMode::LC;
  throw std::invalid_argument("unknown observation mode: " + s);
}

enum class LcDecision { LLC, LK, RLC };

inline std::string to_string(LcDecision d) {
  switch (d) {
    case LcDecision::LLC: return "LLC";
    case LcDecision::LK: return "LK";
    default: return "RLC";
  }
}

inline LcDecision lc_decision_from_string(const std::string& s) {
  if (s == "LLC") return LcDecision::LLC;
  if (s == "LK") return LcDecision::LK;
  if (s == "RLC") return LcDecision::RLC;
  throw std::invalid_argument("unknown lane-change decision: " + s);
}

struct SimConfig {
  int lane_count = 1;                   // 1 (CF scene) or 3 (LC scene)
  double road_length = 2000.0;          // [m]
  double time_step = 0.1;               // [s]
  double warmup = 30.0;                 // background-only lead-in [s]
  double inflow_per_lane = 700.0;       // [veh/h/lane], 3-lane scene
  double desired_speed = 80.0 / 3.6;    // road speed cap for the agent [m/s]
  double lc_duration = 2.0;             // agent lane-change maneuver [s]
  double vehicle_length = 5.0;          // [m]
  double accel_min = -4.0;              // agent command bounds [m/s^2]
  double accel_max = 3.0;
  double lc_gap_buffer = 0.5;           // cut-in time buffer for the gap check [s]
  ObsMode observation = ObsMode::CF;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (lane_count != 1 && lane_count != 3)
      throw std::invalid_argument("sim: lane_count must be 1 or 3");
    if (road_length <= 0.0)
      throw std::invalid_argument("sim: road_length must be positive");
    if (time_step <= 0.0 || time_step > 1.0)
      throw std::invalid_argument("sim: time_step must be in (0, 1]");
    if (warmup < 0.0) throw std::invalid_argument("sim: warmup must be >= 0");
    if (inflow_per_lane < 0.0)
      throw std::invalid_argument("sim: inflow_per_lane must be >= 0");
    if (desired_speed <= 0.0)
      throw std::invalid_argument("sim: desired_speed must be positive");
    if (lc_duration <= 0.0)
      throw std::invalid_argument("sim: lc_duration must be positive");
    if (vehicle_length <= 0.0)
      throw std::invalid_argument("sim: vehicle_length must be positive");
    if (accel_min >= accel_max)
      throw std::invalid_argument("sim: accel_min must be below accel_max");
    if (observation == ObsMode::LC && lane_count == 1)
      throw std::invalid_argument("sim: LC observation requires 3 lanes");
  }
};

struct VehicleState {
  int id = 0;
  double position = 0.0;        // longitudinal, meters from road start
  int lane = 0;                 // 0 = rightmost
  double lateral_offset = 0.0;  // lane-change progress in [0,1], 0 when keeping
  double speed = 0.0;           // [m/s]
  double accel = 0.0;           // [m/s^2]
  double prev_accel = 0.0;      // previous-step acceleration
  bool is_agent = false;
};

// Reward-branch selectors (Table-style state classification).
struct StateFlags {
  bool collision = false;      // C: net gap < 0
  bool low_speed = false;      // L: d > 15 m, v < 1 m/s, dv < 0
  bool uncomfortable = false;  // U: |da| > 5.6 m/s^2
  bool reverse = false;        // R: v < 0
  bool lc_rejected = false;    // G: lane change refused, gap too small
  bool normal = false;         // O: none of the above
};

// Classification thresholds, SI units throughout.
inline constexpr double kLowSpeedGap = 15.0;     // [m]
inline constexpr double kLowSpeedLimit = 1.0;    // [m/s]
inline constexpr double kJerkThreshold = 5.6;    // [m/s^2]

inline StateFlags compute_flags(double d, double v, double dv, double da,
                                bool lc_rejected) {
  StateFlags f;
  f.collision = d < 0.0;
  f.low_speed = d > kLowSpeedGap && v < kLowSpeedLimit && dv < 0.0;
  f.uncomfortable = da > kJerkThreshold;
  f.reverse = v < 0.0;
  f.lc_rejected = lc_rejected;
  f.normal = !(f.collision || f.low_speed || f.uncomfortable || f.reverse ||
               f.lc_rejected);
  return f;
}

// Reward branch with precedence C/R > U/G > L > O.
enum class RewardBranch { CollisionReverse, UncomfortableOrRejected, LowSpeed, Normal };

inline RewardBranch select_branch(const StateFlags& f) {
  if (f.collision || f.reverse) return RewardBranch::CollisionReverse;
  if (f.uncomfortable || f.lc_rejected) return RewardBranch::UncomfortableOrRejected;
  if (f.low_speed) return RewardBranch::LowSpeed;
  return RewardBranch::Normal;
}

inline char branch_letter(const StateFlags& f) {
  switch (select_branch(f)) {
    case RewardBranch::CollisionReverse: return f.collision ? 'C' : 'R';
    case RewardBranch::UncomfortableOrRejected: return f.uncomfortable ? 'U' : 'G';
    case RewardBranch::LowSpeed: return 'L';
    default: return 'O';
  }
}

// Observation normalization constants (Table-style, converted to SI once).
inline constexpr double kSpeedNorm = 80.0 / 3.6;      // 80 km/h
inline constexpr double kSpeedDiffNorm = 40.0 / 3.6;  // 40 km/h
inline constexpr double kGapNorm = 100.0;             // [m]
// Net gap reported when no relevant leader exists; far enough that it is
// indistinguishable from open road after normalization.
inline constexpr double kNoLeaderGap = 1000.0;        // [m]

using Observation = std::vector<double>;

inline constexpr int kCfObservationSize = 4;
inline constexpr int kLcObservationSize = 2 + 6 * 3;

inline int observation_size(ObsMode mode) {
  return mode == ObsMode::CF ? kCfObservationSize : kLcObservationSize;
}

struct AgentAction {
  double acceleration = 0.0;            // [m/s^2], clamped to config bounds
  LcDecision lc = LcDecision::LK;
};

enum class DoneReason { None, Collision, UnreasonableStop, RoadEnd, Reverse };

inline std::string to_string(DoneReason r) {
  switch (r) {
    case DoneReason::Collision: return "Collision";
    case DoneReason::UnreasonableStop: return "UnreasonableStop";
    case DoneReason::RoadEnd: return "RoadEnd";
    case DoneReason::Reverse: return "Reverse";
    default: return "None";
  }
}

inline DoneReason done_reason_from_string(const std::string& s) {
  if (s == "Collision") return DoneReason::Collision;
  if (s == "UnreasonableStop") return DoneReason::UnreasonableStop;
  if (s == "RoadEnd") return DoneReason::RoadEnd;
  if (s == "Reverse") return DoneReason::Reverse;
  if (s == "None") return DoneReason::None;
  throw std::invalid_argument("unknown done reason: " + s);
}

// Unnormalized per-step measurements backing flags and rewards.
struct RawMeasurements {
  double gap = kNoLeaderGap;   // net gap to the relevant leader [m]
  double speed = 0.0;          // agent speed [m/s]
  double speed_diff = 0.0;     // v - v_lead [m/s], 0 when no leader
  double accel_delta = 0.0;    // |a_t - a_{t-1}| of the agent [m/s^2]
  double follower_delta_current = 0.0;  // follower |accel increment| on source lane
  double follower_delta_target = 0.0;   // follower |accel increment| on target lane
};

// Lane-change bookkeeping for the step that carried an LC instruction.
struct LcStepInfo {
  bool instruction = false;   // a non-LK decision was considered this step
  bool accepted = false;      // gap check passed, maneuver started
  bool completed = false;     // a running maneuver finished this step
  double lead_headway = 0.0;  // target-lane lead time headway at acceptance [s]
  double lag_headway = 0.0;   // target-lane lag time headway at acceptance [s]
};

struct StepResult {
  Observation observation;
  StateFlags flags;
  bool episode_done = false;
  DoneReason done_reason = DoneReason::None;
  RawMeasurements raw;
  LcStepInfo lc;
};

}  // namespace avdm

#endif  // AVDM_SIM_TYPES_HPP
