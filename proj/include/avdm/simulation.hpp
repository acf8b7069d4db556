#ifndef AVDM_SIMULATION_HPP
#define AVDM_SIMULATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "avdm/idm.hpp"
#include "avdm/mobil.hpp"
#include "avdm/rng.hpp"
#include "avdm/sim_types.hpp"

namespace avdm {

/// Deterministic, seedable freeway microsimulation.
///
/// Two scenes: a single-lane car-following scene with one IDM leader whose
/// desired speed is resampled on a seeded schedule, and a three-lane scene
/// with seeded Poisson inflow where background vehicles follow IDM and change
/// lanes with MOBIL. The agent vehicle is driven externally through step().
///
/// One instance is single-threaded; run one instance per seed for parallel
/// rollouts.
class Simulation {
 public:
  Simulation(SimConfig cfg, IdmParams idm = IdmParams{},
             MobilParams mobil = MobilParams{})
      : cfg_(cfg), idm_(idm), mobil_(mobil) {
    cfg_.validate();
    idm_.validate();
    mobil_.validate();
  }

  /// Advances `warmup` seconds of background traffic, inserts the agent at
  /// the road start and returns the initial step result. Identical
  /// (config, seed) pairs yield bit-identical episodes.
  StepResult reset(std::uint64_t seed) {
    reset_background(seed);
    insert_agent();
    // termination is evaluated from the first step() on
    StepResult r = make_step_result(LcStepInfo{}, /*da=*/0.0, false, 0.0, 0.0,
                                    agent_leader(), /*initial=*/true);
    write_trajectory(r.flags);
    return r;
  }

  /// Warmup without an agent. Used together with background_step() to drive
  /// agent-free traffic.
  void reset_background(std::uint64_t seed) {
    vehicles_.clear();
    agent_idx_ = -1;
    sim_time_ = 0.0;
    step_index_ = 0;
    insertion_count_ = 0;
    next_id_ = 0;
    done_ = false;
    done_reason_ = DoneReason::None;
    lc_active_ = false;
    arrivals_rng_.emplace(mix_seed(seed, 1));
    leader_rng_.emplace(mix_seed(seed, 2));
    agent_rng_.emplace(mix_seed(seed, 3));

    if (cfg_.lane_count == 1) {
      spawn_cf_leader();
    } else {
      pending_.assign(cfg_.lane_count, 0);
      next_arrival_.assign(cfg_.lane_count, 0.0);
      for (int l = 0; l < cfg_.lane_count; ++l) {
        next_arrival_[l] = arrivals_rng_->exponential(arrival_rate());
      }
    }
    int warmup_steps = static_cast<int>(std::llround(cfg_.warmup / cfg_.time_step));
    for (int i = 0; i < warmup_steps; ++i) background_step();
  }

  /// One background-only step (no agent present or agent ignored must not be
  /// the case: only valid before insert).
  void background_step() {
    if (agent_idx_ >= 0)
      throw std::logic_error("background_step: agent already inserted");
    sim_time_ += cfg_.time_step;
    advance_world(nullptr);
  }

  StepResult step(const AgentAction& action) {
    if (agent_idx_ < 0) throw std::logic_error("step before reset");
    if (done_) throw std::logic_error("step after episode end");
    ++step_index_;
    sim_time_ += cfg_.time_step;

    for (auto& v : vehicles_) v.st.prev_accel = v.st.accel;

    // Lane-change instruction handling, evaluated on the pre-step state.
    // Instructions issued while a maneuver is running are swallowed; in the
    // single-lane scene the decision is fixed to lane keeping.
    LcStepInfo lc;
    bool rejected = false;
    int follower_current = -1;
    int follower_target = -1;
    if (cfg_.lane_count > 1 && !lc_active_ && action.lc != LcDecision::LK) {
      lc.instruction = true;
      int dir = action.lc == LcDecision::LLC ? +1 : -1;
      int target = vehicles_[agent_idx_].st.lane + dir;
      if (target < 0 || target >= cfg_.lane_count) {
        rejected = true;
      } else if (gap_check(target, lc.lead_headway, lc.lag_headway)) {
        lc.accepted = true;
        lc_active_ = true;
        lc_target_ = target;
        lc_progress_ = 0;
        lc_total_ = static_cast<int>(std::ceil(cfg_.lc_duration / cfg_.time_step));
        follower_current =
            follower_on_lane(vehicles_[agent_idx_].st.lane, agent_idx_);
        follower_target = follower_on_lane(lc_target_, agent_idx_);
      } else {
        rejected = true;
      }
    }
    int fc_id = follower_current >= 0 ? vehicles_[follower_current].st.id : -1;
    int ft_id = follower_target >= 0 ? vehicles_[follower_target].st.id : -1;

    double a_cmd = std::clamp(action.acceleration, cfg_.accel_min, cfg_.accel_max);
    if (cfg_.lane_count > 1) apply_mobil();
    // The gap is measured against the leader chosen before integration so a
    // pass-through within one step still registers as a collision.
    int ref_idx = agent_leader();
    int ref_leader_id = ref_idx >= 0 ? vehicles_[ref_idx].st.id : -1;
    compute_accels(&a_cmd);
    integrate(&a_cmd);
    remove_departed();
    if (cfg_.lane_count > 1) process_arrivals();

    // Lateral progress of a running maneuver: offset rises linearly to 1,
    // then the lane index updates and the offset resets.
    if (lc_active_) {
      ++lc_progress_;
      ag2().st.lateral_offset =
          static_cast<double>(lc_progress_) / static_cast<double>(lc_total_);
      if (lc_progress_ >= lc_total_) {
        ag2().st.lane = lc_target_;
        ag2().st.lateral_offset = 0.0;
        lc_active_ = false;
        lc.completed = true;
      }
    }

    double da_cf = 0.0, da_lf = 0.0;
    if (lc.accepted) {
      da_cf = follower_accel_delta(fc_id);
      da_lf = follower_accel_delta(ft_id);
    }
    double da = std::abs(ag2().st.accel - ag2().st.prev_accel);
    StepResult r = make_step_result(lc, da, rejected, da_cf, da_lf,
                                    index_of(ref_leader_id), /*initial=*/false);
    write_trajectory(r.flags);
    if (r.episode_done) {
      done_ = true;
      done_reason_ = r.done_reason;
    }
    return r;
  }

  Observation observe(ObsMode mode) const {
    if (agent_idx_ < 0) throw std::logic_error("observe before reset");
    if (mode == ObsMode::LC && cfg_.lane_count == 1)
      throw std::invalid_argument("LC observation requires a 3-lane scene");
    return mode == ObsMode::CF ? observe_cf() : observe_lc();
  }

  /// Replaces the whole scene with the given vehicle states (exactly one
  /// entry must be the agent). Intended for fixtures and offline tooling.
  void load_scene(const std::vector<VehicleState>& scene) {
    vehicles_.clear();
    agent_idx_ = -1;
    done_ = false;
    done_reason_ = DoneReason::None;
    lc_active_ = false;
    sim_time_ = 0.0;
    step_index_ = 0;
    if (!arrivals_rng_) {
      arrivals_rng_.emplace(mix_seed(0, 1));
      leader_rng_.emplace(mix_seed(0, 2));
      agent_rng_.emplace(mix_seed(0, 3));
      if (cfg_.lane_count > 1) {
        pending_.assign(cfg_.lane_count, 0);
        next_arrival_.assign(cfg_.lane_count, 1e18);
      }
    }
    for (const auto& s : scene) {
      Veh v;
      v.st = s;
      v.v0 = cfg_.desired_speed;
      v.cooldown = 0.0;
      if (s.is_agent) {
        if (agent_idx_ >= 0) throw std::invalid_argument("load_scene: two agents");
        agent_idx_ = static_cast<int>(vehicles_.size());
      }
      next_id_ = std::max(next_id_, s.id + 1);
      vehicles_.push_back(v);
    }
    if (agent_idx_ < 0) throw std::invalid_argument("load_scene: no agent");
  }

  std::vector<VehicleState> vehicles() const {
    std::vector<VehicleState> out;
    out.reserve(vehicles_.size());
    for (const auto& v : vehicles_) out.push_back(v.st);
    return out;
  }

  const VehicleState& agent() const {
    if (agent_idx_ < 0) throw std::logic_error("no agent inserted");
    return vehicles_[agent_idx_].st;
  }

  bool episode_done() const { return done_; }
  DoneReason done_reason() const { return done_reason_; }
  int insertion_count() const { return insertion_count_; }
  int step_index() const { return step_index_; }
  double sim_time() const { return sim_time_; }
  const SimConfig& config() const { return cfg_; }
  const IdmParams& idm_params() const { return idm_; }
  bool lane_change_active() const { return lc_active_; }

  /// Optional CSV sink receiving one row per vehicle per step:
  /// step,vehicle_id,lane,x,v,a,flag
  void set_trajectory_sink(std::ostream* sink) {
    trajectory_ = sink;
    if (trajectory_) *trajectory_ << "step,vehicle_id,lane,x,v,a,flag\n";
  }

 private:
  struct Veh {
    VehicleState st;
    double v0 = 0.0;        // per-vehicle desired speed (background)
    double cooldown = 0.0;  // MOBIL cooldown timer [s]
    double profile_until = 0.0;  // CF-leader: next desired-speed resample time
  };

  Veh& ag2() { return vehicles_[agent_idx_]; }
  const Veh& ag2() const { return vehicles_[agent_idx_]; }

  double arrival_rate() const { return cfg_.inflow_per_lane / 3600.0; }

  void spawn_cf_leader() {
    Veh v;
    v.st.id = next_id_++;
    v.st.position = 0.0;
    v.st.lane = 0;
    v.v0 = leader_rng_->uniform(5.0, cfg_.desired_speed);
    v.st.speed = v.v0;
    v.profile_until = sim_time_ + leader_rng_->uniform(20.0, 60.0);
    vehicles_.push_back(v);
    ++insertion_count_;
  }

  void insert_agent() {
    int lane = 0;
    if (cfg_.lane_count > 1) {
      lane = static_cast<int>(agent_rng_->below(cfg_.lane_count));
      if (entry_gap(lane) < idm_.min_gap) {
        double best = -1e18;
        for (int l = 0; l < cfg_.lane_count; ++l) {
          double g = entry_gap(l);
          if (g > best) {
            best = g;
            lane = l;
          }
        }
      }
    }
    Veh v;
    v.st.id = next_id_++;
    v.st.position = 0.0;
    v.st.lane = lane;
    v.st.is_agent = true;
    double v_init = agent_rng_->uniform(0.0, cfg_.desired_speed);
    double gap = entry_gap(lane);
    if (gap < kNoLeaderGap) {
      // cap so that emergency braking can always avoid the entry leader
      double safe = std::sqrt(std::max(0.0, 2.0 * idm_.emergency_decel *
                                                std::max(0.0, gap - idm_.min_gap)));
      v_init = std::min(v_init, safe);
    }
    v.st.speed = v_init;
    v.v0 = cfg_.desired_speed;
    agent_idx_ = static_cast<int>(vehicles_.size());
    vehicles_.push_back(v);
  }

  double entry_gap(int lane) const {
    double nearest = 1e18;
    for (const auto& v : vehicles_) {
      if (!occupies(v, lane)) continue;
      nearest = std::min(nearest, v.st.position);
    }
    if (nearest > 1e17) return kNoLeaderGap;
    return nearest - cfg_.vehicle_length;
  }

  bool occupies(const Veh& v, int lane) const {
    if (v.st.lane == lane) return true;
    if (v.st.is_agent && lc_active_ && lc_target_ == lane) return true;
    return false;
  }

  // Total longitudinal order even at exactly equal positions: the smaller id
  // counts as being ahead, so co-located vehicles always see each other.
  bool is_ahead(int j, int i) const {
    double dx = vehicles_[j].st.position - vehicles_[i].st.position;
    if (dx != 0.0) return dx > 0.0;
    return vehicles_[j].st.id < vehicles_[i].st.id;
  }

  // Nearest vehicle ahead of index `self` on `lane`; -1 if none.
  int leader_on_lane(int lane, int self) const {
    int best = -1;
    for (int j = 0; j < static_cast<int>(vehicles_.size()); ++j) {
      if (j == self || !occupies(vehicles_[j], lane)) continue;
      if (!is_ahead(j, self)) continue;
      if (best < 0 || is_ahead(best, j)) best = j;
    }
    return best;
  }

  int follower_on_lane(int lane, int self) const {
    int best = -1;
    for (int j = 0; j < static_cast<int>(vehicles_.size()); ++j) {
      if (j == self || !occupies(vehicles_[j], lane)) continue;
      if (is_ahead(j, self)) continue;
      if (best < 0 || is_ahead(j, best)) best = j;
    }
    return best;
  }

  double net_gap(int ahead, int behind) const {
    return vehicles_[ahead].st.position - vehicles_[behind].st.position -
           cfg_.vehicle_length;
  }

  bool gap_check(int target, double& lead_headway, double& lag_headway) const {
    const auto& ag = vehicles_[agent_idx_];
    int lead = leader_on_lane(target, agent_idx_);
    int lag = follower_on_lane(target, agent_idx_);
    double lead_gap = lead >= 0 ? net_gap(lead, agent_idx_) : kNoLeaderGap;
    double lag_gap = lag >= 0 ? net_gap(agent_idx_, lag) : kNoLeaderGap;
    double lag_speed = lag >= 0 ? vehicles_[lag].st.speed : 0.0;
    bool ok = lead_gap >= idm_.min_gap + ag.st.speed * cfg_.lc_gap_buffer &&
              lag_gap >= idm_.min_gap + lag_speed * cfg_.lc_gap_buffer;
    if (ok) {
      lead_headway = std::min(lead_gap / std::max(ag.st.speed, 0.1), 99.9);
      lag_headway = std::min(lag_gap / std::max(lag_speed, 0.1), 99.9);
    }
    return ok;
  }

  double follower_accel_delta(int vehicle_id) const {
    if (vehicle_id < 0) return 0.0;
    for (const auto& v : vehicles_) {
      if (v.st.id == vehicle_id)
        return std::abs(v.st.accel - v.st.prev_accel);
    }
    return 0.0;
  }

  // One synchronous world step without an agent command (warmup and
  // background-only runs).
  void advance_world(const double* agent_cmd) {
    if (cfg_.lane_count > 1) apply_mobil();
    compute_accels(agent_cmd);
    integrate(agent_cmd);
    remove_departed();
    if (cfg_.lane_count > 1) process_arrivals();
  }

  // Accelerations for every vehicle from the current (pre-integration) state.
  void compute_accels(const double* agent_cmd) {
    for (int i = 0; i < static_cast<int>(vehicles_.size()); ++i) {
      Veh& v = vehicles_[i];
      if (v.st.is_agent) {
        v.st.accel = agent_cmd ? *agent_cmd : 0.0;
        continue;
      }
      v.st.prev_accel = v.st.accel;
      v.cooldown = std::max(0.0, v.cooldown - cfg_.time_step);
      if (cfg_.lane_count == 1 && sim_time_ >= v.profile_until) {
        v.v0 = leader_rng_->uniform(5.0, cfg_.desired_speed);
        v.profile_until = sim_time_ + leader_rng_->uniform(20.0, 60.0);
      }
      v.st.accel = background_accel(i);
    }
  }

  // Semi-implicit Euler for everyone. Background speeds never go negative;
  // the agent's may, so the reverse flag can fire, and are capped at the
  // road's desired speed.
  void integrate(const double* agent_cmd) {
    (void)agent_cmd;
    for (auto& v : vehicles_) {
      if (v.st.is_agent) {
        v.st.speed = std::min(v.st.speed + v.st.accel * cfg_.time_step,
                              cfg_.desired_speed);
      } else {
        v.st.speed = std::max(0.0, v.st.speed + v.st.accel * cfg_.time_step);
      }
      v.st.position += v.st.speed * cfg_.time_step;
    }
  }

  void remove_departed() {
    for (std::size_t i = 0; i < vehicles_.size();) {
      if (!vehicles_[i].st.is_agent && vehicles_[i].st.position > cfg_.road_length) {
        if (static_cast<int>(i) < agent_idx_) --agent_idx_;
        vehicles_.erase(vehicles_.begin() + static_cast<long>(i));
      } else {
        ++i;
      }
    }
  }

  double background_accel(int i) {
    const Veh& v = vehicles_[i];
    IdmParams p = idm_;
    p.desired_speed = v.v0;
    int lead = leader_on_lane(v.st.lane, i);
    if (lead < 0) return idm_free_acceleration(v.st.speed, p);
    double s = std::max(net_gap(lead, i), 0.01);
    return idm_acceleration(v.st.speed, v.st.speed - vehicles_[lead].st.speed, s, p);
  }

  int index_of(int id) const {
    for (int i = 0; i < static_cast<int>(vehicles_.size()); ++i) {
      if (vehicles_[i].st.id == id) return i;
    }
    return -1;
  }

  void apply_mobil() {
    // front-to-back, immediate apply; deterministic order by (position, id)
    std::vector<int> order;
    order.reserve(vehicles_.size());
    for (int i = 0; i < static_cast<int>(vehicles_.size()); ++i) {
      if (!vehicles_[i].st.is_agent) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [this](int a, int b) {
      if (vehicles_[a].st.position != vehicles_[b].st.position)
        return vehicles_[a].st.position > vehicles_[b].st.position;
      return vehicles_[a].st.id < vehicles_[b].st.id;
    });
    for (int i : order) {
      Veh& v = vehicles_[i];
      if (v.cooldown > 0.0) continue;
      int best_target = -1;
      double best_incentive = -1e18;
      for (int dir : {+1, -1}) {
        int target = v.st.lane + dir;
        if (target < 0 || target >= cfg_.lane_count) continue;
        double incentive;
        if (mobil_candidate(i, target, incentive) && incentive > best_incentive) {
          best_incentive = incentive;
          best_target = target;
        }
      }
      if (best_target >= 0) {
        v.st.lane = best_target;
        v.cooldown = mobil_.cooldown;
      }
    }
  }

  // Evaluates the MOBIL criterion for moving vehicle `i` to `target`.
  bool mobil_candidate(int i, int target, double& incentive) {
    const Veh& v = vehicles_[i];
    int new_lead = leader_on_lane(target, i);
    int new_follow = follower_on_lane(target, i);
    if (new_lead >= 0 && net_gap(new_lead, i) <= idm_.min_gap * 0.5) return false;
    if (new_follow >= 0 && net_gap(i, new_follow) <= idm_.min_gap * 0.5) return false;

    int old_lead = leader_on_lane(v.st.lane, i);
    int old_follow = follower_on_lane(v.st.lane, i);

    MobilContext ctx;
    ctx.self_old = accel_with_leader(i, old_lead);
    ctx.self_new = accel_with_leader(i, new_lead);
    ctx.old_follower_old = old_follow >= 0 ? accel_with_leader(old_follow, i) : 0.0;
    ctx.old_follower_new =
        old_follow >= 0 ? accel_with_leader(old_follow, old_lead) : 0.0;
    ctx.new_follower_old =
        new_follow >= 0 ? accel_with_leader(new_follow, new_lead) : 0.0;
    ctx.new_follower_new = new_follow >= 0 ? accel_with_leader(new_follow, i) : 0.0;
    if (!mobil_accepts(ctx, mobil_)) return false;
    incentive = (ctx.self_new - ctx.self_old) +
                mobil_.politeness * ((ctx.new_follower_new - ctx.new_follower_old) +
                                     (ctx.old_follower_new - ctx.old_follower_old));
    return true;
  }

  double accel_with_leader(int i, int lead) {
    const Veh& v = vehicles_[i];
    IdmParams p = idm_;
    p.desired_speed = v.st.is_agent ? cfg_.desired_speed : v.v0;
    if (lead < 0) return idm_free_acceleration(v.st.speed, p);
    double s = std::max(net_gap(lead, i), 0.01);
    return idm_acceleration(v.st.speed, v.st.speed - vehicles_[lead].st.speed, s, p);
  }

  void process_arrivals() {
    for (int lane = 0; lane < cfg_.lane_count; ++lane) {
      while (next_arrival_[lane] <= sim_time_) {
        ++pending_[lane];
        next_arrival_[lane] += arrivals_rng_->exponential(arrival_rate());
      }
      if (pending_[lane] == 0) continue;
      double gap = entry_gap_for_lane(lane);
      double v0 = cfg_.desired_speed * arrivals_rng_->uniform(0.9, 1.1);
      double v_init = v0;
      int lead = entry_leader(lane);
      if (lead >= 0) {
        double g = vehicles_[lead].st.position - cfg_.vehicle_length;
        double vl = vehicles_[lead].st.speed;
        v_init = std::min(
            v_init, vl + std::sqrt(std::max(0.0, 2.0 * idm_.comfort_decel *
                                                     (g - idm_.min_gap))));
        v_init = std::max(v_init, 0.0);
      }
      if (gap < std::max(2.0 * idm_.min_gap, v_init * idm_.time_headway)) continue;
      Veh v;
      v.st.id = next_id_++;
      v.st.position = 0.0;
      v.st.lane = lane;
      v.st.speed = v_init;
      v.v0 = v0;
      vehicles_.push_back(v);
      ++insertion_count_;
      --pending_[lane];
    }
  }

  double entry_gap_for_lane(int lane) const {
    int lead = entry_leader(lane);
    if (lead < 0) return kNoLeaderGap;
    return vehicles_[lead].st.position - cfg_.vehicle_length;
  }

  int entry_leader(int lane) const {
    int best = -1;
    for (int j = 0; j < static_cast<int>(vehicles_.size()); ++j) {
      if (!occupies(vehicles_[j], lane)) continue;
      if (best < 0 || vehicles_[j].st.position < vehicles_[best].st.position)
        best = j;
    }
    return best;
  }

  // Relevant leader of the agent: nearest lead on the current lane, or the
  // nearer of current/target lane leads while a maneuver runs.
  int agent_leader() const {
    int lead = leader_on_lane(ag2().st.lane, agent_idx_);
    if (lc_active_) {
      int lead_t = leader_on_lane(lc_target_, agent_idx_);
      if (lead < 0 ||
          (lead_t >= 0 &&
           vehicles_[lead_t].st.position < vehicles_[lead].st.position)) {
        lead = lead_t;
      }
    }
    return lead;
  }

  StepResult make_step_result(const LcStepInfo& lc, double da, bool rejected,
                              double da_cf, double da_lf, int lead, bool initial) {
    StepResult r;
    const auto& ag = ag2().st;
    r.raw.gap = lead >= 0 ? std::min(net_gap(lead, agent_idx_), kNoLeaderGap)
                          : kNoLeaderGap;
    r.raw.speed = ag.speed;
    r.raw.speed_diff = lead >= 0 ? ag.speed - vehicles_[lead].st.speed : 0.0;
    r.raw.accel_delta = da;
    r.raw.follower_delta_current = da_cf;
    r.raw.follower_delta_target = da_lf;
    r.lc = lc;
    r.flags = compute_flags(r.raw.gap, r.raw.speed, r.raw.speed_diff,
                            r.raw.accel_delta, rejected);
    if (!initial) {
      if (r.flags.collision) {
        r.done_reason = DoneReason::Collision;
      } else if (r.flags.reverse) {
        r.done_reason = DoneReason::Reverse;
      } else if (r.flags.low_speed) {
        r.done_reason = DoneReason::UnreasonableStop;
      } else if (ag.position >= cfg_.road_length) {
        r.done_reason = DoneReason::RoadEnd;
      }
    }
    r.episode_done = r.done_reason != DoneReason::None;
    r.observation = observe(cfg_.observation);
    return r;
  }

  Observation observe_cf() const {
    const auto& ag = ag2().st;
    int lead = agent_leader();
    double d = lead >= 0 ? net_gap(lead, agent_idx_) : kNoLeaderGap;
    double dv = lead >= 0 ? ag.speed - vehicles_[lead].st.speed : 0.0;
    double a_norm = std::max(std::abs(cfg_.accel_min), std::abs(cfg_.accel_max));
    return {clip1(ag.speed / kSpeedNorm), clip1(ag.accel / a_norm),
            clip1(d / kGapNorm), clip1(dv / kSpeedDiffNorm)};
  }

  Observation observe_lc() const {
    const auto& ag = ag2().st;
    double a_norm = std::max(std::abs(cfg_.accel_min), std::abs(cfg_.accel_max));
    Observation obs;
    obs.reserve(kLcObservationSize);
    obs.push_back(clip1(ag.speed / kSpeedNorm));
    obs.push_back(clip1(ag.accel / a_norm));
    // slot order: left lead/lag, same-lane lead/lag, right lead/lag
    for (int dlane : {+1, 0, -1}) {
      int lane = ag.lane + dlane;
      bool lane_exists = lane >= 0 && lane < cfg_.lane_count;
      int lead = lane_exists ? leader_on_lane(lane, agent_idx_) : -1;
      int lag = lane_exists ? follower_on_lane(lane, agent_idx_) : -1;
      push_neighbor(obs, lead, dlane, /*is_lead=*/true);
      push_neighbor(obs, lag, dlane, /*is_lead=*/false);
    }
    return obs;
  }

  void push_neighbor(Observation& obs, int idx, int dlane, bool is_lead) const {
    const auto& ag = ag2().st;
    if (idx < 0) {
      obs.push_back(is_lead ? 1.0 : -1.0);
      obs.push_back(static_cast<double>(dlane));
      obs.push_back(clip1(ag.speed / kSpeedNorm));
      return;
    }
    double gap = is_lead ? net_gap(idx, agent_idx_) : -net_gap(agent_idx_, idx);
    obs.push_back(clip1(gap / kGapNorm));
    obs.push_back(static_cast<double>(dlane));
    obs.push_back(clip1(vehicles_[idx].st.speed / kSpeedNorm));
  }

  static double clip1(double x) { return std::clamp(x, -1.0, 1.0); }

  void write_trajectory(const StateFlags& flags) {
    if (!trajectory_) return;
    char buf[160];
    for (const auto& v : vehicles_) {
      char flag = v.st.is_agent ? branch_letter(flags) : '-';
      std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.6f,%.6f,%.6f,%c\n", step_index_,
                    v.st.id, v.st.lane, v.st.position, v.st.speed, v.st.accel,
                    flag);
      *trajectory_ << buf;
    }
  }

  SimConfig cfg_;
  IdmParams idm_;
  MobilParams mobil_;
  std::vector<Veh> vehicles_;
  int agent_idx_ = -1;
  double sim_time_ = 0.0;
  int step_index_ = 0;
  int insertion_count_ = 0;
  int next_id_ = 0;
  bool done_ = false;
  DoneReason done_reason_ = DoneReason::None;

  bool lc_active_ = false;
  int lc_target_ = 0;
  int lc_progress_ = 0;
  int lc_total_ = 1;

  std::vector<int> pending_;
  std::vector<double> next_arrival_;
  std::optional<Rng> arrivals_rng_;
  std::optional<Rng> leader_rng_;
  std::optional<Rng> agent_rng_;
  std::ostream* trajectory_ = nullptr;
};

}  // namespace avdm

#endif  // AVDM_SIMULATION_HPP
