#ifndef AVDM_WIRE_HPP
#define AVDM_WIRE_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include "avdm/env.hpp"
#include "avdm/sim_types.hpp"
#include "json.hpp"

namespace avdm::wire {

// Newline-delimited UTF-8 JSON, one object per line. Every request carries a
// client-chosen, strictly increasing `seq` that the matching ack or error
// echoes. Numbers are serialized with shortest round-trip precision, so
// 64-bit floats survive the wire bit-exactly.
inline constexpr int kProtocolVersion = 1;

using nlohmann::json;

inline json to_json(const SimConfig& c) {
  return json{{"lane_count", c.lane_count},
              {"road_length", c.road_length},
              {"time_step", c.time_step},
              {"warmup", c.warmup},
              {"inflow_per_lane", c.inflow_per_lane},
              {"desired_speed", c.desired_speed},
              {"lc_duration", c.lc_duration},
              {"vehicle_length", c.vehicle_length},
              {"accel_min", c.accel_min},
              {"accel_max", c.accel_max},
              {"lc_gap_buffer", c.lc_gap_buffer},
              {"observation", to_string(c.observation)},
              {"rng_seed", c.rng_seed}};
}

inline SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  c.lane_count = j.at("lane_count").get<int>();
  c.road_length = j.at("road_length").get<double>();
  c.time_step = j.at("time_step").get<double>();
  c.warmup = j.at("warmup").get<double>();
  c.inflow_per_lane = j.at("inflow_per_lane").get<double>();
  c.desired_speed = j.at("desired_speed").get<double>();
  c.lc_duration = j.at("lc_duration").get<double>();
  c.vehicle_length = j.at("vehicle_length").get<double>();
  c.accel_min = j.at("accel_min").get<double>();
  c.accel_max = j.at("accel_max").get<double>();
  c.lc_gap_buffer = j.at("lc_gap_buffer").get<double>();
  c.observation = obs_mode_from_string(j.at("observation").get<std::string>());
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

inline json to_json(const IdmParams& p) {
  return json{{"desired_speed", p.desired_speed},
              {"time_headway", p.time_headway},
              {"min_gap", p.min_gap},
              {"max_accel", p.max_accel},
              {"comfort_decel", p.comfort_decel},
              {"exponent", p.exponent},
              {"emergency_decel", p.emergency_decel}};
}

inline IdmParams idm_params_from_json(const json& j) {
  IdmParams p;
  p.desired_speed = j.at("desired_speed").get<double>();
  p.time_headway = j.at("time_headway").get<double>();
  p.min_gap = j.at("min_gap").get<double>();
  p.max_accel = j.at("max_accel").get<double>();
  p.comfort_decel = j.at("comfort_decel").get<double>();
  p.exponent = j.at("exponent").get<double>();
  p.emergency_decel = j.at("emergency_decel").get<double>();
  return p;
}

inline json to_json(const MobilParams& p) {
  return json{{"politeness", p.politeness},
              {"threshold", p.threshold},
              {"safe_decel", p.safe_decel},
              {"cooldown", p.cooldown}};
}

inline MobilParams mobil_params_from_json(const json& j) {
  MobilParams p;
  p.politeness = j.at("politeness").get<double>();
  p.threshold = j.at("threshold").get<double>();
  p.safe_decel = j.at("safe_decel").get<double>();
  p.cooldown = j.at("cooldown").get<double>();
  return p;
}

inline json to_json(const EnvConfig& c) {
  return json{{"sim", to_json(c.sim)}, {"idm", to_json(c.idm)},
              {"mobil", to_json(c.mobil)}};
}

inline EnvConfig env_config_from_json(const json& j) {
  EnvConfig c;
  c.sim = sim_config_from_json(j.at("sim"));
  c.idm = idm_params_from_json(j.at("idm"));
  c.mobil = mobil_params_from_json(j.at("mobil"));
  return c;
}

inline json to_json(const AgentAction& a) {
  return json{{"acceleration", a.acceleration}, {"lc", to_string(a.lc)}};
}

inline AgentAction action_from_json(const json& j) {
  AgentAction a;
  a.acceleration = j.at("acceleration").get<double>();
  a.lc = lc_decision_from_string(j.at("lc").get<std::string>());
  return a;
}

inline json to_json(const StepResult& r) {
  json flags{{"C", r.flags.collision},   {"L", r.flags.low_speed},
             {"U", r.flags.uncomfortable}, {"R", r.flags.reverse},
             {"G", r.flags.lc_rejected},   {"O", r.flags.normal}};
  json raw{{"d", r.raw.gap},
           {"v", r.raw.speed},
           {"dv", r.raw.speed_diff},
           {"da", r.raw.accel_delta},
           {"da_cf", r.raw.follower_delta_current},
           {"da_lf", r.raw.follower_delta_target}};
  json lc{{"instruction", r.lc.instruction},
          {"accepted", r.lc.accepted},
          {"completed", r.lc.completed},
          {"lead_headway", r.lc.lead_headway},
          {"lag_headway", r.lc.lag_headway}};
  return json{{"observation", r.observation},
              {"flags", flags},
              {"done", r.episode_done},
              {"done_reason", to_string(r.done_reason)},
              {"raw", raw},
              {"lc", lc}};
}

inline StepResult step_result_from_json(const json& j) {
  StepResult r;
  r.observation = j.at("observation").get<std::vector<double>>();
  const json& f = j.at("flags");
  r.flags.collision = f.at("C").get<bool>();
  r.flags.low_speed = f.at("L").get<bool>();
  r.flags.uncomfortable = f.at("U").get<bool>();
  r.flags.reverse = f.at("R").get<bool>();
  r.flags.lc_rejected = f.at("G").get<bool>();
  r.flags.normal = f.at("O").get<bool>();
  r.episode_done = j.at("done").get<bool>();
  r.done_reason = done_reason_from_string(j.at("done_reason").get<std::string>());
  const json& raw = j.at("raw");
  r.raw.gap = raw.at("d").get<double>();
  r.raw.speed = raw.at("v").get<double>();
  r.raw.speed_diff = raw.at("dv").get<double>();
  r.raw.accel_delta = raw.at("da").get<double>();
  r.raw.follower_delta_current = raw.at("da_cf").get<double>();
  r.raw.follower_delta_target = raw.at("da_lf").get<double>();
  const json& lc = j.at("lc");
  r.lc.instruction = lc.at("instruction").get<bool>();
  r.lc.accepted = lc.at("accepted").get<bool>();
  r.lc.completed = lc.at("completed").get<bool>();
  r.lc.lead_headway = lc.at("lead_headway").get<double>();
  r.lc.lag_headway = lc.at("lag_headway").get<double>();
  return r;
}

// request builders (client side)

inline std::string hello_line(std::uint64_t seq) {
  return json{{"type", "hello"}, {"seq", seq}, {"version", kProtocolVersion}}
             .dump() +
         "\n";
}

inline std::string reset_line(std::uint64_t seq, const EnvConfig& cfg,
                              std::uint64_t seed) {
  return json{{"type", "reset"}, {"seq", seq}, {"config", to_json(cfg)},
              {"seed", seed}}
             .dump() +
         "\n";
}

inline std::string step_line(std::uint64_t seq, const AgentAction& a) {
  return json{{"type", "step"}, {"seq", seq}, {"action", to_json(a)}}.dump() +
         "\n";
}

inline std::string bye_line(std::uint64_t seq) {
  return json{{"type", "bye"}, {"seq", seq}}.dump() + "\n";
}

// response builders (server side)

inline std::string error_line(std::uint64_t seq, const std::string& code,
                              const std::string& message) {
  return json{{"type", "error"}, {"seq", seq}, {"code", code},
              {"message", message}}
             .dump() +
         "\n";
}

inline std::string hello_ack_line(std::uint64_t seq) {
  return json{{"type", "hello_ack"}, {"seq", seq}, {"version", kProtocolVersion}}
             .dump() +
         "\n";
}

inline std::string result_ack_line(const char* type, std::uint64_t seq,
                                   const StepResult& r) {
  return json{{"type", type}, {"seq", seq}, {"result", to_json(r)}}.dump() +
         "\n";
}

}  // namespace avdm::wire

#endif  // AVDM_WIRE_HPP
