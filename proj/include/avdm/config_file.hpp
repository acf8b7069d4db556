#ifndef AVDM_CONFIG_FILE_HPP
#define AVDM_CONFIG_FILE_HPP

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "avdm/ddpg.hpp"
#include "avdm/env.hpp"
#include "avdm/reward.hpp"

namespace avdm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal key/value experiment file: `[section]` headers, `key = value`
/// lines, `#` comments, quoted strings and `[a, b]` integer lists. Keys are
/// addressed as "section.key"; unrecognized keys are rejected after loading
/// so typos fail loudly.
class ConfigFile {
 public:
  static ConfigFile parse_string(const std::string& text) {
    ConfigFile cf;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[' && s.back() == ']') {
        section = strip(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value");
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      cf.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cf;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_string(ss.str());
  }

  /// Override from the command line: "section.key=value".
  void set(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got: " + assignment);
    values_[strip(assignment.substr(0, eq))] = strip(assignment.substr(eq + 1));
  }

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key, double fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config field '" + key + "': expected a number, got '" +
                        it->second + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    try {
      std::size_t pos = 0;
      long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config field '" + key + "': expected an integer, got '" +
                        it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError("config field '" + key + "': expected true/false, got '" +
                      it->second + "'");
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    std::string v = it->second;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
      v = v.substr(1, v.size() - 2);
    return v;
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.insert(key);
    std::string v = it->second;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
      throw ConfigError("config field '" + key + "': expected [a, b, ...]");
    std::vector<int> out;
    std::istringstream is(v.substr(1, v.size() - 2));
    std::string cell;
    while (std::getline(is, cell, ',')) {
      cell = strip(cell);
      if (cell.empty()) continue;
      try {
        out.push_back(std::stoi(cell));
      } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': bad list entry '" + cell +
                          "'");
      }
    }
    return out;
  }

  /// Throws naming the first field that no getter asked for.
  void reject_unknown_keys() const {
    for (const auto& [key, value] : values_) {
      if (!consumed_.count(key))
        throw ConfigError("unknown config field '" + key + "'");
    }
  }

 private:
  static std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

struct PretrainConfig {
  bool enabled = false;
  int episodes = 20;
  int steps_per_episode = 400;
  int epochs = 40;
  double lr = 1e-3;
  int batch_size = 64;
};

/// One experiment = scene + reward + training schedule + optional
/// pretraining, all loadable from a single config file.
struct ExperimentConfig {
  EnvConfig env;
  RewardSpec reward;
  TrainConfig train;
  PretrainConfig pretrain;
  std::uint64_t seed = 1;

  static ExperimentConfig load(ConfigFile& cf) {
    ExperimentConfig x;
    SimConfig& s = x.env.sim;
    s.lane_count = static_cast<int>(cf.get_int("sim.lane_count", s.lane_count));
    s.road_length = cf.get_double("sim.road_length", s.road_length);
    s.time_step = cf.get_double("sim.time_step", s.time_step);
    s.warmup = cf.get_double("sim.warmup", s.warmup);
    s.inflow_per_lane = cf.get_double("sim.inflow_per_lane", s.inflow_per_lane);
    s.desired_speed = cf.get_double("sim.desired_speed", s.desired_speed);
    s.lc_duration = cf.get_double("sim.lc_duration", s.lc_duration);
    s.vehicle_length = cf.get_double("sim.vehicle_length", s.vehicle_length);
    s.accel_min = cf.get_double("sim.accel_min", s.accel_min);
    s.accel_max = cf.get_double("sim.accel_max", s.accel_max);
    s.lc_gap_buffer = cf.get_double("sim.lc_gap_buffer", s.lc_gap_buffer);
    s.observation =
        obs_mode_from_string(cf.get_string("sim.observation", to_string(s.observation)));

    IdmParams& i = x.env.idm;
    i.desired_speed = cf.get_double("idm.desired_speed", i.desired_speed);
    i.time_headway = cf.get_double("idm.time_headway", i.time_headway);
    i.min_gap = cf.get_double("idm.min_gap", i.min_gap);
    i.max_accel = cf.get_double("idm.max_accel", i.max_accel);
    i.comfort_decel = cf.get_double("idm.comfort_decel", i.comfort_decel);
    i.exponent = cf.get_double("idm.exponent", i.exponent);
    i.emergency_decel = cf.get_double("idm.emergency_decel", i.emergency_decel);

    MobilParams& m = x.env.mobil;
    m.politeness = cf.get_double("mobil.politeness", m.politeness);
    m.threshold = cf.get_double("mobil.threshold", m.threshold);
    m.safe_decel = cf.get_double("mobil.safe_decel", m.safe_decel);
    m.cooldown = cf.get_double("mobil.cooldown", m.cooldown);

    RewardSpec& r = x.reward;
    r.form = reward_form_from_string(cf.get_string("reward.form", to_string(r.form)));
    r.desired_headway = cf.get_double("reward.desired_headway", r.desired_headway);
    r.gap_norm = cf.get_double("reward.gap_norm", r.gap_norm);
    r.speed_norm = cf.get_double("reward.speed_norm", r.speed_norm);
    r.speed_diff_norm = cf.get_double("reward.speed_diff_norm", r.speed_diff_norm);
    r.lc_accel_weight = cf.get_double("reward.lc_accel_weight", r.lc_accel_weight);
    r.lc_speed_weight = cf.get_double("reward.lc_speed_weight", r.lc_speed_weight);
    r.epsilon = cf.get_double("reward.epsilon", r.epsilon);
    r.rejection_precedes_jerk =
        cf.get_bool("reward.rejection_precedes_jerk", r.rejection_precedes_jerk);

    TrainConfig& t = x.train;
    t.mode = s.observation;
    t.episodes = static_cast<int>(cf.get_int("train.episodes", t.episodes));
    t.steps_per_episode =
        static_cast<int>(cf.get_int("train.steps_per_episode", t.steps_per_episode));
    t.gamma = cf.get_double("train.gamma", t.gamma);
    t.actor_lr = cf.get_double("train.actor_lr", t.actor_lr);
    t.critic_lr = cf.get_double("train.critic_lr", t.critic_lr);
    t.lr_scale = cf.get_double("train.lr_scale", t.lr_scale);
    t.actor_l2 = cf.get_double("train.actor_l2", t.actor_l2);
    t.tau = cf.get_double("train.tau", t.tau);
    t.batch_size = static_cast<int>(cf.get_int("train.batch_size", t.batch_size));
    t.buffer_capacity = static_cast<std::size_t>(
        cf.get_int("train.buffer_capacity", static_cast<long long>(t.buffer_capacity)));
    t.warmup_transitions =
        static_cast<int>(cf.get_int("train.warmup_transitions", t.warmup_transitions));
    t.update_every = static_cast<int>(cf.get_int("train.update_every", t.update_every));
    std::string opt = cf.get_string(
        "train.optimizer", t.optimizer == OptimKind::Adam ? "adam" : "sgd");
    if (opt == "adam") {
      t.optimizer = OptimKind::Adam;
    } else if (opt == "sgd") {
      t.optimizer = OptimKind::Sgd;
    } else {
      throw ConfigError("config field 'train.optimizer': expected adam or sgd");
    }
    t.actor_hidden = cf.get_int_list("train.actor_hidden", t.actor_hidden);
    t.critic_hidden = cf.get_int_list("train.critic_hidden", t.critic_hidden);
    t.noise_theta = cf.get_double("train.noise_theta", t.noise_theta);
    t.noise_sigma = cf.get_double("train.noise_sigma", t.noise_sigma);
    t.noise_sigma_lc = cf.get_double("train.noise_sigma_lc", t.noise_sigma_lc);
    t.noise_decay = cf.get_double("train.noise_decay", t.noise_decay);
    t.stop_when_converged =
        cf.get_bool("train.stop_when_converged", t.stop_when_converged);
    t.convergence_window =
        static_cast<int>(cf.get_int("train.convergence_window", t.convergence_window));
    t.convergence_band = cf.get_double("train.convergence_band", t.convergence_band);
    t.convergence_duration = static_cast<int>(
        cf.get_int("train.convergence_duration", t.convergence_duration));
    t.checkpoint_every =
        static_cast<int>(cf.get_int("train.checkpoint_every", t.checkpoint_every));

    PretrainConfig& p = x.pretrain;
    p.enabled = cf.get_bool("pretrain.enabled", p.enabled);
    p.episodes = static_cast<int>(cf.get_int("pretrain.episodes", p.episodes));
    p.steps_per_episode = static_cast<int>(
        cf.get_int("pretrain.steps_per_episode", p.steps_per_episode));
    p.epochs = static_cast<int>(cf.get_int("pretrain.epochs", p.epochs));
    p.lr = cf.get_double("pretrain.lr", p.lr);
    p.batch_size = static_cast<int>(cf.get_int("pretrain.batch_size", p.batch_size));

    x.seed = static_cast<std::uint64_t>(cf.get_int("train.seed", 1));

    cf.reject_unknown_keys();
    try {
      x.env.validate();
      x.reward.validate();
      x.train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return x;
  }
};

}  // namespace avdm

#endif  // AVDM_CONFIG_FILE_HPP
