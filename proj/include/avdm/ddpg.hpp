#ifndef AVDM_DDPG_HPP
#define AVDM_DDPG_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "avdm/env.hpp"
#include "avdm/metrics.hpp"
#include "avdm/mlp.hpp"
#include "avdm/ou_noise.hpp"
#include "avdm/replay.hpp"
#include "avdm/reward.hpp"
#include "avdm/rng.hpp"
#include "avdm/sim_types.hpp"

namespace avdm {

struct TrainConfig {
  ObsMode mode = ObsMode::CF;
  int episodes = 500;
  int steps_per_episode = 4000;
  double gamma = 0.99;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double lr_scale = 1.0;   // multiplies both learning rates (1% for ra4 fix)
  double actor_l2 = 0.0;   // weight penalty subtracted from the actor objective
  double tau = 1e-3;
  int batch_size = 64;
  std::size_t buffer_capacity = 100000;
  int warmup_transitions = 640;  // updates start once the buffer holds this many
  int update_every = 1;
  OptimKind optimizer = OptimKind::Adam;
  std::vector<int> actor_hidden = {64, 64};
  std::vector<int> critic_hidden = {64, 64};
  double noise_theta = 0.15;
  double noise_sigma = 0.2;
  double noise_sigma_lc = 1.0;  // wider process on the lane-change unit
  double noise_decay = 0.995;   // per episode
  bool stop_when_converged = false;
  int convergence_window = 100;
  double convergence_band = 0.1;
  int convergence_duration = 200;
  int checkpoint_every = 0;  // episodes between checkpoints; 0 = final only

  void validate() const {
    if (gamma <= 0.0 || gamma >= 1.0)
      throw std::invalid_argument("train: gamma must be in (0,1)");
    if (lr_scale <= 0.0) throw std::invalid_argument("train: lr_scale must be > 0");
    if (episodes < 0) throw std::invalid_argument("train: episodes must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (tau <= 0.0 || tau > 1.0)
      throw std::invalid_argument("train: tau must be in (0,1]");
    if (steps_per_episode < 1)
      throw std::invalid_argument("train: steps_per_episode must be >= 1");
    if (convergence_window < 1 || convergence_duration < 1)
      throw std::invalid_argument("train: convergence window/duration must be >= 1");
  }
};

/// Maps the actor's linear output units onto the hybrid action space.
/// Unit 0 passes through tanh and an affine map onto [accel_min, accel_max].
/// In LC mode unit 1 passes through a sigmoid; its (0,1) range is split into
/// thirds: u < 1/3 -> RLC, u < 2/3 -> LK, otherwise LLC.
struct ActionHead {
  double accel_min = -4.0;
  double accel_max = 3.0;
  bool with_lc = false;

  int dims() const { return with_lc ? 2 : 1; }

  // raw linear outputs -> squashed action vector (pre-mapping)
  std::vector<double> squash(const std::vector<double>& z) const {
    std::vector<double> a(static_cast<std::size_t>(dims()));
    a[0] = std::tanh(z[0]);
    if (with_lc) a[1] = 1.0 / (1.0 + std::exp(-z[1]));
    return a;
  }

  // d(squashed)/d(raw) evaluated from the squashed value
  double squash_grad(int unit, double a) const {
    if (unit == 0) return 1.0 - a * a;
    return a * (1.0 - a);
  }

  AgentAction decode(const std::vector<double>& a) const {
    AgentAction act;
    double y = std::isfinite(a[0]) ? std::clamp(a[0], -1.0, 1.0) : 0.0;
    act.acceleration =
        accel_min + 0.5 * (y + 1.0) * (accel_max - accel_min);
    if (with_lc) {
      double u = std::isfinite(a[1]) ? a[1] : 0.5;
      if (u < 1.0 / 3.0) {
        act.lc = LcDecision::RLC;
      } else if (u < 2.0 / 3.0) {
        act.lc = LcDecision::LK;
      } else {
        act.lc = LcDecision::LLC;
      }
    }
    return act;
  }
};

namespace detail {

/// One deterministic-policy-gradient ascent step on
///   mean_s q(s, head(actor(s))) - actor_l2 * sum(w^2),
/// with the critic supplied as a callable returning (q, dq/da). Shared by the
/// production path and the analytic toys in the tests.
template <typename CriticEval>
double actor_ascent_step(Mlp& actor, const ActionHead& head,
                         const std::vector<const std::vector<double>*>& states,
                         CriticEval&& critic_eval, double lr, double actor_l2,
                         MlpCache& cache, MlpGrads& grads) {
  grads.zero();
  double n = static_cast<double>(states.size());
  double q_mean = 0.0;
  std::vector<double> dq_da(static_cast<std::size_t>(head.dims()));
  std::vector<double> upstream(static_cast<std::size_t>(head.dims()));
  for (const auto* s : states) {
    actor.forward_cached(*s, cache);
    std::vector<double> a = head.squash(cache.post.back());
    double q = critic_eval(*s, a, dq_da);
    q_mean += q / n;
    for (int u = 0; u < head.dims(); ++u)
      upstream[static_cast<std::size_t>(u)] =
          dq_da[static_cast<std::size_t>(u)] *
          head.squash_grad(u, a[static_cast<std::size_t>(u)]) / n;
    actor.backward(cache, upstream, grads);
  }
  // ascent: descend along the negated objective gradient
  for (auto& layer : grads.w)
    for (auto& g : layer) g = -g;
  for (auto& layer : grads.b)
    for (auto& g : layer) g = -g;
  if (actor_l2 > 0.0) {
    for (std::size_t l = 0; l < grads.w.size(); ++l)
      for (std::size_t i = 0; i < grads.w[l].size(); ++i)
        grads.w[l][i] += 2.0 * actor_l2 * actor.weights()[l][i];
  }
  actor.apply_update(grads, lr);
  return q_mean;
}

}  // namespace detail

/// Actor/critic pair with target networks, replay buffer and OU exploration.
class DdpgAgent {
 public:
  DdpgAgent(const TrainConfig& cfg, const SimConfig& sim, std::uint64_t seed)
      : cfg_(cfg),
        head_{sim.accel_min, sim.accel_max, cfg.mode == ObsMode::LC},
        obs_dim_(observation_size(cfg.mode)),
        buffer_(cfg.buffer_capacity, mix_seed(seed, 11)),
        noise_({cfg.noise_sigma, cfg.noise_sigma_lc}, cfg.noise_theta,
               mix_seed(seed, 12)),
        actor_(actor_spec(cfg, obs_dim_, head_.dims()), mix_seed(seed, 13)),
        critic_(critic_spec(cfg, obs_dim_, head_.dims()), mix_seed(seed, 14)),
        target_actor_(actor_),
        target_critic_(critic_) {
    cfg_.validate();
    actor_.set_optimizer(cfg.optimizer);
    critic_.set_optimizer(cfg.optimizer);
  }

  const TrainConfig& config() const { return cfg_; }
  const ActionHead& head() const { return head_; }
  int observation_dim() const { return obs_dim_; }
  ReplayBuffer& buffer() { return buffer_; }
  OuNoise& noise() { return noise_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Mlp& target_actor() { return target_actor_; }
  Mlp& target_critic() { return target_critic_; }

  /// Deterministic head mapping of the actor output; OU noise perturbs the
  /// pre-mapping continuous outputs when exploring (the lane-change unit is
  /// perturbed before its sigmoid).
  std::vector<double> select_action_vector(const std::vector<double>& obs,
                                           bool explore) {
    actor_.forward_cached(obs, scratch_cache_);
    const std::vector<double>& z = scratch_cache_.post.back();
    std::vector<double> a(static_cast<std::size_t>(head_.dims()));
    if (explore) {
      const std::vector<double>& n = noise_.sample();
      a[0] = std::clamp(std::tanh(z[0]) + n[0], -1.0, 1.0);
      if (head_.with_lc) a[1] = 1.0 / (1.0 + std::exp(-(z[1] + n[1])));
    } else {
      a[0] = std::tanh(z[0]);
      if (head_.with_lc) a[1] = 1.0 / (1.0 + std::exp(-z[1]));
    }
    for (auto& x : a)
      if (!std::isfinite(x)) x = 0.0;
    return a;
  }

  AgentAction select_action(const std::vector<double>& obs, bool explore) {
    return head_.decode(select_action_vector(obs, explore));
  }

  double q_value(const std::vector<double>& obs, const std::vector<double>& a) {
    concat(obs, a, critic_input_);
    return critic_.forward(critic_input_)[0];
  }

  /// TD target y = r, or r + gamma * Q'(s', mu'(s')) for non-terminal
  /// transitions, with both primed networks being the targets.
  double critic_target(const Transition& t) {
    if (t.terminal) return t.reward;
    target_actor_.forward_cached(t.next_observation, scratch_cache_);
    std::vector<double> a = head_.squash(scratch_cache_.post.back());
    concat(t.next_observation, a, critic_input_);
    return t.reward + cfg_.gamma * target_critic_.forward(critic_input_)[0];
  }

  /// One descent step on the mean squared TD error. Returns the mean loss
  /// measured before the step. Throws NumericError (leaving the parameters
  /// untouched) when the loss or a gradient is not finite.
  double critic_update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
    critic_grads_.zero();
    double n = static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> upstream(1);
    for (const Transition* t : batch) {
      double y = critic_target(*t);
      concat(t->observation, t->action, critic_input_);
      critic_.forward_cached(critic_input_, critic_cache_);
      double q = critic_cache_.post.back()[0];
      double err = q - y;
      loss += err * err / n;
      upstream[0] = 2.0 * err / n;
      critic_.backward(critic_cache_, upstream, critic_grads_);
    }
    if (!std::isfinite(loss)) throw NumericError("critic_update: non-finite loss");
    critic_.apply_update(critic_grads_, cfg_.critic_lr * cfg_.lr_scale);
    return loss;
  }

  /// One gradient-ascent step on mean Q(s, mu(s)) via the chain rule through
  /// the critic, minus the optional actor weight penalty. Returns the mean Q
  /// before the step.
  double actor_update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
    states_.clear();
    for (const Transition* t : batch) states_.push_back(&t->observation);
    auto critic_eval = [this](const std::vector<double>& s,
                              const std::vector<double>& a,
                              std::vector<double>& dq_da) {
      concat(s, a, critic_input_);
      critic_.forward_cached(critic_input_, critic_cache_);
      critic_scratch_.zero();
      double one[1] = {1.0};
      critic_.backward(critic_cache_, std::span<const double>(one, 1),
                       critic_scratch_);
      for (int u = 0; u < head_.dims(); ++u)
        dq_da[static_cast<std::size_t>(u)] =
            critic_scratch_.input[static_cast<std::size_t>(obs_dim_ + u)];
      return critic_cache_.post.back()[0];
    };
    return detail::actor_ascent_step(actor_, head_, states_, critic_eval,
                                     cfg_.actor_lr * cfg_.lr_scale, cfg_.actor_l2,
                                     actor_cache_, actor_grads_);
  }

  void soft_update_targets() {
    Mlp::soft_update(target_actor_, actor_, cfg_.tau);
    Mlp::soft_update(target_critic_, critic_, cfg_.tau);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "avdm-ddpg";
    j["version"] = 1;
    j["mode"] = to_string(cfg_.mode);
    j["obs_dim"] = obs_dim_;
    j["action_dims"] = head_.dims();
    j["accel_min"] = head_.accel_min;
    j["accel_max"] = head_.accel_max;
    j["actor"] = actor_.to_json();
    j["critic"] = critic_.to_json();
    j["target_actor"] = target_actor_.to_json();
    j["target_critic"] = target_critic_.to_json();
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os << to_json().dump(1) << "\n";
  }

  /// Restores the four networks from a checkpoint; the mode recorded in the
  /// file must match the configured mode.
  void restore(const nlohmann::json& j) {
    if (j.value("format", "") != "avdm-ddpg" || j.value("version", 0) != 1)
      throw std::invalid_argument("ddpg checkpoint: unknown format/version");
    std::string mode = j.at("mode").get<std::string>();
    if (obs_mode_from_string(mode) != cfg_.mode)
      throw std::invalid_argument("ddpg checkpoint: trained in " + mode +
                                  " mode, configured mode is " +
                                  to_string(cfg_.mode));
    actor_ = Mlp::from_json(j.at("actor"));
    critic_ = Mlp::from_json(j.at("critic"));
    target_actor_ = Mlp::from_json(j.at("target_actor"));
    target_critic_ = Mlp::from_json(j.at("target_critic"));
    if (actor_.input_size() != obs_dim_ ||
        actor_.output_size() != head_.dims() ||
        critic_.input_size() != obs_dim_ + head_.dims())
      throw std::invalid_argument("ddpg checkpoint: network shape mismatch");
    actor_.set_optimizer(cfg_.optimizer);
    critic_.set_optimizer(cfg_.optimizer);
  }

  void restore_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    nlohmann::json j;
    is >> j;
    restore(j);
  }

 private:
  static MlpSpec actor_spec(const TrainConfig& cfg, int obs, int act) {
    MlpSpec s;
    s.layer_sizes.push_back(obs);
    for (int h : cfg.actor_hidden) s.layer_sizes.push_back(h);
    s.layer_sizes.push_back(act);
    s.activations.assign(cfg.actor_hidden.size(), Activation::Tanh);
    s.activations.push_back(Activation::Linear);  // head applies tanh/sigmoid
    s.init = InitScheme::SmallFinal;
    return s;
  }

  static MlpSpec critic_spec(const TrainConfig& cfg, int obs, int act) {
    MlpSpec s;
    s.layer_sizes.push_back(obs + act);
    for (int h : cfg.critic_hidden) s.layer_sizes.push_back(h);
    s.layer_sizes.push_back(1);
    s.activations.assign(cfg.critic_hidden.size(), Activation::Relu);
    s.activations.push_back(Activation::Linear);
    s.init = InitScheme::SmallFinal;
    return s;
  }

  void concat(const std::vector<double>& obs, const std::vector<double>& a,
              std::vector<double>& out) const {
    out.resize(obs.size() + a.size());
    std::copy(obs.begin(), obs.end(), out.begin());
    std::copy(a.begin(), a.end(), out.begin() + static_cast<long>(obs.size()));
  }

  TrainConfig cfg_;
  ActionHead head_;
  int obs_dim_;
  ReplayBuffer buffer_;
  OuNoise noise_;
  Mlp actor_;
  Mlp critic_;
  Mlp target_actor_;
  Mlp target_critic_;
  MlpCache scratch_cache_, critic_cache_, actor_cache_;
  MlpGrads critic_grads_, critic_scratch_, actor_grads_;
  std::vector<double> critic_input_;
  std::vector<const std::vector<double>*> states_;
};

/// Converts a step result into the reward input consumed by reward().
inline RewardInput reward_input_from(const StepResult& sr) {
  RewardInput in;
  in.flags = sr.flags;
  in.gap = sr.raw.gap;
  in.speed = sr.raw.speed;
  in.speed_diff = sr.raw.speed_diff;
  in.accel_delta = sr.raw.accel_delta;
  in.lane_change_executed = sr.lc.accepted;
  in.follower_delta_current = sr.raw.follower_delta_current;
  in.follower_delta_target = sr.raw.follower_delta_target;
  return in;
}

struct TrainingLog {
  std::vector<EpisodeMetrics> episodes;
  bool converged = false;
  int converged_at = -1;  // first episode satisfying the moving-band criterion
  int numeric_errors = 0;
};

/// Moving-band convergence: the `window`-episode moving mean of the total
/// reward stays within +-band of its stretch mean for `duration` consecutive
/// episodes.
class ConvergenceTracker {
 public:
  ConvergenceTracker(int window, double band, int duration)
      : window_(window), band_(band), duration_(duration) {}

  void add(double episode_total) {
    totals_.push_back(episode_total);
    if (static_cast<int>(totals_.size()) < window_) return;
    double sum = 0.0;
    for (std::size_t i = totals_.size() - static_cast<std::size_t>(window_);
         i < totals_.size(); ++i)
      sum += totals_[i];
    means_.push_back(sum / window_);
    if (converged_at_ >= 0 || static_cast<int>(means_.size()) < duration_) return;
    double c = 0.0;
    for (std::size_t i = means_.size() - static_cast<std::size_t>(duration_);
         i < means_.size(); ++i)
      c += means_[i];
    c /= duration_;
    double limit = band_ * std::abs(c);
    if (limit <= 0.0) return;
    for (std::size_t i = means_.size() - static_cast<std::size_t>(duration_);
         i < means_.size(); ++i) {
      if (std::abs(means_[i] - c) > limit) return;
    }
    converged_at_ = static_cast<int>(totals_.size()) - 1;
  }

  bool converged() const { return converged_at_ >= 0; }
  int converged_at() const { return converged_at_; }
  const std::vector<double>& moving_means() const { return means_; }

 private:
  int window_;
  double band_;
  int duration_;
  std::vector<double> totals_;
  std::vector<double> means_;
  int converged_at_ = -1;
};

struct TrainCallbacks {
  std::function<void(const EpisodeMetrics&)> on_episode;
  std::function<void(int episode, const DdpgAgent&)> on_checkpoint;
};

/// The full training loop: per step select -> env.step -> reward -> store ->
/// critic update -> actor update -> soft target update. Fully deterministic
/// for a given (configs, seed).
inline TrainingLog train(Env& env, const EnvConfig& env_cfg,
                         const RewardSpec& reward_spec, const TrainConfig& cfg,
                         std::uint64_t seed, DdpgAgent& agent,
                         const TrainCallbacks& callbacks = {}) {
  cfg.validate();
  env_cfg.validate();
  reward_spec.validate();
  if (cfg.mode == ObsMode::LC && env_cfg.sim.lane_count == 1)
    throw std::invalid_argument("train: LC mode needs a 3-lane environment");
  if (cfg.mode != env_cfg.sim.observation)
    throw std::invalid_argument("train: env observation mode mismatch");

  TrainingLog log;
  ConvergenceTracker tracker(cfg.convergence_window, cfg.convergence_band,
                             cfg.convergence_duration);
  double dt = env_cfg.sim.time_step;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    StepResult sr = env.reset(env_cfg, mix_seed(seed, 100 + static_cast<std::uint64_t>(ep)));
    agent.noise().reset();
    agent.noise().set_decay(std::pow(cfg.noise_decay, ep));

    EpisodeMetrics m;
    m.episode = ep;
    double q_sum = 0.0, loss_sum = 0.0, speed_sum = 0.0;
    int updates = 0;
    bool in_maneuver = false;
    double maneuver_reward = 0.0;
    LcEventRecord pending_event{};

    std::vector<double> obs = sr.observation;
    for (int step = 0; step < cfg.steps_per_episode; ++step) {
      std::vector<double> a_vec = agent.select_action_vector(obs, true);
      AgentAction action = agent.head().decode(a_vec);
      q_sum += agent.q_value(obs, a_vec);
      StepResult next = env.step(action);
      double r = reward(reward_spec, reward_input_from(next));

      Transition t;
      t.observation = obs;
      t.action = a_vec;
      t.reward = r;
      t.next_observation = next.observation;
      t.terminal = next.episode_done;
      agent.buffer().store(std::move(t));

      m.total_reward += r;
      speed_sum += next.raw.speed;
      m.distance += next.raw.speed * dt;
      ++m.steps;
      if (next.flags.collision) ++m.flag_c;
      if (next.flags.low_speed) ++m.flag_l;
      if (next.flags.uncomfortable) ++m.flag_u;
      if (next.flags.reverse) ++m.flag_r;
      if (next.flags.lc_rejected) ++m.flag_g;
      if (next.lc.instruction) ++m.lc_instructions;
      if (next.lc.accepted) {
        ++m.lc_successes;
        in_maneuver = true;
        maneuver_reward = 0.0;
        pending_event = LcEventRecord{ep, m.steps, next.lc.lead_headway,
                                      next.lc.lag_headway, m.distance, 0.0};
      }
      if (in_maneuver) {
        maneuver_reward += r;
        if (next.lc.completed || next.episode_done) {
          pending_event.reward = maneuver_reward;
          m.lc_rewards.push_back(maneuver_reward);
          m.lc_events.push_back(pending_event);
          in_maneuver = false;
        }
      }

      if (agent.buffer().size() >= static_cast<std::size_t>(cfg.warmup_transitions) &&
          step % cfg.update_every == 0) {
        auto batch = agent.buffer().sample(static_cast<std::size_t>(cfg.batch_size));
        try {
          loss_sum += agent.critic_update(batch);
          agent.actor_update(batch);
          ++updates;
        } catch (const NumericError&) {
          ++log.numeric_errors;
        }
        agent.soft_update_targets();
      }

      obs = next.observation;
      if (next.episode_done) break;
    }

    m.mean_q = m.steps > 0 ? q_sum / m.steps : 0.0;
    m.mean_critic_loss = updates > 0 ? loss_sum / updates : 0.0;
    m.avg_speed = m.steps > 0 ? speed_sum / m.steps : 0.0;
    tracker.add(m.total_reward);
    if (callbacks.on_episode) callbacks.on_episode(m);
    if (callbacks.on_checkpoint && cfg.checkpoint_every > 0 &&
        (ep + 1) % cfg.checkpoint_every == 0) {
      callbacks.on_checkpoint(ep, agent);
    }
    log.episodes.push_back(std::move(m));
    if (tracker.converged()) {
      log.converged = true;
      log.converged_at = tracker.converged_at();
      if (cfg.stop_when_converged) break;
    }
  }
  return log;
}

/// IDM driving the agent: the baseline policy for comparisons and the
/// teacher for actor pretraining. Uses the raw gap/speed measurements from
/// the previous step result.
inline AgentAction idm_policy_action(const StepResult& prev, const IdmParams& idm,
                                     const SimConfig& sim) {
  IdmParams p = idm;
  p.desired_speed = sim.desired_speed;
  double a;
  if (prev.raw.gap >= kNoLeaderGap) {
    a = idm_free_acceleration(std::max(prev.raw.speed, 0.0), p);
  } else {
    a = idm_acceleration(std::max(prev.raw.speed, 0.0), prev.raw.speed_diff,
                         std::max(prev.raw.gap, 0.01), p);
  }
  AgentAction act;
  act.acceleration = std::clamp(a, sim.accel_min, sim.accel_max);
  return act;
}

struct PretrainSample {
  std::vector<double> observation;
  double target;  // tanh-space acceleration target
};

/// Rolls the IDM policy in the environment and records (observation, target)
/// pairs for supervised pretraining of the acceleration head.
inline std::vector<PretrainSample> collect_idm_dataset(Env& env,
                                                       const EnvConfig& env_cfg,
                                                       int episodes,
                                                       int steps_per_episode,
                                                       std::uint64_t seed) {
  std::vector<PretrainSample> data;
  const SimConfig& sim = env_cfg.sim;
  double mid = 0.5 * (sim.accel_min + sim.accel_max);
  double half = 0.5 * (sim.accel_max - sim.accel_min);
  for (int ep = 0; ep < episodes; ++ep) {
    StepResult sr = env.reset(env_cfg, mix_seed(seed, 500 + static_cast<std::uint64_t>(ep)));
    for (int step = 0; step < steps_per_episode && !sr.episode_done; ++step) {
      AgentAction act = idm_policy_action(sr, env_cfg.idm, sim);
      PretrainSample s;
      s.observation = sr.observation;
      s.target = std::clamp((act.acceleration - mid) / half, -0.995, 0.995);
      data.push_back(std::move(s));
      sr = env.step(act);
    }
  }
  return data;
}

/// Supervised MSE regression of the actor's acceleration head onto the
/// dataset targets (tanh output space). Any lane-change unit is untouched.
/// Returns the mean training loss per epoch.
inline std::vector<double> pretrain_actor(Mlp& actor, const ActionHead& head,
                                          const std::vector<PretrainSample>& data,
                                          int epochs, double lr, int batch_size,
                                          std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("pretrain: empty dataset");
  Rng rng(mix_seed(seed, 17));
  MlpCache cache;
  MlpGrads grads;
  std::vector<double> losses;
  std::vector<double> upstream(static_cast<std::size_t>(actor.output_size()), 0.0);
  for (int e = 0; e < epochs; ++e) {
    double epoch_loss = 0.0;
    std::size_t batches = (data.size() + batch_size - 1) / batch_size;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      grads.zero();
      double n = static_cast<double>(batch_size);
      double batch_loss = 0.0;
      for (int k = 0; k < batch_size; ++k) {
        const PretrainSample& s = data[rng.below(data.size())];
        actor.forward_cached(s.observation, cache);
        double y = std::tanh(cache.post.back()[0]);
        double err = y - s.target;
        batch_loss += err * err / n;
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[0] = 2.0 * err * (1.0 - y * y) / n;
        actor.backward(cache, upstream, grads);
      }
      actor.apply_update(grads, lr);
      epoch_loss += batch_loss / static_cast<double>(batches);
    }
    losses.push_back(epoch_loss);
  }
  return losses;
}

using PolicyFn = std::function<AgentAction(const StepResult& prev)>;

/// Greedy (noise-free) rollouts of an arbitrary policy; also records every
/// per-step acceleration change for jerk analysis.
inline std::vector<EpisodeMetrics> rollout_policy(
    Env& env, const EnvConfig& env_cfg, const RewardSpec& reward_spec,
    const PolicyFn& policy, int episodes, int steps_per_episode,
    std::uint64_t seed, std::vector<double>* jerk_records = nullptr) {
  std::vector<EpisodeMetrics> out;
  double dt = env_cfg.sim.time_step;
  for (int ep = 0; ep < episodes; ++ep) {
    StepResult sr = env.reset(env_cfg, mix_seed(seed, 100 + static_cast<std::uint64_t>(ep)));
    EpisodeMetrics m;
    m.episode = ep;
    bool in_maneuver = false;
    double maneuver_reward = 0.0;
    LcEventRecord pending_event{};
    double speed_sum = 0.0;
    for (int step = 0; step < steps_per_episode; ++step) {
      AgentAction action = policy(sr);
      sr = env.step(action);
      double r = reward(reward_spec, reward_input_from(sr));
      m.total_reward += r;
      speed_sum += sr.raw.speed;
      m.distance += sr.raw.speed * dt;
      ++m.steps;
      if (jerk_records) jerk_records->push_back(sr.raw.accel_delta);
      if (sr.flags.collision) ++m.flag_c;
      if (sr.flags.low_speed) ++m.flag_l;
      if (sr.flags.uncomfortable) ++m.flag_u;
      if (sr.flags.reverse) ++m.flag_r;
      if (sr.flags.lc_rejected) ++m.flag_g;
      if (sr.lc.instruction) ++m.lc_instructions;
      if (sr.lc.accepted) {
        ++m.lc_successes;
        in_maneuver = true;
        maneuver_reward = 0.0;
        pending_event = LcEventRecord{ep, m.steps, sr.lc.lead_headway,
                                      sr.lc.lag_headway, m.distance, 0.0};
      }
      if (in_maneuver) {
        maneuver_reward += r;
        if (sr.lc.completed || sr.episode_done) {
          pending_event.reward = maneuver_reward;
          m.lc_rewards.push_back(maneuver_reward);
          m.lc_events.push_back(pending_event);
          in_maneuver = false;
        }
      }
      if (sr.episode_done) break;
    }
    m.avg_speed = m.steps > 0 ? speed_sum / m.steps : 0.0;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace avdm

#endif  // AVDM_DDPG_HPP
