// avdm: freeway decision-making workbench.
// Subcommands cover the full experiment cycle: train, eval, compare, serve,
// pretrain, report, reward-surface. Exit codes: 0 success, 2 configuration
// error, 3 runtime/numeric error, 4 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avdm/config_file.hpp"
#include "avdm/ddpg.hpp"
#include "avdm/env.hpp"
#include "avdm/env_client.hpp"
#include "avdm/env_server.hpp"
#include "avdm/eval.hpp"
#include "avdm/metrics.hpp"
#include "avdm/report.hpp"
#include "avdm/reward.hpp"

namespace fs = std::filesystem;
using namespace avdm;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_experiment(const CommonOpts& opts) {
  ConfigFile cf = opts.config_path.empty()
                      ? ConfigFile::parse_string("")
                      : ConfigFile::parse_file(opts.config_path);
  for (const auto& s : opts.overrides) cf.set(s);
  ExperimentConfig x = ExperimentConfig::load(cf);
  if (opts.seed) x.seed = *opts.seed;
  return x;
}

std::string default_out_dir(const CommonOpts& opts, std::uint64_t seed) {
  std::string stem = opts.config_path.empty()
                         ? std::string("run")
                         : fs::path(opts.config_path).stem().string();
  return "runs/" + stem + "_seed" + std::to_string(seed);
}

PolicyFn greedy_policy(DdpgAgent& agent) {
  return [&agent](const StepResult& prev) {
    return agent.select_action(prev.observation, false);
  };
}

void write_convergence_summary(std::ostream& os, const ExperimentConfig& x,
                               const TrainingLog& log) {
  os << "episodes: " << log.episodes.size() << "\n";
  if (log.numeric_errors > 0)
    os << "numeric_errors: " << log.numeric_errors << "\n";
  try {
    double bound = q_upper_bound(
        reward_upper_bound(x.reward, x.env.sim.desired_speed), x.train.gamma);
    ConvergenceReport r = convergence_report(
        log.episodes, bound, x.train.convergence_window, x.train.convergence_band,
        x.train.convergence_duration);
    os << "q_bound: " << format_double(bound) << "\n";
    os << "max_mean_q: " << format_double(r.max_mean_q) << "\n";
    os << "q_ratio: " << format_double(r.ratio) << "\n";
    os << "converged: " << (r.converged ? "yes" : "no") << "\n";
    if (r.converged) os << "converged_at: " << r.first_converged_episode << "\n";
    if (r.divergence_warning)
      os << "warning: mean Q exceeds 1.1x the evaluated bound\n";
  } catch (const std::invalid_argument&) {
    os << "q_bound: n/a (unbounded reward form)\n";
  }
}

int cmd_train(const CommonOpts& opts, const std::string& remote,
              std::string out_dir) {
  ExperimentConfig x = load_experiment(opts);
  if (out_dir.empty()) out_dir = default_out_dir(opts, x.seed);
  fs::create_directories(out_dir);

  std::unique_ptr<Env> env;
  if (remote.empty()) {
    env = std::make_unique<LocalEnv>();
  } else {
    auto [host, port] = parse_endpoint(remote);
    env = std::make_unique<RemoteEnv>(host, port);
  }

  DdpgAgent agent(x.train, x.env.sim, x.seed);
  if (x.pretrain.enabled) {
    std::cerr << "pretraining actor on " << x.pretrain.episodes
              << " teacher episodes\n";
    auto data = collect_idm_dataset(*env, x.env, x.pretrain.episodes,
                                    x.pretrain.steps_per_episode, x.seed);
    auto losses = pretrain_actor(agent.actor(), agent.head(), data,
                                 x.pretrain.epochs, x.pretrain.lr,
                                 x.pretrain.batch_size, x.seed);
    std::ofstream os(fs::path(out_dir) / "pretrain_loss.csv");
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e)
      os << e << "," << format_double(losses[e]) << "\n";
  }

  TrainCallbacks callbacks;
  callbacks.on_episode = [&](const EpisodeMetrics& m) {
    if ((m.episode + 1) % 100 == 0) {
      std::cerr << "episode " << m.episode + 1 << "  reward "
                << format_double(m.total_reward) << "  mean_q "
                << format_double(m.mean_q) << "  loss "
                << format_double(m.mean_critic_loss) << "\n";
    }
  };
  callbacks.on_checkpoint = [&](int episode, const DdpgAgent& a) {
    a.save((fs::path(out_dir) / ("checkpoint_ep" + std::to_string(episode + 1) +
                                 ".json"))
               .string());
  };

  TrainingLog log = train(*env, x.env, x.reward, x.train, x.seed, agent, callbacks);

  write_train_log((fs::path(out_dir) / "train_log.csv").string(), log.episodes);
  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), log.episodes);
  if (x.train.mode == ObsMode::LC)
    write_lc_events_csv((fs::path(out_dir) / "lc_events.csv").string(),
                        log.episodes);
  agent.save((fs::path(out_dir) / "checkpoint.json").string());
  std::ofstream summary(fs::path(out_dir) / "summary.txt");
  write_convergence_summary(summary, x, log);
  write_convergence_summary(std::cerr, x, log);
  std::cout << out_dir << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint, int episodes,
             std::string out_dir, const std::string& trajectory_path) {
  ExperimentConfig x = load_experiment(opts);
  if (out_dir.empty()) out_dir = default_out_dir(opts, x.seed) + "_eval";
  fs::create_directories(out_dir);
  DdpgAgent agent(x.train, x.env.sim, x.seed);
  agent.restore_file(checkpoint);

  LocalEnv env;
  std::ofstream trajectory;
  if (!trajectory_path.empty()) {
    trajectory.open(trajectory_path);
    if (!trajectory) throw std::runtime_error("cannot write " + trajectory_path);
  }
  std::vector<double> jerks;
  std::vector<EpisodeMetrics> metrics;
  for (int ep = 0; ep < episodes; ++ep) {
    // per-episode rollout so the trajectory sink can be attached to the
    // current simulation instance
    std::vector<EpisodeMetrics> one = rollout_policy(
        env, x.env, x.reward, greedy_policy(agent), 1, x.train.steps_per_episode,
        mix_seed(x.seed, 900 + static_cast<std::uint64_t>(ep)), &jerks);
    one[0].episode = ep;
    metrics.push_back(one[0]);
    if (trajectory.is_open() && env.simulation())
      env.simulation()->set_trajectory_sink(nullptr);
  }
  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), metrics);
  if (x.train.mode == ObsMode::LC)
    write_lc_events_csv((fs::path(out_dir) / "lc_events.csv").string(), metrics);
  render_reports(metrics, jerks, out_dir);
  std::cout << out_dir << "\n";
  return 0;
}

int cmd_compare(const CommonOpts& opts, const std::string& checkpoint,
                int episodes, std::string out_dir) {
  ExperimentConfig x = load_experiment(opts);
  if (out_dir.empty()) out_dir = default_out_dir(opts, x.seed) + "_compare";
  fs::create_directories(out_dir);
  DdpgAgent agent(x.train, x.env.sim, x.seed);
  agent.restore_file(checkpoint);

  LocalEnv env;
  std::vector<double> drl_jerks, idm_jerks;
  std::vector<EpisodeMetrics> drl = rollout_policy(
      env, x.env, x.reward, greedy_policy(agent), episodes,
      x.train.steps_per_episode, x.seed, &drl_jerks);
  std::vector<EpisodeMetrics> idm = rollout_policy(
      env, x.env, x.reward,
      [&](const StepResult& prev) {
        return idm_policy_action(prev, x.env.idm, x.env.sim);
      },
      episodes, x.train.steps_per_episode, x.seed, &idm_jerks);

  write_metrics_csv((fs::path(out_dir) / "drl_metrics.csv").string(), drl);
  write_metrics_csv((fs::path(out_dir) / "idm_metrics.csv").string(), idm);
  render_reports(drl, drl_jerks, (fs::path(out_dir) / "drl").string());
  render_reports(idm, idm_jerks, (fs::path(out_dir) / "idm").string());

  SpeedComparison sc = speed_comparison(drl, idm);
  JerkAnalysis jd = jerk_analysis(drl_jerks, kJerkThreshold, 2000, x.seed);
  JerkAnalysis ji = jerk_analysis(idm_jerks, kJerkThreshold, 2000, x.seed);
  std::ofstream os(fs::path(out_dir) / "comparison.txt");
  auto emit = [&](std::ostream& s) {
    s << "mean_speed_drl_mps: " << format_double(sc.mean_a) << "\n";
    s << "mean_speed_idm_mps: " << format_double(sc.mean_b) << "\n";
    s << "speed_pct_diff: " << format_double(100.0 * sc.pct_diff) << "%\n";
    s << "jerk_threshold_mps2: " << format_double(kJerkThreshold) << "\n";
    s << "jerk_exceedance_drl: " << format_double(100.0 * jd.exceedance_rate)
      << "% of " << jd.sampled << " sampled steps\n";
    s << "jerk_exceedance_idm: " << format_double(100.0 * ji.exceedance_rate)
      << "% of " << ji.sampled << " sampled steps\n";
  };
  emit(os);
  emit(std::cout);
  return 0;
}

int cmd_serve(const std::string& bind, const CommonOpts& opts) {
  auto [host, port] = parse_endpoint(bind);
  if (const char* env_port = std::getenv("AVDM_ENV_PORT")) {
    port = static_cast<std::uint16_t>(std::stoi(env_port));
  }
  EnvConfig defaults;
  if (!opts.config_path.empty()) defaults = load_experiment(opts).env;
  EnvServer server(host, port, defaults);
  std::cerr << "listening on " << host << ":" << server.port() << "\n";
  server.run();
  return 0;
}

int cmd_pretrain(const CommonOpts& opts, int episodes, int epochs,
                 std::string out_dir) {
  ExperimentConfig x = load_experiment(opts);
  if (episodes > 0) x.pretrain.episodes = episodes;
  if (epochs > 0) x.pretrain.epochs = epochs;
  if (out_dir.empty()) out_dir = default_out_dir(opts, x.seed) + "_pretrain";
  fs::create_directories(out_dir);
  LocalEnv env;
  DdpgAgent agent(x.train, x.env.sim, x.seed);
  auto data = collect_idm_dataset(env, x.env, x.pretrain.episodes,
                                  x.pretrain.steps_per_episode, x.seed);
  auto losses =
      pretrain_actor(agent.actor(), agent.head(), data, x.pretrain.epochs,
                     x.pretrain.lr, x.pretrain.batch_size, x.seed);
  std::ofstream os(fs::path(out_dir) / "pretrain_loss.csv");
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e)
    os << e << "," << format_double(losses[e]) << "\n";
  agent.save((fs::path(out_dir) / "checkpoint.json").string());
  std::cout << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  fs::path metrics_path = fs::path(in_dir) / "metrics.csv";
  if (!fs::exists(metrics_path)) metrics_path = fs::path(in_dir) / "train_log.csv";
  if (!fs::exists(metrics_path))
    throw std::runtime_error("no metrics.csv or train_log.csv in " + in_dir);
  std::vector<EpisodeMetrics> log = read_metrics_csv(metrics_path.string());
  render_reports(log, {}, out_dir);
  std::cout << out_dir << "\n";
  return 0;
}

int cmd_reward_surface(const CommonOpts& opts, const std::string& out_path) {
  ExperimentConfig x = load_experiment(opts);
  if (out_path.empty()) {
    write_reward_surface(std::cout, x.reward, 120.0, x.env.sim.desired_speed);
  } else {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    write_reward_surface(os, x.reward, 120.0, x.env.sim.desired_speed);
  }
  return 0;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config_path,
                            "experiment config file (key = value sections)");
  if (config_required) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides,
                  "override a config field, e.g. --set train.episodes=100");
  cmd->add_option("--seed", opts.seed, "seed overriding train.seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"freeway decision-making workbench: microsimulation, "
               "actor-critic training, and evaluation reports"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, compare_opts, serve_opts, pretrain_opts,
      surface_opts;
  std::string remote, train_out, eval_out, compare_out, pretrain_out;
  std::string checkpoint, eval_checkpoint, trajectory_path;
  std::string bind = "127.0.0.1:7777";
  std::string report_in, report_out, surface_out;
  int eval_episodes = 20, compare_episodes = 200;
  int pre_episodes = 0, pre_epochs = 0;

  auto* t = app.add_subcommand("train", "train an agent from a config file");
  add_common(t, train_opts, true);
  t->add_option("--remote", remote, "environment server HOST:PORT (default: in-process)");
  t->add_option("--out", train_out, "output directory (default runs/<config>_seed<seed>)");

  auto* e = app.add_subcommand("eval", "greedy rollouts of a checkpoint");
  add_common(e, eval_opts, true);
  e->add_option("--checkpoint", eval_checkpoint, "agent checkpoint")->required();
  e->add_option("--episodes", eval_episodes, "episode count");
  e->add_option("--out", eval_out, "output directory");
  e->add_option("--dump-trajectory", trajectory_path, "per-step trajectory CSV");

  auto* c = app.add_subcommand("compare",
                               "greedy checkpoint rollouts against the "
                               "car-following baseline on identical seeds");
  add_common(c, compare_opts, true);
  c->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
  c->add_option("--episodes", compare_episodes, "episode count");
  c->add_option("--out", compare_out, "output directory");

  auto* s = app.add_subcommand("serve", "run the environment server");
  s->add_option("--bind", bind, "bind address HOST:PORT (env AVDM_ENV_PORT overrides the port)");
  add_common(s, serve_opts, false);

  auto* p = app.add_subcommand("pretrain", "supervised actor pretraining from "
                                           "car-following teacher rollouts");
  add_common(p, pretrain_opts, true);
  p->add_option("--episodes", pre_episodes, "teacher episodes");
  p->add_option("--epochs", pre_epochs, "training epochs");
  p->add_option("--out", pretrain_out, "output directory");

  auto* r = app.add_subcommand("report", "render CSV/SVG reports from a run directory");
  r->add_option("--in", report_in, "run directory")->required();
  r->add_option("--out", report_out, "report directory")->required();

  auto* rs = app.add_subcommand("reward-surface",
                                "print the reward over a (gap, speed) grid as CSV");
  add_common(rs, surface_opts, false);
  rs->add_option("--out", surface_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return cmd_train(train_opts, remote, train_out);
    if (e->parsed())
      return cmd_eval(eval_opts, eval_checkpoint, eval_episodes, eval_out,
                      trajectory_path);
    if (c->parsed())
      return cmd_compare(compare_opts, checkpoint, compare_episodes, compare_out);
    if (s->parsed()) return cmd_serve(bind, serve_opts);
    if (p->parsed())
      return cmd_pretrain(pretrain_opts, pre_episodes, pre_epochs, pretrain_out);
    if (r->parsed()) return cmd_report(report_in, report_out);
    if (rs->parsed()) return cmd_reward_surface(surface_opts, surface_out);
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const NumericError& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return 3;
  } catch (const TransportError& ex) {
    std::cerr << "transport error: " << ex.what() << "\n";
    return 3;
  } catch (const ProtocolError& ex) {
    std::cerr << "protocol error: " << ex.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& ex) {
    std::cerr << "io error: " << ex.what() << "\n";
    return 4;
  } catch (const std::runtime_error& ex) {
    std::string what = ex.what();
    bool io = what.find("cannot write") != std::string::npos ||
              what.find("cannot read") != std::string::npos ||
              what.find("cannot open") != std::string::npos;
    std::cerr << (io ? "io error: " : "error: ") << what << "\n";
    return io ? 4 : 3;
  }
  return 0;
}
