#ifndef AVDM_METRICS_HPP
#define AVDM_METRICS_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace avdm {

struct LcEventRecord {
  int episode = 0;
  int step = 0;
  double lead_headway = 0.0;  // [s], target lane at acceptance
  double lag_headway = 0.0;   // [s]
  double position = 0.0;      // agent distance from road start [m]
  double reward = 0.0;        // cumulative reward over the maneuver
};

/// Per-episode evaluation record mirroring the training telemetry.
struct EpisodeMetrics {
  int episode = 0;
  double total_reward = 0.0;
  double mean_q = 0.0;
  double mean_critic_loss = 0.0;
  double avg_speed = 0.0;  // [m/s]
  int steps = 0;
  int flag_c = 0;
  int flag_l = 0;
  int flag_u = 0;
  int flag_r = 0;
  int flag_g = 0;
  int lc_instructions = 0;
  int lc_successes = 0;
  double distance = 0.0;  // agent travel [m]
  std::vector<double> lc_rewards;       // one per successful lane change
  std::vector<LcEventRecord> lc_events;
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

inline constexpr const char* kTrainLogHeader =
    "episode,total_reward,mean_q,mean_loss,avg_speed_mps,collisions,"
    "lc_instructions,lc_successes";

inline std::string train_log_row(const EpisodeMetrics& m) {
  std::string s;
  s += std::to_string(m.episode);
  s += ',';
  s += format_double(m.total_reward);
  s += ',';
  s += format_double(m.mean_q);
  s += ',';
  s += format_double(m.mean_critic_loss);
  s += ',';
  s += format_double(m.avg_speed);
  s += ',';
  s += std::to_string(m.flag_c);
  s += ',';
  s += std::to_string(m.lc_instructions);
  s += ',';
  s += std::to_string(m.lc_successes);
  return s;
}

inline constexpr const char* kMetricsHeader =
    "episode,total_reward,mean_q,mean_loss,avg_speed_mps,steps,flag_c,flag_l,"
    "flag_u,flag_r,flag_g,lc_instructions,lc_successes,distance_m";

inline std::string metrics_row(const EpisodeMetrics& m) {
  std::ostringstream os;
  os << m.episode << ',' << format_double(m.total_reward) << ','
     << format_double(m.mean_q) << ',' << format_double(m.mean_critic_loss) << ','
     << format_double(m.avg_speed) << ',' << m.steps << ',' << m.flag_c << ','
     << m.flag_l << ',' << m.flag_u << ',' << m.flag_r << ',' << m.flag_g << ','
     << m.lc_instructions << ',' << m.lc_successes << ','
     << format_double(m.distance);
  return os.str();
}

inline void write_train_log(const std::string& path,
                            const std::vector<EpisodeMetrics>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write log: " + path);
  os << kTrainLogHeader << "\n";
  for (const auto& m : log) os << train_log_row(m) << "\n";
}

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpisodeMetrics>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write metrics: " + path);
  os << kMetricsHeader << "\n";
  for (const auto& m : log) os << metrics_row(m) << "\n";
}

inline void write_lc_events_csv(const std::string& path,
                                const std::vector<EpisodeMetrics>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write lc events: " + path);
  os << "episode,step,lead_headway_s,lag_headway_s,position_m,reward\n";
  for (const auto& m : log) {
    for (const auto& e : m.lc_events) {
      os << e.episode << ',' << e.step << ',' << format_double(e.lead_headway)
         << ',' << format_double(e.lag_headway) << ','
         << format_double(e.position) << ',' << format_double(e.reward) << "\n";
    }
  }
}

/// Parses a CSV produced by write_metrics_csv or write_train_log (the first
/// five columns are shared; missing columns default to zero).
inline std::vector<EpisodeMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read metrics: " + path);
  std::string line;
  if (!std::getline(is, line)) return {};
  bool train_format = line == kTrainLogHeader;
  if (!train_format && line != kMetricsHeader)
    throw std::runtime_error("unrecognized metrics header in " + path);
  std::vector<EpisodeMetrics> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    EpisodeMetrics m;
    m.episode = std::stoi(cells.at(0));
    m.total_reward = std::stod(cells.at(1));
    m.mean_q = std::stod(cells.at(2));
    m.mean_critic_loss = std::stod(cells.at(3));
    m.avg_speed = std::stod(cells.at(4));
    if (train_format) {
      m.flag_c = std::stoi(cells.at(5));
      m.lc_instructions = std::stoi(cells.at(6));
      m.lc_successes = std::stoi(cells.at(7));
    } else {
      m.steps = std::stoi(cells.at(5));
      m.flag_c = std::stoi(cells.at(6));
      m.flag_l = std::stoi(cells.at(7));
      m.flag_u = std::stoi(cells.at(8));
      m.flag_r = std::stoi(cells.at(9));
      m.flag_g = std::stoi(cells.at(10));
      m.lc_instructions = std::stoi(cells.at(11));
      m.lc_successes = std::stoi(cells.at(12));
      m.distance = std::stod(cells.at(13));
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace avdm

#endif  // AVDM_METRICS_HPP
