#ifndef AVDM_EVAL_HPP
#define AVDM_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "avdm/ddpg.hpp"
#include "avdm/metrics.hpp"
#include "avdm/rng.hpp"

namespace avdm {

// Reference lane-change statistics from published NGSIM site measurements.
// Used for side-by-side rendering only, never recomputed.
struct NgsimReference {
  const char* site;
  double lc_freq_veh_km_ln;
  double lead_headway_s;
  double lag_headway_s;
};

inline constexpr NgsimReference kNgsimUs101{"US-101", 0.63, 2.78, 3.14};
inline constexpr NgsimReference kNgsimI80{"I-80", 0.80, 1.49, 1.71};

/// Steady-state ceiling of the average action value: r_max / (1 - gamma).
inline double q_upper_bound(double max_step_reward, double gamma) {
  if (gamma >= 1.0 || gamma < 0.0)
    throw std::invalid_argument("q_upper_bound: gamma must be in [0, 1)");
  return max_step_reward / (1.0 - gamma);
}

struct ConvergenceReport {
  bool converged = false;
  int first_converged_episode = -1;
  double max_mean_q = 0.0;
  double bound = 0.0;
  double ratio = 0.0;        // max_mean_q / bound
  bool divergence_warning = false;  // ratio above 1.1
};

inline ConvergenceReport convergence_report(const std::vector<EpisodeMetrics>& log,
                                            double bound, int window = 100,
                                            double band = 0.1, int duration = 200) {
  if (log.empty()) throw std::invalid_argument("convergence_report: empty log");
  ConvergenceTracker tracker(window, band, duration);
  ConvergenceReport r;
  r.bound = bound;
  for (const auto& m : log) {
    tracker.add(m.total_reward);
    r.max_mean_q = std::max(r.max_mean_q, m.mean_q);
  }
  r.converged = tracker.converged();
  r.first_converged_episode = tracker.converged_at();
  r.ratio = bound != 0.0 ? r.max_mean_q / bound : 0.0;
  r.divergence_warning = r.ratio > 1.1;
  return r;
}

struct SpeedComparison {
  double mean_a = 0.0;   // first argument, m/s
  double mean_b = 0.0;   // second argument (the baseline), m/s
  double pct_diff = 0.0; // (a - b) / b
};

/// Mean of per-episode average speeds for both logs; pct_diff is relative to
/// the second argument.
inline SpeedComparison speed_comparison(const std::vector<EpisodeMetrics>& a,
                                        const std::vector<EpisodeMetrics>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("speed_comparison: empty input");
  SpeedComparison c;
  for (const auto& m : a) c.mean_a += m.avg_speed;
  for (const auto& m : b) c.mean_b += m.avg_speed;
  c.mean_a /= static_cast<double>(a.size());
  c.mean_b /= static_cast<double>(b.size());
  c.pct_diff = c.mean_b != 0.0 ? (c.mean_a - c.mean_b) / c.mean_b : 0.0;
  return c;
}

struct JerkAnalysis {
  double exceedance_rate = 0.0;
  std::size_t sampled = 0;
  double threshold = kJerkThreshold;
  // fixed bins, 0.2 m/s^2 wide over [0, 10); the last bin also collects
  // anything at or beyond 10
  static constexpr int kBins = 50;
  static constexpr double kBinWidth = 0.2;
  std::vector<std::size_t> histogram = std::vector<std::size_t>(kBins, 0);
};

/// Seeded uniform sample (without replacement) of per-step |accel change|
/// values; when the population is smaller than sample_size the whole
/// population is used.
inline JerkAnalysis jerk_analysis(const std::vector<double>& records,
                                  double threshold = kJerkThreshold,
                                  std::size_t sample_size = 2000,
                                  std::uint64_t seed = 0) {
  if (records.empty()) throw std::invalid_argument("jerk_analysis: no records");
  JerkAnalysis out;
  out.threshold = threshold;
  std::vector<double> sample;
  if (records.size() <= sample_size) {
    sample = records;
  } else {
    // partial Fisher-Yates over an index vector
    Rng rng(mix_seed(seed, 23));
    std::vector<std::size_t> idx(records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    sample.reserve(sample_size);
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
      sample.push_back(records[idx[i]]);
    }
  }
  std::size_t exceed = 0;
  for (double da : sample) {
    if (da > threshold) ++exceed;
    int bin = static_cast<int>(da / JerkAnalysis::kBinWidth);
    bin = std::clamp(bin, 0, JerkAnalysis::kBins - 1);
    ++out.histogram[static_cast<std::size_t>(bin)];
  }
  out.sampled = sample.size();
  out.exceedance_rate = static_cast<double>(exceed) / static_cast<double>(sample.size());
  return out;
}

struct LcBucketRow {
  int episode_lo = 0;  // inclusive
  int episode_hi = 0;  // inclusive
  int episodes = 0;
  double mean_instructions = 0.0;
  double success_rate = 0.0;  // successes / instructions
  std::optional<double> mean_success_reward;
  double actual_lc_freq = 0.0;  // successful changes per agent-km
};

struct LcStatistics {
  std::vector<LcBucketRow> buckets;
  double mean_lead_headway = 0.0;  // over every recorded change
  double mean_lag_headway = 0.0;
  int total_events = 0;
};

inline std::vector<std::pair<int, int>> default_lc_buckets(int max_episode) {
  std::vector<std::pair<int, int>> b;
  if (max_episode >= 0) b.push_back({0, std::min(49, max_episode)});
  if (max_episode >= 50) b.push_back({50, std::min(99, max_episode)});
  if (max_episode >= 100) b.push_back({100, std::min(499, max_episode)});
  if (max_episode >= 500) b.push_back({500, std::min(999, max_episode)});
  for (int lo = 1000; lo <= max_episode; lo += 1000)
    b.push_back({lo, std::min(lo + 999, max_episode)});
  return b;
}

/// Lane-change training statistics per episode bucket. The "actual frequency"
/// column is successful agent lane changes per kilometre driven by the agent
/// (the exposure formula is printed in the rendered report header).
inline LcStatistics lc_statistics(const std::vector<EpisodeMetrics>& log,
                                  const std::vector<std::pair<int, int>>& buckets) {
  LcStatistics out;
  double lead_sum = 0.0, lag_sum = 0.0;
  for (const auto& m : log) {
    for (const auto& e : m.lc_events) {
      lead_sum += e.lead_headway;
      lag_sum += e.lag_headway;
      ++out.total_events;
    }
  }
  if (out.total_events > 0) {
    out.mean_lead_headway = lead_sum / out.total_events;
    out.mean_lag_headway = lag_sum / out.total_events;
  }
  for (auto [lo, hi] : buckets) {
    LcBucketRow row;
    row.episode_lo = lo;
    row.episode_hi = hi;
    long instructions = 0, successes = 0;
    double reward_sum = 0.0, km = 0.0;
    for (const auto& m : log) {
      if (m.episode < lo || m.episode > hi) continue;
      ++row.episodes;
      instructions += m.lc_instructions;
      successes += m.lc_successes;
      km += m.distance / 1000.0;
      for (double r : m.lc_rewards) reward_sum += r;
    }
    if (row.episodes == 0) continue;
    row.mean_instructions =
        static_cast<double>(instructions) / static_cast<double>(row.episodes);
    row.success_rate = instructions > 0 ? static_cast<double>(successes) /
                                              static_cast<double>(instructions)
                                        : 0.0;
    if (successes > 0)
      row.mean_success_reward = reward_sum / static_cast<double>(successes);
    row.actual_lc_freq = km > 0.0 ? static_cast<double>(successes) / km : 0.0;
    out.buckets.push_back(row);
  }
  return out;
}

inline std::string lc_statistics_csv(const LcStatistics& s) {
  std::ostringstream os;
  os << "# actual_lc_freq = successful lane changes / km driven by the agent "
        "(per-lane exposure of the subject vehicle)\n";
  os << "episodes,mean_lc_instructions,success_rate,mean_success_reward,"
        "actual_lc_freq_per_km\n";
  for (const auto& r : s.buckets) {
    os << r.episode_lo << "-" << r.episode_hi << ','
       << format_double(r.mean_instructions) << ','
       << format_double(r.success_rate) << ',';
    if (r.mean_success_reward) {
      os << format_double(*r.mean_success_reward);
    } else {
      os << "-";
    }
    os << ',' << format_double(r.actual_lc_freq) << "\n";
  }
  os << "# headways at accepted changes: lead " << format_double(s.mean_lead_headway)
     << " s, lag " << format_double(s.mean_lag_headway) << " s\n";
  os << "# reference " << kNgsimUs101.site << ": lead " << kNgsimUs101.lead_headway_s
     << " s, lag " << kNgsimUs101.lag_headway_s << " s, freq "
     << kNgsimUs101.lc_freq_veh_km_ln << " veh/km/ln\n";
  os << "# reference " << kNgsimI80.site << ": lead " << kNgsimI80.lead_headway_s
     << " s, lag " << kNgsimI80.lag_headway_s << " s, freq "
     << kNgsimI80.lc_freq_veh_km_ln << " veh/km/ln\n";
  return os.str();
}

}  // namespace avdm

#endif  // AVDM_EVAL_HPP
