#ifndef AVDM_REPORT_HPP
#define AVDM_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "avdm/eval.hpp"
#include "avdm/metrics.hpp"

namespace avdm {

namespace detail {

inline std::string svg_coord(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

// Minimal deterministic SVG line plot of one series.
inline std::string svg_line_plot(const std::vector<double>& ys,
                                 const std::string& title) {
  const double w = 640, h = 360, ml = 50, mr = 10, mt = 30, mb = 30;
  double lo = ys.empty() ? 0.0 : *std::min_element(ys.begin(), ys.end());
  double hi = ys.empty() ? 1.0 : *std::max_element(ys.begin(), ys.end());
  if (hi - lo < 1e-12) {
    hi += 1.0;
    lo -= 1.0;
  }
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\">\n";
  s += "<rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
  s += "<text x=\"20\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" +
       title + "</text>\n";
  s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < ys.size(); ++i) {
    double px = ml + (w - ml - mr) * (ys.size() > 1 ? static_cast<double>(i) /
                                                          (ys.size() - 1)
                                                    : 0.5);
    double py = h - mb - (h - mt - mb) * (ys[i] - lo) / (hi - lo);
    s += svg_coord(px) + "," + svg_coord(py) + " ";
  }
  s += "\"/>\n";
  s += "<text x=\"5\" y=\"" + svg_coord(mt) +
       "\" font-family=\"monospace\" font-size=\"10\">" + format_double(hi) +
       "</text>\n";
  s += "<text x=\"5\" y=\"" + svg_coord(h - mb) +
       "\" font-family=\"monospace\" font-size=\"10\">" + format_double(lo) +
       "</text>\n";
  s += "</svg>\n";
  return s;
}

// Histogram with an optional dashed threshold marker.
inline std::string svg_histogram(const std::vector<std::size_t>& bins,
                                 double bin_width, const std::string& title,
                                 double threshold = -1.0) {
  const double w = 640, h = 360, ml = 50, mr = 10, mt = 30, mb = 30;
  std::size_t hi = 1;
  for (auto b : bins) hi = std::max(hi, b);
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\">\n";
  s += "<rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
  s += "<text x=\"20\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" +
       title + "</text>\n";
  double bw = (w - ml - mr) / static_cast<double>(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    double bh = (h - mt - mb) * static_cast<double>(bins[i]) /
                static_cast<double>(hi);
    s += "<rect x=\"" + svg_coord(ml + bw * static_cast<double>(i)) + "\" y=\"" +
         svg_coord(h - mb - bh) + "\" width=\"" + svg_coord(bw) +
         "\" height=\"" + svg_coord(bh) + "\" fill=\"steelblue\"/>\n";
  }
  if (threshold > 0.0) {
    double tx = ml + (w - ml - mr) * threshold /
                (bin_width * static_cast<double>(bins.size()));
    s += "<line x1=\"" + svg_coord(tx) + "\" y1=\"" + svg_coord(mt) + "\" x2=\"" +
         svg_coord(tx) + "\" y2=\"" + svg_coord(h - mb) +
         "\" stroke=\"green\" stroke-dasharray=\"6,4\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write report file: " + p.string());
  os << content;
}

}  // namespace detail

/// Renders the standard report set for one training/evaluation log:
/// training_curves.csv plus reward/Q/loss line plots, the speed distribution
/// and the jerk histogram (with the comfort threshold marked). Output bytes
/// are a pure function of the inputs; empty logs produce header-only CSVs and
/// no SVG files.
inline void render_reports(const std::vector<EpisodeMetrics>& log,
                           const std::vector<double>& jerk_records,
                           const std::string& output_dir) {
  namespace fs = std::filesystem;
  fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw std::runtime_error("report: cannot create directory " + output_dir);

  std::string curves = "episode,total_reward,mean_q,mean_loss,avg_speed_mps\n";
  std::vector<double> rewards, qs, losses, speeds;
  for (const auto& m : log) {
    curves += std::to_string(m.episode) + ',' + format_double(m.total_reward) +
              ',' + format_double(m.mean_q) + ',' +
              format_double(m.mean_critic_loss) + ',' +
              format_double(m.avg_speed) + '\n';
    rewards.push_back(m.total_reward);
    qs.push_back(m.mean_q);
    losses.push_back(m.mean_critic_loss);
    speeds.push_back(m.avg_speed);
  }
  detail::write_file(dir / "training_curves.csv", curves);
  if (!log.empty()) {
    detail::write_file(dir / "reward_curve.svg",
                       detail::svg_line_plot(rewards, "total reward per episode"));
    detail::write_file(dir / "q_curve.svg",
                       detail::svg_line_plot(qs, "mean Q per episode"));
    detail::write_file(dir / "loss_curve.svg",
                       detail::svg_line_plot(losses, "mean critic loss per episode"));
  }

  // speed distribution over episodes, 0.5 m/s bins up to 25 m/s
  std::vector<std::size_t> speed_bins(50, 0);
  std::string speed_csv = "bin_low_mps,count\n";
  for (double v : speeds) {
    int b = std::clamp(static_cast<int>(v / 0.5), 0, 49);
    ++speed_bins[static_cast<std::size_t>(b)];
  }
  for (std::size_t i = 0; i < speed_bins.size(); ++i) {
    speed_csv += format_double(0.5 * static_cast<double>(i)) + ',' +
                 std::to_string(speed_bins[i]) + '\n';
  }
  detail::write_file(dir / "speed_distribution.csv", speed_csv);
  if (!log.empty()) {
    detail::write_file(
        dir / "speed_distribution.svg",
        detail::svg_histogram(speed_bins, 0.5, "episode average speed [m/s]"));
  }

  if (!jerk_records.empty()) {
    JerkAnalysis ja = jerk_analysis(jerk_records);
    std::string jerk_csv = "bin_low_mps2,count\n";
    for (std::size_t i = 0; i < ja.histogram.size(); ++i) {
      jerk_csv += format_double(JerkAnalysis::kBinWidth * static_cast<double>(i)) +
                  ',' + std::to_string(ja.histogram[i]) + '\n';
    }
    jerk_csv += "# exceedance over " + format_double(ja.threshold) + " m/s^2: " +
                format_double(ja.exceedance_rate) + "\n";
    detail::write_file(dir / "jerk_histogram.csv", jerk_csv);
    detail::write_file(dir / "jerk_histogram.svg",
                       detail::svg_histogram(ja.histogram, JerkAnalysis::kBinWidth,
                                             "per-step |accel change| [m/s^2]",
                                             ja.threshold));
  } else {
    detail::write_file(dir / "jerk_histogram.csv", "bin_low_mps2,count\n");
  }
}

}  // namespace avdm

#endif  // AVDM_REPORT_HPP
