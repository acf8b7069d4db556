#ifndef AVDM_IDM_HPP
#define AVDM_IDM_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace avdm {

/// Intelligent Driver Model parameters. Defaults follow the standard
/// published parameter set for freeway traffic.
struct IdmParams {
  double desired_speed = 80.0 / 3.6;  // v0 [m/s]
  double time_headway = 1.5;          // T [s]
  double min_gap = 2.0;               // s0 [m]
  double max_accel = 1.5;             // a [m/s^2]
  double comfort_decel = 2.0;         // b [m/s^2]
  double exponent = 4.0;              // delta
  double emergency_decel = 8.0;       // hard clamp [m/s^2], positive magnitude

  void validate() const {
    if (desired_speed <= 0 || time_headway <= 0 || min_gap <= 0 ||
        max_accel <= 0 || comfort_decel <= 0 || emergency_decel <= 0) {
      throw std::invalid_argument("idm: all parameters must be positive");
    }
  }
};

/// IDM acceleration for a vehicle at speed v, closing speed dv = v - v_lead,
/// and net gap s to its leader. The result is clamped to
/// [-emergency_decel, max_accel].
///
/// s must be positive; a non-positive gap is a collision and must be handled
/// by the caller before asking the model for an acceleration.
inline double idm_acceleration(double v, double dv, double s,
                               const IdmParams& p = IdmParams{}) {
  if (s <= 0.0) {
    throw std::domain_error("idm_acceleration: gap must be positive");
  }
  double s_star = p.min_gap +
                  std::max(0.0, v * p.time_headway +
                                    v * dv / (2.0 * std::sqrt(p.max_accel *
                                                              p.comfort_decel)));
  double a = p.max_accel * (1.0 - std::pow(v / p.desired_speed, p.exponent) -
                            (s_star / s) * (s_star / s));
  return std::clamp(a, -p.emergency_decel, p.max_accel);
}

/// Free-road IDM acceleration (no leader).
inline double idm_free_acceleration(double v, const IdmParams& p = IdmParams{}) {
  double a = p.max_accel * (1.0 - std::pow(v / p.desired_speed, p.exponent));
  return std::clamp(a, -p.emergency_decel, p.max_accel);
}

}  // namespace avdm

#endif  // AVDM_IDM_HPP
