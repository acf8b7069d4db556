#ifndef AVDM_MOBIL_HPP
#define AVDM_MOBIL_HPP

#include <stdexcept>

namespace avdm {

/// MOBIL incentive/safety criterion parameters for background lane changes
/// (Kesting et al. symmetric variant).
struct MobilParams {
  double politeness = 0.5;        // p
  double threshold = 0.1;         // incentive gain needed [m/s^2]
  double safe_decel = 2.0;        // max braking imposed on the new follower [m/s^2]
  double cooldown = 5.0;          // per-vehicle time between lane changes [s]

  void validate() const {
    if (politeness < 0.0 || threshold < 0.0 || safe_decel <= 0.0 || cooldown < 0.0)
      throw std::invalid_argument("mobil: invalid parameters");
  }
};

/// Accelerations entering the MOBIL criterion, all computed with the same
/// car-following model. "old" = current lane assignment, "new" = after the
/// candidate change.
struct MobilContext {
  double self_old = 0.0;
  double self_new = 0.0;
  double new_follower_old = 0.0;
  double new_follower_new = 0.0;
  double old_follower_old = 0.0;
  double old_follower_new = 0.0;
};

inline bool mobil_accepts(const MobilContext& c, const MobilParams& p) {
  if (c.new_follower_new < -p.safe_decel) return false;  // safety first
  if (c.self_new < -p.safe_decel) return false;
  double incentive = (c.self_new - c.self_old) +
                     p.politeness * ((c.new_follower_new - c.new_follower_old) +
                                     (c.old_follower_new - c.old_follower_old));
  return incentive > p.threshold;
}

}  // namespace avdm

#endif  // AVDM_MOBIL_HPP
