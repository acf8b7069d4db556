#ifndef AVDM_OU_NOISE_HPP
#define AVDM_OU_NOISE_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "avdm/rng.hpp"

namespace avdm {

/// Ornstein-Uhlenbeck process for temporally correlated exploration noise,
/// one state per action dimension. Discrete form:
///   x_i <- x_i + theta * (0 - x_i) + decay * sigma_i * N(0, 1)
/// Per-dimension sigmas allow a wider process on selected dimensions; the
/// decay factor shrinks all of them together across episodes.
class OuNoise {
 public:
  OuNoise(std::vector<double> sigmas, double theta, std::uint64_t seed)
      : theta_(theta), sigmas_(std::move(sigmas)), x_(sigmas_.size(), 0.0),
        rng_(seed) {}

  void set_decay(double decay) { decay_ = decay; }
  double decay() const { return decay_; }

  void reset() { std::fill(x_.begin(), x_.end(), 0.0); }

  const std::vector<double>& sample() {
    for (std::size_t i = 0; i < x_.size(); ++i) {
      x_[i] += theta_ * (0.0 - x_[i]) + decay_ * sigmas_[i] * rng_.gaussian();
    }
    return x_;
  }

 private:
  double theta_;
  double decay_ = 1.0;
  std::vector<double> sigmas_;
  std::vector<double> x_;
  Rng rng_;
};

}  // namespace avdm

#endif  // AVDM_OU_NOISE_HPP
