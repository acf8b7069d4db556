#ifndef AVDM_REPLAY_HPP
#define AVDM_REPLAY_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "avdm/rng.hpp"

namespace avdm {

struct Transition {
  std::vector<double> observation;
  std::vector<double> action;  // raw actor output, pre-mapping
  double reward = 0.0;
  std::vector<double> next_observation;
  bool terminal = false;  // terminal transitions never bootstrap
};

/// Fixed-capacity FIFO ring of transitions with seeded uniform sampling
/// (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed)
      : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw std::invalid_argument("replay: capacity must be > 0");
    storage_.reserve(capacity);
  }

  void store(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }

  const Transition& sample_one() {
    if (storage_.empty()) throw std::logic_error("replay: sample from empty buffer");
    return storage_[rng_.below(storage_.size())];
  }

  std::vector<const Transition*> sample(std::size_t batch) {
    std::vector<const Transition*> out(batch);
    for (std::size_t i = 0; i < batch; ++i) out[i] = &sample_one();
    return out;
  }

  const Transition& at(std::size_t logical) const {
    // logical 0 = oldest stored transition
    if (logical >= storage_.size()) throw std::out_of_range("replay: index");
    if (storage_.size() < capacity_) return storage_[logical];
    return storage_[(head_ + logical) % capacity_];
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next overwrite position once full
  std::vector<Transition> storage_;
  Rng rng_;
};

}  // namespace avdm

#endif  // AVDM_REPLAY_HPP
