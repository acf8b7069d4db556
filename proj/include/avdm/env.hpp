#ifndef AVDM_ENV_HPP
#define AVDM_ENV_HPP

#include <memory>
#include <optional>

#include "avdm/idm.hpp"
#include "avdm/mobil.hpp"
#include "avdm/simulation.hpp"
#include "avdm/sim_types.hpp"

namespace avdm {

/// Everything needed to build one simulation scene.
struct EnvConfig {
  SimConfig sim;
  IdmParams idm;
  MobilParams mobil;

  void validate() const {
    sim.validate();
    idm.validate();
    mobil.validate();
  }
};

/// Environment handle exposed to the trainer. The in-process variant wraps a
/// Simulation directly; the remote variant (env_client.hpp) speaks the wire
/// protocol to an environment server. Both yield bit-identical episodes for
/// identical (config, seed, action sequence).
class Env {
 public:
  virtual ~Env() = default;
  virtual StepResult reset(const EnvConfig& config, std::uint64_t seed) = 0;
  virtual StepResult step(const AgentAction& action) = 0;
};

class LocalEnv : public Env {
 public:
  StepResult reset(const EnvConfig& config, std::uint64_t seed) override {
    config.validate();
    sim_.emplace(config.sim, config.idm, config.mobil);
    return sim_->reset(seed);
  }

  StepResult step(const AgentAction& action) override {
    if (!sim_) throw std::logic_error("step before reset");
    return sim_->step(action);
  }

  Simulation* simulation() { return sim_ ? &*sim_ : nullptr; }

 private:
  std::optional<Simulation> sim_;
};

}  // namespace avdm

#endif  // AVDM_ENV_HPP
