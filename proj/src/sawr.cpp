#include "sawr/sawr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sawr {

double SawrConfig::default_beta_switch(const AnnealSchedule& sched) {
  if (sched.betas.empty()) throw std::invalid_argument("sawr: empty schedule");
  return 0.8 * *std::max_element(sched.betas.begin(), sched.betas.end());
}

AnnealResult sawr(const IsingInstance& inst, const SpinConfiguration& start, const SawrConfig& cfg) {
  if (std::isnan(cfg.beta_switch)) throw std::invalid_argument("sawr: beta_switch is NaN");
  cfg.schedule.validate();

  AnnealSchedule hot = cfg.schedule;
  const auto cut = std::find_if(hot.betas.begin(), hot.betas.end(),
                                [&](double b) { return b >= cfg.beta_switch; });
  hot.betas.erase(cut, hot.betas.end());

  AnnealResult result = simulated_annealing(inst, start, hot, cfg.seed);
  if (std::isinf(cfg.beta_switch) && cfg.beta_switch > 0) return result;

  if (!cfg.params) throw std::invalid_argument("sawr: learned pass requested without parameters");
  const EpisodeTrace pass = episode(inst, result.best_config, *cfg.params, Policy::greedy());
  if (pass.best_energy < result.best_energy) {
    result.best_energy = pass.best_energy;
    result.best_config = pass.best_config;
  }
  result.trace.push_back(result.best_energy);
  return result;
}

}  // namespace sawr
