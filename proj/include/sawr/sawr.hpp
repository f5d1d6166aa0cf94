#pragma once

#include <cstdint>
#include <limits>

#include "sawr/agent.hpp"
#include "sawr/annealing.hpp"

namespace sawr {

/// Annealing with the low-temperature Metropolis phase replaced by one greedy
/// pass of the learned flip policy.
struct SawrConfig {
  AnnealSchedule schedule;
  double beta_switch = std::numeric_limits<double>::infinity();
  const QNetwork* params = nullptr;
  std::uint64_t seed = 0;

  /// beta_switch = 0.8 * max(betas).
  static double default_beta_switch(const AnnealSchedule& sched);
};

/// SA over the schedule entries with beta < beta_switch, then (unless
/// beta_switch is +inf) one greedy episode from the best SA state. Returns the
/// lowest state seen across start, SA phase, and episode; the episode
/// contributes one trace entry.
AnnealResult sawr(const IsingInstance& inst, const SpinConfiguration& start, const SawrConfig& cfg);

}  // namespace sawr
