#include "sawr/annealing.hpp"

#include <cmath>
#include <stdexcept>

#include "sawr/rng.hpp"

namespace sawr {

void AnnealSchedule::validate() const {
  if (sweeps_per_beta < 1) throw std::invalid_argument("schedule: sweeps_per_beta must be >= 1");
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (!std::isfinite(betas[k]) || betas[k] < 0.0) {
      throw std::invalid_argument("schedule: betas must be finite and non-negative");
    }
    if (k > 0 && betas[k] < betas[k - 1]) {
      throw std::invalid_argument("schedule: betas must be non-decreasing");
    }
  }
}

AnnealSchedule geometric_schedule(double beta_min, double beta_max, int steps, int sweeps_per_beta) {
  if (!std::isfinite(beta_min) || !std::isfinite(beta_max) || beta_min <= 0.0 ||
      beta_max < beta_min) {
    throw std::invalid_argument("geometric_schedule: need 0 < beta_min <= beta_max, both finite");
  }
  if (steps < 1 || sweeps_per_beta < 1) {
    throw std::invalid_argument("geometric_schedule: steps and sweeps must be >= 1");
  }
  AnnealSchedule sched;
  sched.sweeps_per_beta = sweeps_per_beta;
  sched.betas.resize(static_cast<std::size_t>(steps));
  const double ratio = beta_max / beta_min;
  for (int k = 0; k < steps; ++k) {
    sched.betas[k] =
        steps == 1 ? beta_min
                   : beta_min * std::pow(ratio, static_cast<double>(k) / (steps - 1));
  }
  return sched;
}

AnnealSchedule default_schedule() { return geometric_schedule(0.1, 5.0, 100, 1); }

bool metropolis_accept(double delta_e, double beta, double u) {
  if (delta_e <= 0.0) return true;
  return u < std::exp(-beta * delta_e);
}

AnnealResult simulated_annealing(const IsingInstance& inst, const SpinConfiguration& start,
                                 const AnnealSchedule& sched, std::uint64_t seed) {
  sched.validate();
  if (start.size() != inst.size() || !start.valid()) {
    throw std::invalid_argument("simulated_annealing: start configuration invalid for instance");
  }
  Rng rng(seed);
  const std::size_t n = inst.size();

  SpinConfiguration current = with_energy(inst, start);
  AnnealResult result;
  result.best_config = current;
  result.best_energy = *current.cached_energy;
  result.trace.reserve(sched.betas.size());

  for (double beta : sched.betas) {
    for (int sweep = 0; sweep < sched.sweeps_per_beta; ++sweep) {
      for (std::size_t p = 0; p < n; ++p) {
        const NodeId i(static_cast<std::uint32_t>(rng.index(n)));
        const double u = rng.uniform01();
        const double delta = flip_delta(inst, current, i);
        if (!metropolis_accept(delta, beta, u)) continue;
        apply_flip(current, i, delta);
        ++result.accepted_moves;
        if (*current.cached_energy < result.best_energy) {
          result.best_energy = *current.cached_energy;
          result.best_config = current;
        }
      }
    }
    result.trace.push_back(result.best_energy);
  }
  return result;
}

}  // namespace sawr
