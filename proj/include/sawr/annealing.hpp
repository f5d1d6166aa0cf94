#pragma once

#include <cstdint>
#include <vector>

#include "sawr/ising.hpp"

namespace sawr {

struct AnnealSchedule {
  std::vector<double> betas;  // non-decreasing inverse temperatures
  int sweeps_per_beta = 1;

  void validate() const;
};

struct AnnealResult {
  SpinConfiguration best_config;
  double best_energy = 0.0;
  std::vector<double> trace;  // best-so-far energy after each beta
  std::uint64_t accepted_moves = 0;

  friend bool operator==(const AnnealResult& a, const AnnealResult& b) {
    return a.best_config == b.best_config && a.best_energy == b.best_energy &&
           a.trace == b.trace && a.accepted_moves == b.accepted_moves;
  }
};

/// betas[k] = beta_min * (beta_max / beta_min)^(k / (steps - 1)).
AnnealSchedule geometric_schedule(double beta_min, double beta_max, int steps, int sweeps_per_beta);

/// 0.1 -> 5.0, 100 steps, one sweep each.
AnnealSchedule default_schedule();

/// u < min(1, exp(-beta * delta_e)).
bool metropolis_accept(double delta_e, double beta, double u);

/// Single-spin-flip Metropolis annealing. Every proposal draws a node with
/// Rng::index(N) and then an acceptance uniform with Rng::uniform01(), in that
/// order, regardless of the sign of the energy change. The result holds the
/// lowest-energy state visited, the start included.
AnnealResult simulated_annealing(const IsingInstance& inst, const SpinConfiguration& start,
                                 const AnnealSchedule& sched, std::uint64_t seed);

}  // namespace sawr
