#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sawr/gnn.hpp"
#include "sawr/ising.hpp"

namespace sawr {

/// Spin-flip environment: each spin may be flipped once, the episode ends
/// when all have been flipped, and the reward is the energy decrease.
class EpisodeState {
public:
  EpisodeState(const IsingInstance& inst, const SpinConfiguration& start);

  /// Flips `action` and returns the reward E(s_t) - E(s_{t+1}).
  double step(NodeId action);

  const SpinConfiguration& config() const { return config_; }
  const ActionMask& flipped() const { return flipped_; }
  std::size_t t() const { return t_; }
  bool terminal() const { return t_ == config_.size(); }
  double energy() const { return *config_.cached_energy; }
  double best_energy() const { return best_energy_; }
  const SpinConfiguration& best_config() const { return best_config_; }

private:
  const IsingInstance* inst_;
  SpinConfiguration config_;
  ActionMask flipped_;
  std::size_t t_ = 0;
  double best_energy_;
  SpinConfiguration best_config_;
};

struct Policy {
  enum class Kind { Greedy, EpsilonGreedy };
  Kind kind = Kind::Greedy;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  static Policy greedy() { return {}; }
  static Policy epsilon_greedy(double eps, std::uint64_t seed) {
    return {Kind::EpsilonGreedy, eps, seed};
  }
};

struct EpisodeStep {
  NodeId action;
  double reward;        // E(s_t) - E(s_{t+1})
  double energy_after;  // E(s_{t+1})
};

struct EpisodeTrace {
  SpinConfiguration start;
  std::vector<EpisodeStep> steps;
  double start_energy = 0.0;
  double best_energy = 0.0;
  SpinConfiguration best_config;  // lowest-energy state among s_0 .. s_T
  std::size_t best_step = 0;      // flips applied when the best state was reached
  SpinConfiguration final_config;
};

/// argmax over unmasked entries, lowest index on ties.
NodeId greedy_action(const Eigen::VectorXd& q, const ActionMask& mask);

/// Runs one full episode of N flips, re-encoding the state before every
/// greedy choice. Under epsilon-greedy each step first draws u = uniform01();
/// if u < epsilon the action is the index(remaining)-th unmasked node.
EpisodeTrace episode(const IsingInstance& inst, const SpinConfiguration& start,
                     const QNetwork& params, const Policy& policy);

/// (spins, flipped) pair stored as bit vectors; bit set = spin +1 / flipped.
struct StateSnapshot {
  std::vector<bool> spin_up;
  std::vector<bool> flipped;

  SpinConfiguration config() const;
  ActionMask mask() const;
  friend bool operator==(const StateSnapshot&, const StateSnapshot&) = default;
};

struct NStepTransition {
  std::shared_ptr<const IsingInstance> instance;
  StateSnapshot state;
  NodeId action;
  double ret = 0.0;  // sum_{k < min(n, T - t)} gamma^k r_{t+k}
  StateSnapshot next;
  bool terminal_within_n = false;
};

/// One transition per time step; returns truncate at the terminal state.
std::vector<NStepTransition> make_transitions(const EpisodeTrace& trace, int n, double gamma,
                                              std::shared_ptr<const IsingInstance> instance = {});

/// Bounded FIFO; sampling is uniform with replacement via Rng::index.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(NStepTransition tr);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const NStepTransition& operator[](std::size_t i) const;  // 0 = oldest
  std::vector<const NStepTransition*> sample(std::size_t batch, Rng& rng) const;

private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest element once full
  std::vector<NStepTransition> items_;
};

/// ret if the transition reaches the terminal state, otherwise
/// ret + gamma^n * max_a Q(s_{t+n}, a; target).
double td_target(const NStepTransition& tr, const QNetwork& target, double gamma, int n);

struct TrainConfig {
  std::uint32_t chimera_n = 3;
  int episodes = 2000;
  int n_step = 5;
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;
  std::size_t buffer_capacity = 50000;
  std::size_t batch_size = 64;
  int updates_per_episode = 1;
  int target_sync = 500;  // gradient steps between target copies
  double learning_rate = 1e-4;
  double sa_preprocess_probability = 0.1;
  int embed_dim = 64;
  int layers = 3;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> checkpoint;
  int checkpoint_every = 0;  // episodes; 0 = only at the end

  void validate() const;
};

struct TrainLogRow {
  int episode;
  double epsilon;
  std::optional<double> mean_loss;  // absent before the first update
  double best_energy;
};

struct TrainResult {
  QNetwork params;
  std::vector<TrainLogRow> log;
  std::size_t max_buffer_size = 0;
  std::int64_t gradient_steps = 0;
  bool diverged = false;  // a non-finite loss was observed
};

double epsilon_at(const TrainConfig& cfg, int episode);

/// One mini-batch semi-gradient step on mean squared TD error.
/// Returns the batch loss.
double gradient_step(QNetwork& online, const QNetwork& target, Adam<double>& opt,
                     const std::vector<const NStepTransition*>& batch, double gamma, int n);

TrainResult train(const TrainConfig& cfg);
TrainResult train(const TrainConfig& cfg, QNetwork initial);

void write_train_log(const std::vector<TrainLogRow>& rows, const std::filesystem::path& path);

}  // namespace sawr
