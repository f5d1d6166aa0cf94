#include "sawr/agent.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sawr/annealing.hpp"
#include "sawr/format.hpp"
#include "sawr/rng.hpp"

namespace sawr {

EpisodeState::EpisodeState(const IsingInstance& inst, const SpinConfiguration& start)
    : inst_(&inst),
      config_(with_energy(inst, start)),
      flipped_(ActionMask::Constant(static_cast<Eigen::Index>(start.size()), false)),
      best_energy_(*config_.cached_energy),
      best_config_(config_) {
  if (!start.valid()) throw std::invalid_argument("episode: start configuration is not +-1");
}

double EpisodeState::step(NodeId action) {
  if (action.index >= config_.size()) throw std::out_of_range("episode: action out of range");
  if (flipped_[action]) throw std::logic_error("episode: spin already flipped");
  const double delta = flip_delta(*inst_, config_, action);
  apply_flip(config_, action, delta);
  flipped_[action] = true;
  ++t_;
  if (*config_.cached_energy < best_energy_) {
    best_energy_ = *config_.cached_energy;
    best_config_ = config_;
  }
  return -delta;
}

NodeId greedy_action(const Eigen::VectorXd& q, const ActionMask& mask) {
  if (q.size() != mask.size()) throw std::invalid_argument("greedy_action: size mismatch");
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (mask[i]) continue;
    if (best < 0 || q[i] > q[best]) best = i;
  }
  if (best < 0) throw std::logic_error("greedy_action: every action is masked");
  return NodeId(static_cast<std::uint32_t>(best));
}

EpisodeTrace episode(const IsingInstance& inst, const SpinConfiguration& start,
                     const QNetwork& params, const Policy& policy) {
  EpisodeState state(inst, start);
  EpisodeTrace trace;
  trace.start = state.config();
  trace.start_energy = state.energy();
  trace.steps.reserve(inst.size());
  Rng rng(policy.seed);

  while (!state.terminal()) {
    NodeId action;
    if (policy.kind == Policy::Kind::EpsilonGreedy && rng.uniform01() < policy.epsilon) {
      std::size_t pick = rng.index(inst.size() - state.t());
      for (Eigen::Index i = 0;; ++i) {
        if (state.flipped()[i]) continue;
        if (pick-- == 0) {
          action = NodeId(static_cast<std::uint32_t>(i));
          break;
        }
      }
    } else {
      const auto fp = forward(inst, state.config(), params);
      action = greedy_action(fp.q, state.flipped());
    }
    const double reward = state.step(action);
    trace.steps.push_back({action, reward, state.energy()});
    if (state.best_energy() == state.energy() && state.best_config() == state.config()) {
      trace.best_step = state.t();
    }
  }
  trace.best_energy = state.best_energy();
  trace.best_config = state.best_config();
  trace.final_config = state.config();
  return trace;
}

// ---------------------------------------------------------------------------
// transitions

SpinConfiguration StateSnapshot::config() const {
  SpinVector s(static_cast<Eigen::Index>(spin_up.size()));
  for (std::size_t i = 0; i < spin_up.size(); ++i) {
    s[static_cast<Eigen::Index>(i)] = spin_up[i] ? 1 : -1;
  }
  return SpinConfiguration(std::move(s));
}

ActionMask StateSnapshot::mask() const {
  ActionMask m(static_cast<Eigen::Index>(flipped.size()));
  for (std::size_t i = 0; i < flipped.size(); ++i) m[static_cast<Eigen::Index>(i)] = flipped[i];
  return m;
}

std::vector<NStepTransition> make_transitions(const EpisodeTrace& trace, int n, double gamma,
                                              std::shared_ptr<const IsingInstance> instance) {
  if (n < 1) throw std::invalid_argument("make_transitions: n must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("make_transitions: gamma out of range");
  const std::size_t T = trace.steps.size();
  const std::size_t N = trace.start.size();

  // snapshots[t] = state after t flips
  std::vector<StateSnapshot> snapshots(T + 1);
  snapshots[0].spin_up.resize(N);
  snapshots[0].flipped.assign(N, false);
  for (std::size_t i = 0; i < N; ++i) {
    snapshots[0].spin_up[i] = trace.start.spins[static_cast<Eigen::Index>(i)] > 0;
  }
  for (std::size_t t = 0; t < T; ++t) {
    snapshots[t + 1] = snapshots[t];
    const std::size_t a = trace.steps[t].action;
    snapshots[t + 1].spin_up[a] = !snapshots[t + 1].spin_up[a];
    snapshots[t + 1].flipped[a] = true;
  }

  std::vector<NStepTransition> out;
  out.reserve(T);
  const auto horizon = static_cast<std::size_t>(n);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t end = std::min(t + horizon, T);
    double ret = 0.0, discount = 1.0;
    for (std::size_t k = t; k < end; ++k) {
      ret += discount * trace.steps[k].reward;
      discount *= gamma;
    }
    out.push_back({instance, snapshots[t], trace.steps[t].action, ret, snapshots[end],
                   t + horizon >= T});
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(NStepTransition tr) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tr));
  } else {
    items_[head_] = std::move(tr);
    head_ = (head_ + 1) % capacity_;
  }
}

const NStepTransition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer index");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const NStepTransition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("replay buffer is empty");
  std::vector<const NStepTransition*> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) out.push_back(&(*this)[rng.index(items_.size())]);
  return out;
}

double td_target(const NStepTransition& tr, const QNetwork& target, double gamma, int n) {
  if (tr.terminal_within_n) return tr.ret;
  if (!tr.instance) throw std::logic_error("td_target: transition has no instance");
  const auto fp = forward(*tr.instance, tr.next.config(), target);
  const Eigen::VectorXd q = masked_q(fp, tr.next.mask());
  return tr.ret + std::pow(gamma, n) * q.maxCoeff();
}

// ---------------------------------------------------------------------------
// training

void TrainConfig::validate() const {
  if (chimera_n < 1) throw std::invalid_argument("train: chimera size must be >= 1");
  if (episodes < 0) throw std::invalid_argument("train: episodes must be >= 0");
  if (n_step < 1) throw std::invalid_argument("train: n_step must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("train: gamma must be in (0, 1]");
  if (batch_size < 1 || buffer_capacity < 1) throw std::invalid_argument("train: batch/buffer must be >= 1");
  if (target_sync < 1) throw std::invalid_argument("train: target_sync must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (!(sa_preprocess_probability >= 0.0 && sa_preprocess_probability <= 1.0)) {
    throw std::invalid_argument("train: preprocessing probability must be in [0, 1]");
  }
}

double epsilon_at(const TrainConfig& cfg, int episode) {
  const int decay = std::max(1, static_cast<int>(cfg.epsilon_decay_fraction * cfg.episodes));
  if (episode >= decay) return cfg.epsilon_end;
  return cfg.epsilon_start +
         (cfg.epsilon_end - cfg.epsilon_start) * static_cast<double>(episode) / decay;
}

double gradient_step(QNetwork& online, const QNetwork& target, Adam<double>& opt,
                     const std::vector<const NStepTransition*>& batch, double gamma, int n) {
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto* tr : batch) targets.push_back(td_target(*tr, target, gamma, n));

  QNetwork grads = zeros_like(online);
  const double scale = 2.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const NStepTransition& tr = *batch[b];
    const auto fp = forward(*tr.instance, tr.state.config(), online);
    const double diff = fp.q[tr.action] - targets[b];
    loss += diff * diff;
    backward(fp, online, tr.action, scale * diff, grads);
  }
  opt.step(online, grads);
  return loss / static_cast<double>(batch.size());
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  return train(cfg, init_params(cfg.embed_dim, cfg.layers, derive_seed(cfg.seed, 0)));
}

TrainResult train(const TrainConfig& cfg, QNetwork initial) {
  cfg.validate();
  const TopologyPtr topo = build_chimera(cfg.chimera_n);
  TrainResult result;
  result.params = std::move(initial);
  QNetwork target = result.params;
  Adam<double> opt(result.params, cfg.learning_rate);
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng sampler(derive_seed(cfg.seed, 5));
  const AnnealSchedule preprocess = default_schedule();

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const auto e = static_cast<std::uint64_t>(ep);
    auto inst = std::make_shared<const IsingInstance>(random_instance(topo, derive_seed(cfg.seed, e, 1)));
    SpinConfiguration start = random_configuration(*topo, derive_seed(cfg.seed, e, 2));
    Rng coin(derive_seed(cfg.seed, e, 3));
    if (coin.bernoulli(cfg.sa_preprocess_probability)) {
      start = simulated_annealing(*inst, start, preprocess, coin.next()).best_config;
    }
    const double eps = epsilon_at(cfg, ep);
    const EpisodeTrace trace =
        episode(*inst, start, result.params, Policy::epsilon_greedy(eps, derive_seed(cfg.seed, e, 4)));
    for (auto& tr : make_transitions(trace, cfg.n_step, cfg.gamma, inst)) buffer.push(std::move(tr));
    result.max_buffer_size = std::max(result.max_buffer_size, buffer.size());

    TrainLogRow row{ep, eps, std::nullopt, trace.best_energy};
    if (buffer.size() >= cfg.batch_size) {
      double total = 0.0;
      for (int u = 0; u < cfg.updates_per_episode; ++u) {
        const double loss = gradient_step(result.params, target, opt,
                                          buffer.sample(cfg.batch_size, sampler), cfg.gamma,
                                          cfg.n_step);
        if (!std::isfinite(loss)) result.diverged = true;
        total += loss;
        if (++result.gradient_steps % cfg.target_sync == 0) target = result.params;
      }
      if (cfg.updates_per_episode > 0) row.mean_loss = total / cfg.updates_per_episode;
    }
    result.log.push_back(row);

    if (cfg.checkpoint && cfg.checkpoint_every > 0 && (ep + 1) % cfg.checkpoint_every == 0) {
      write_checkpoint(result.params, *cfg.checkpoint);
    }
  }
  if (cfg.checkpoint) write_checkpoint(result.params, *cfg.checkpoint);
  return result;
}

void write_train_log(const std::vector<TrainLogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "episode,epsilon,mean_loss,best_energy\n";
  for (const auto& r : rows) {
    out << r.episode << ',' << format_double(r.epsilon) << ','
        << (r.mean_loss ? format_double(*r.mean_loss) : std::string()) << ','
        << format_double(r.best_energy) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sawr
