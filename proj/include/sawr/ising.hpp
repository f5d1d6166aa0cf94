#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>

#include "sawr/topology.hpp"

namespace sawr {

using SpinVector = Eigen::Matrix<std::int8_t, Eigen::Dynamic, 1>;

/// Couplings J (indexed by canonical edge) and biases h (indexed by node)
/// over a Chimera topology. Immutable once built.
class IsingInstance {
public:
  IsingInstance(TopologyPtr topo, Eigen::VectorXd couplings, Eigen::VectorXd biases);

  const ChimeraTopology& topology() const { return *topo_; }
  const TopologyPtr& topology_ptr() const { return topo_; }
  const Eigen::VectorXd& couplings() const { return couplings_; }
  const Eigen::VectorXd& biases() const { return biases_; }
  std::size_t size() const { return biases_.size(); }

  friend bool operator==(const IsingInstance& a, const IsingInstance& b) {
    return a.topo_->n() == b.topo_->n() && a.couplings_ == b.couplings_ && a.biases_ == b.biases_;
  }

private:
  TopologyPtr topo_;
  Eigen::VectorXd couplings_;
  Eigen::VectorXd biases_;
};

/// Spin vector with entries in {-1, +1} and an optional incrementally
/// maintained energy.
struct SpinConfiguration {
  SpinVector spins;
  std::optional<double> cached_energy;

  SpinConfiguration() = default;
  explicit SpinConfiguration(SpinVector s, std::optional<double> e = std::nullopt)
      : spins(std::move(s)), cached_energy(e) {}

  std::size_t size() const { return spins.size(); }
  bool valid() const {
    return ((spins.array() == 1) || (spins.array() == -1)).all();
  }
  friend bool operator==(const SpinConfiguration& a, const SpinConfiguration& b) {
    return a.spins.size() == b.spins.size() && a.spins == b.spins;
  }
};

SpinConfiguration uniform_configuration(std::size_t n, std::int8_t value);

/// H(s) = sum_<ij> J_ij s_i s_j + sum_i h_i s_i, each coupler once.
double energy(const IsingInstance& inst, const SpinConfiguration& cfg);

/// Energy change from negating spin i: -2 s_i (h_i + sum_j J_ij s_j).
double flip_delta(const IsingInstance& inst, const SpinConfiguration& cfg, NodeId i);

/// Negates spin i and adds delta to the cached energy when present.
void apply_flip(SpinConfiguration& cfg, NodeId i, double delta);

/// Attaches cached_energy = energy(inst, cfg).
SpinConfiguration with_energy(const IsingInstance& inst, SpinConfiguration cfg);

IsingInstance random_instance(TopologyPtr topo, std::uint64_t seed);
SpinConfiguration random_configuration(const ChimeraTopology& topo, std::uint64_t seed);
SpinConfiguration random_configuration(std::size_t n, std::uint64_t seed);

/// Exhaustive minimum over 2^N states (N <= 24). Ties go to the lowest
/// encoding with bit i set iff s_i = -1.
std::pair<SpinConfiguration, double> brute_force_ground_state(const IsingInstance& inst);

IsingInstance scaled(const IsingInstance& inst, double factor);

// Text formats.
//   instance:      "chimera <n>", then "b <i> <h>" per node, "c <u> <v> <J>" per edge
//   configuration: "sigma <N>", then N values of +1/-1
void write_instance(std::ostream& out, const IsingInstance& inst);
void write_instance(const IsingInstance& inst, const std::filesystem::path& path);
IsingInstance read_instance(std::istream& in);
IsingInstance read_instance(const std::filesystem::path& path);

void write_configuration(std::ostream& out, const SpinConfiguration& cfg);
void write_configuration(const SpinConfiguration& cfg, const std::filesystem::path& path);
SpinConfiguration read_configuration(std::istream& in);
SpinConfiguration read_configuration(const std::filesystem::path& path);

}  // namespace sawr
