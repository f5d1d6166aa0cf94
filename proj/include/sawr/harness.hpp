#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sawr/annealing.hpp"
#include "sawr/gnn.hpp"
#include "sawr/ising.hpp"

namespace sawr {

enum class Method { SA, Model, Sawr };

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

/// Stand-in for hardware annealer samples: a short hot anneal from the raw
/// start, or a sample file loaded verbatim when `external_sample` is set.
struct ProxyConfig {
  AnnealSchedule schedule = geometric_schedule(0.1, 1.0, 10, 1);
  std::optional<std::filesystem::path> external_sample;
};

SpinConfiguration annealer_proxy_start(const IsingInstance& inst, const SpinConfiguration& raw_start,
                                       const ProxyConfig& proxy, std::uint64_t seed);

struct BenchmarkEntry {
  std::string id;  // "c<n>_<index>"
  std::uint32_t size = 0;
  std::filesystem::path instance;  // relative to the benchmark directory
  std::filesystem::path start;
};

/// Writes c<n>_<k>.ising / c<n>_<k>.sigma pairs plus manifest.csv into
/// `dir`. Instance k of size n uses seeds derived from (seed, n, k).
std::vector<BenchmarkEntry> generate_benchmark(const std::vector<std::uint32_t>& sizes, int count,
                                               std::uint64_t seed, const std::filesystem::path& dir);

std::vector<BenchmarkEntry> read_manifest(const std::filesystem::path& dir);

struct TrialInput {
  std::string id;
  std::uint32_t size = 0;
  std::shared_ptr<const IsingInstance> instance;
  SpinConfiguration start;
};

/// Loads the benchmark and turns each raw start into an annealer-like start.
/// When `samples_dir` is given, <id>.sigma files there replace the proxy.
std::vector<TrialInput> prepare_trials(const std::filesystem::path& dir, const ProxyConfig& proxy,
                                       std::uint64_t seed,
                                       const std::optional<std::filesystem::path>& samples_dir = {});

struct EvalConfig {
  std::vector<Method> methods{Method::SA, Method::Model, Method::Sawr};
  AnnealSchedule schedule = default_schedule();
  std::optional<double> beta_switch;  // default: 0.8 * max beta
  const QNetwork* params = nullptr;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct TrialRecord {
  std::string instance_id;
  std::uint32_t size = 0;
  Method method = Method::SA;
  double start_energy = 0.0;
  double best_energy = 0.0;
  std::uint64_t input_hash = 0;
  double wall_seconds = 0.0;
};

struct MethodSummary {
  std::uint32_t size = 0;
  Method method = Method::SA;
  std::size_t trials = 0;
  std::size_t improved = 0;
  double probability = 0.0;
  std::optional<double> mean_improvement;  // over improved trials only
  friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

struct ExperimentReport {
  std::vector<MethodSummary> summaries;
  std::vector<TrialRecord> trials;

  const MethodSummary* find(std::uint32_t size, Method m) const;
};

inline constexpr double kImprovementThreshold = 1e-9;

bool improved(const TrialRecord& r);

/// Hash of (couplings, biases, spins) bytes.
std::uint64_t input_hash(const IsingInstance& inst, const SpinConfiguration& start);

/// Runs every method from each trial's start with seeds derived from
/// (seed, id, method). Trials may run on several threads; output does not
/// depend on the thread count.
ExperimentReport evaluate(const std::vector<TrialInput>& trials, const EvalConfig& cfg);

/// Per (size, method) aggregates, sizes ascending, methods in enum order.
std::vector<MethodSummary> aggregate(const std::vector<TrialRecord>& trials);

void write_trials_csv(const std::vector<TrialRecord>& trials, const std::filesystem::path& path);
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path);
void write_timings(const std::vector<TrialRecord>& trials, const std::filesystem::path& path);

/// size,method,trials,improved,probability,mean_improvement
/// (an absent mean is an empty field)
void write_report_csv(const std::vector<MethodSummary>& rows, const std::filesystem::path& path);
std::vector<MethodSummary> read_report_csv(const std::filesystem::path& path);

/// One "# method=<m> metric=<probability|mean_improvement>" block per series
/// followed by "<size> <value>" lines; sizes without a value are skipped.
/// Returns the number of series written.
std::size_t write_plotdata(const std::vector<MethodSummary>& rows, const std::filesystem::path& path);

}  // namespace sawr
