#include "sawr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "sawr/agent.hpp"
#include "sawr/format.hpp"
#include "sawr/rng.hpp"
#include "sawr/sawr.hpp"

namespace sawr {

namespace fs = std::filesystem;

std::string_view method_name(Method m) {
  switch (m) {
    case Method::SA: return "sa";
    case Method::Model: return "model";
    case Method::Sawr: return "sawr";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "sa") return Method::SA;
  if (name == "model") return Method::Model;
  if (name == "sawr") return Method::Sawr;
  return std::nullopt;
}

SpinConfiguration annealer_proxy_start(const IsingInstance& inst, const SpinConfiguration& raw_start,
                                       const ProxyConfig& proxy, std::uint64_t seed) {
  if (proxy.external_sample) {
    SpinConfiguration s = read_configuration(*proxy.external_sample);
    if (s.size() != inst.size()) {
      throw ParseError(0, "sample has " + std::to_string(s.size()) + " spins, instance has " +
                              std::to_string(inst.size()),
                       proxy.external_sample->string());
    }
    return s;
  }
  SpinConfiguration out = simulated_annealing(inst, raw_start, proxy.schedule, seed).best_config;
  out.cached_energy.reset();
  return out;
}

// ---------------------------------------------------------------------------
// benchmark files

std::vector<BenchmarkEntry> generate_benchmark(const std::vector<std::uint32_t>& sizes, int count,
                                               std::uint64_t seed, const fs::path& dir) {
  if (count < 0) throw std::invalid_argument("generate_benchmark: negative count");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::vector<BenchmarkEntry> entries;
  for (std::uint32_t n : sizes) {
    const TopologyPtr topo = build_chimera(n);
    for (int k = 0; k < count; ++k) {
      char id[32];
      std::snprintf(id, sizeof(id), "c%u_%04d", n, k);
      BenchmarkEntry entry{id, n, std::string(id) + ".ising", std::string(id) + ".sigma"};
      const auto key = static_cast<std::uint64_t>(k);
      write_instance(random_instance(topo, derive_seed(seed, n, key, 1)), dir / entry.instance);
      write_configuration(random_configuration(*topo, derive_seed(seed, n, key, 2)), dir / entry.start);
      entries.push_back(std::move(entry));
    }
  }
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
  manifest << "id,size,instance,start\n";
  for (const auto& e : entries) {
    manifest << e.id << ',' << e.size << ',' << e.instance.string() << ',' << e.start.string() << '\n';
  }
  if (!manifest) throw std::runtime_error("write failed: " + (dir / "manifest.csv").string());
  return entries;
}

std::vector<BenchmarkEntry> read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<BenchmarkEntry> entries;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line.rfind("id,size,instance,start", 0) != 0) {
        throw ParseError(lineno, "bad manifest header", path.string());
      }
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv(line);
    auto size = f.size() == 4 ? parse_int<std::uint32_t>(f[1]) : std::nullopt;
    if (!size) throw ParseError(lineno, "malformed manifest row", path.string());
    entries.push_back({std::string(f[0]), *size, std::string(f[2]), std::string(f[3])});
  }
  return entries;
}

std::vector<TrialInput> prepare_trials(const fs::path& dir, const ProxyConfig& proxy,
                                       std::uint64_t seed, const std::optional<fs::path>& samples_dir) {
  std::vector<TrialInput> trials;
  for (const auto& e : read_manifest(dir)) {
    auto inst = std::make_shared<const IsingInstance>(read_instance(dir / e.instance));
    if (inst->topology().n() != e.size) {
      throw std::runtime_error(e.id + ": manifest size does not match instance file");
    }
    const SpinConfiguration raw = read_configuration(dir / e.start);
    ProxyConfig p = proxy;
    if (samples_dir) p.external_sample = *samples_dir / (e.id + ".sigma");
    SpinConfiguration start = annealer_proxy_start(*inst, raw, p, derive_seed(seed, fnv1a(e.id), fnv1a("proxy")));
    trials.push_back({e.id, e.size, std::move(inst), std::move(start)});
  }
  return trials;
}

// ---------------------------------------------------------------------------
// evaluation

const MethodSummary* ExperimentReport::find(std::uint32_t size, Method m) const {
  for (const auto& s : summaries) {
    if (s.size == size && s.method == m) return &s;
  }
  return nullptr;
}

bool improved(const TrialRecord& r) {
  return r.best_energy < r.start_energy - kImprovementThreshold;
}

std::uint64_t input_hash(const IsingInstance& inst, const SpinConfiguration& start) {
  auto bytes = [](const auto& v) {
    return std::string_view(reinterpret_cast<const char*>(v.data()),
                            static_cast<std::size_t>(v.size()) * sizeof(*v.data()));
  };
  std::uint64_t h = fnv1a(bytes(inst.couplings()));
  h = splitmix64(h ^ fnv1a(bytes(inst.biases())));
  return splitmix64(h ^ fnv1a(bytes(start.spins)));
}

namespace {

TrialRecord run_method(const TrialInput& trial, Method method, const EvalConfig& cfg,
                       std::uint64_t expected_hash) {
  const IsingInstance& inst = *trial.instance;
  const std::uint64_t h = input_hash(inst, trial.start);
  if (h != expected_hash) throw std::logic_error(trial.id + ": method inputs diverged");
  const std::uint64_t seed =
      derive_seed(cfg.seed, fnv1a(trial.id), fnv1a(method_name(method)));

  const auto t0 = std::chrono::steady_clock::now();
  double best = 0.0;
  switch (method) {
    case Method::SA:
      best = simulated_annealing(inst, trial.start, cfg.schedule, seed).best_energy;
      break;
    case Method::Model:
      best = episode(inst, trial.start, *cfg.params, Policy::greedy()).best_energy;
      break;
    case Method::Sawr: {
      SawrConfig sc;
      sc.schedule = cfg.schedule;
      sc.beta_switch = cfg.beta_switch.value_or(SawrConfig::default_beta_switch(cfg.schedule));
      sc.params = cfg.params;
      sc.seed = seed;
      best = sawr(inst, trial.start, sc).best_energy;
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  return {trial.id,
          trial.size,
          method,
          energy(inst, trial.start),
          best,
          h,
          std::chrono::duration<double>(t1 - t0).count()};
}

}  // namespace

ExperimentReport evaluate(const std::vector<TrialInput>& trials, const EvalConfig& cfg) {
  const bool needs_model = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                       [](Method m) { return m != Method::SA; });
  if (needs_model && !cfg.params) {
    throw std::invalid_argument("evaluate: model/sawr requested but no checkpoint was given");
  }
  if (cfg.methods.empty()) throw std::invalid_argument("evaluate: no methods selected");
  cfg.schedule.validate();

  const std::size_t per_trial = cfg.methods.size();
  std::vector<TrialRecord> records(trials.size() * per_trial);
  std::vector<std::uint64_t> hashes(trials.size());
  for (std::size_t t = 0; t < trials.size(); ++t) {
    hashes[t] = input_hash(*trials[t].instance, trials[t].start);
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < records.size();) {
      const std::size_t t = job / per_trial;
      try {
        records[job] = run_method(trials[t], cfg.methods[job % per_trial], cfg, hashes[t]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, cfg.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.summaries = aggregate(records);
  report.trials = std::move(records);
  return report;
}

std::vector<MethodSummary> aggregate(const std::vector<TrialRecord>& trials) {
  struct Acc {
    std::size_t trials = 0, improved = 0;
    double total = 0.0;
  };
  std::map<std::pair<std::uint32_t, int>, Acc> acc;
  for (const auto& r : trials) {
    auto& a = acc[{r.size, static_cast<int>(r.method)}];
    ++a.trials;
    if (improved(r)) {
      ++a.improved;
      a.total += r.start_energy - r.best_energy;
    }
  }
  std::vector<MethodSummary> out;
  for (const auto& [key, a] : acc) {
    MethodSummary s;
    s.size = key.first;
    s.method = static_cast<Method>(key.second);
    s.trials = a.trials;
    s.improved = a.improved;
    s.probability = static_cast<double>(a.improved) / static_cast<double>(a.trials);
    if (a.improved > 0) s.mean_improvement = a.total / static_cast<double>(a.improved);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// files

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

template <class Row>
std::vector<Row> read_csv(const fs::path& path, std::string_view header, std::size_t fields,
                          Row (*parse)(const std::vector<std::string_view>&, std::size_t)) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != header) throw ParseError(lineno, "expected header '" + std::string(header) + "'", path.string());
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != fields) throw ParseError(lineno, "expected " + std::to_string(fields) + " fields", path.string());
    try {
      rows.push_back(parse(f, lineno));
    } catch (const ParseError& e) {
      throw ParseError(e.line(), e.detail(), path.string());
    }
  }
  return rows;
}

double need_double(std::string_view s, std::size_t lineno) {
  auto v = parse_double(s);
  if (!v) throw ParseError(lineno, "bad number '" + std::string(s) + "'");
  return *v;
}

template <class Int>
Int need_int(std::string_view s, std::size_t lineno) {
  auto v = parse_int<Int>(s);
  if (!v) throw ParseError(lineno, "bad integer '" + std::string(s) + "'");
  return *v;
}

Method need_method(std::string_view s, std::size_t lineno) {
  auto m = parse_method(s);
  if (!m) throw ParseError(lineno, "unknown method '" + std::string(s) + "'");
  return *m;
}

constexpr std::string_view kTrialsHeader = "instance_id,size,method,start_energy,best_energy,input_hash";
constexpr std::string_view kReportHeader = "size,method,trials,improved,probability,mean_improvement";

}  // namespace

void write_trials_csv(const std::vector<TrialRecord>& trials, const fs::path& path) {
  auto out = open_out(path);
  out << kTrialsHeader << '\n';
  for (const auto& r : trials) {
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.input_hash));
    out << r.instance_id << ',' << r.size << ',' << method_name(r.method) << ','
        << format_double(r.start_energy) << ',' << format_double(r.best_energy) << ',' << hash << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TrialRecord> read_trials_csv(const fs::path& path) {
  return read_csv<TrialRecord>(
      path, kTrialsHeader, 6, +[](const std::vector<std::string_view>& f, std::size_t n) {
        TrialRecord r;
        r.instance_id = std::string(f[0]);
        r.size = need_int<std::uint32_t>(f[1], n);
        r.method = need_method(f[2], n);
        r.start_energy = need_double(f[3], n);
        r.best_energy = need_double(f[4], n);
        std::uint64_t h = 0;
        auto [ptr, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), h, 16);
        if (ec != std::errc{} || ptr != f[5].data() + f[5].size()) throw ParseError(n, "bad hash");
        r.input_hash = h;
        return r;
      });
}

void write_timings(const std::vector<TrialRecord>& trials, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& r : trials) {
    out << r.instance_id << ' ' << method_name(r.method) << ' ' << r.wall_seconds << '\n';
  }
}

void write_report_csv(const std::vector<MethodSummary>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << kReportHeader << '\n';
  for (const auto& s : rows) {
    out << s.size << ',' << method_name(s.method) << ',' << s.trials << ',' << s.improved << ','
        << format_double(s.probability) << ','
        << (s.mean_improvement ? format_double(*s.mean_improvement) : std::string()) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<MethodSummary> read_report_csv(const fs::path& path) {
  return read_csv<MethodSummary>(
      path, kReportHeader, 6, +[](const std::vector<std::string_view>& f, std::size_t n) {
        MethodSummary s;
        s.size = need_int<std::uint32_t>(f[0], n);
        s.method = need_method(f[1], n);
        s.trials = need_int<std::size_t>(f[2], n);
        s.improved = need_int<std::size_t>(f[3], n);
        s.probability = need_double(f[4], n);
        if (!f[5].empty()) s.mean_improvement = need_double(f[5], n);
        return s;
      });
}

std::size_t write_plotdata(const std::vector<MethodSummary>& rows, const fs::path& path) {
  auto out = open_out(path);
  std::vector<Method> methods;
  for (const auto& s : rows) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
  }
  std::sort(methods.begin(), methods.end());
  std::size_t series = 0;
  for (Method m : methods) {
    for (std::string_view metric : {"probability", "mean_improvement"}) {
      out << "# method=" << method_name(m) << " metric=" << metric << '\n';
      for (const auto& s : rows) {
        if (s.method != m) continue;
        const std::optional<double> y =
            metric == "probability" ? std::optional<double>(s.probability) : s.mean_improvement;
        if (y) out << s.size << ' ' << format_double(*y) << '\n';
      }
      out << '\n';
      ++series;
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
  return series;
}

}  // namespace sawr
