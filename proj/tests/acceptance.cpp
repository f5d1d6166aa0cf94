// One PASS/FAIL line per acceptance criterion; exits nonzero if any fail.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "sawr/agent.hpp"
#include "sawr/annealing.hpp"
#include "sawr/harness.hpp"
#include "sawr/sawr.hpp"

using namespace sawr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out{false, ""};
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_seconds > 0 && secs >= limit_seconds) {
    out.pass = false;
    out.detail += " (over the time limit)";
  }
  failures += !out.pass;
  std::printf("%s  %2d %s: %s [%.1fs", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs);
  if (limit_seconds > 0) std::printf(" / limit %.0fs", limit_seconds);
  std::printf("]\n");
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing output " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------------------
// 1

Outcome topology_exactness() {
  for (int n = 1; n <= 8; ++n) {
    auto topo = build_chimera(static_cast<std::uint32_t>(n));
    const int count = 8 * n * n;
    // brute force: test every pair against the lattice rule written from coordinates
    std::set<std::pair<int, int>> pairs;
    for (int a = 0; a < count; ++a) {
      const int ca = a / 8, ra = ca / n, cola = ca % n, sa = (a % 8) / 4, ka = a % 4;
      for (int b = a + 1; b < count; ++b) {
        const int cb = b / 8, rb = cb / n, colb = cb % n, sb = (b % 8) / 4, kb = b % 4;
        bool joined;
        if (ca == cb) {
          joined = sa != sb;
        } else if (sa != sb || ka != kb) {
          joined = false;
        } else if (sa == 0) {
          joined = cola == colb && std::abs(ra - rb) == 1;
        } else {
          joined = ra == rb && std::abs(cola - colb) == 1;
        }
        if (joined) pairs.insert({a, b});
      }
    }
    std::set<std::pair<int, int>> built;
    for (const Edge& e : topo->edges()) built.insert({static_cast<int>(e.u), static_cast<int>(e.v)});
    const std::size_t expected_edges = 16u * n * n + 8u * n * (n - 1);
    if (topo->node_count() != static_cast<std::size_t>(count) || topo->edge_count() != expected_edges ||
        pairs.size() != expected_edges || built != pairs) {
      return {false, fmt("mismatch at n=%d", n)};
    }
  }
  return {true, "n=1..8 node/edge counts and edge sets match pairwise enumeration"};
}

// ---------------------------------------------------------------------------
// 2

Outcome energy_correctness() {
  auto topo = build_chimera(2);
  Rng rng(1001);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    auto inst = random_instance(topo, rng.next());
    auto cfg = random_configuration(*topo, rng.next());
    const NodeId i(static_cast<std::uint32_t>(rng.index(topo->node_count())));
    const double before = energy(inst, cfg);
    const double delta = flip_delta(inst, cfg, i);
    cfg.spins[i] = static_cast<std::int8_t>(-cfg.spins[i]);
    worst = std::max(worst, std::abs(delta - (energy(inst, cfg) - before)));
  }
  return {worst <= 1e-9, fmt("1000 C2 triples, max |delta - recompute| = %.3g", worst)};
}

// ---------------------------------------------------------------------------
// 3

Outcome brute_force_agreement() {
  auto topo = build_chimera(1);
  int solved = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto inst = random_instance(topo, derive_seed(3003, k, 1));
    auto start = random_configuration(*topo, derive_seed(3003, k, 2));
    const double sa = simulated_annealing(inst, start, default_schedule(), derive_seed(3003, k, 3)).best_energy;
    const double gs = brute_force_ground_state(inst).second;
    solved += std::abs(sa - gs) <= 1e-9;
  }
  return {solved >= 95, fmt("default SA reached the ground state on %d/100 C1 instances (need >= 95)", solved)};
}

// ---------------------------------------------------------------------------
// 4

Outcome metropolis_statistics() {
  Rng rng(4004);
  const int trials = 100000;
  int accepted = 0;
  for (int k = 0; k < trials; ++k) accepted += metropolis_accept(2.0, 1.0, rng.uniform01());
  const double p = std::exp(-2.0);
  const double se = std::sqrt(p * (1 - p) / trials);
  const double freq = static_cast<double>(accepted) / trials;
  const double z = std::abs(freq - p) / se;
  return {z < 3.0, fmt("frequency %.5f vs %.5f, %.2f standard errors", freq, p, z)};
}

// ---------------------------------------------------------------------------
// 5

std::vector<bool> relu_pattern(const ForwardPass<double>& fp) {
  std::vector<bool> out;
  auto add = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data()[i] > 0);
  };
  for (const auto& m : fp.edge_pre) add(m);
  for (const auto& m : fp.node_pre) add(m);
  add(fp.h1_pre);
  add(fp.h2_pre);
  return out;
}

Outcome gradient_fidelity() {
  auto topo = build_chimera(1);
  auto inst = random_instance(topo, 5005);
  auto cfg = random_configuration(*topo, 5006);
  auto params = init_params(8, 2, 5007);
  // nonzero biases so the check also covers them away from symmetric points
  Rng brng(5008);
  zip_blocks(
      [&](const std::string& name, auto& b) {
        if (!is_bias_block(name)) return;
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 0.2 * (2.0 * brng.uniform01() - 1.0);
      },
      params);
  const std::uint32_t action = 5;
  const auto fp = forward(inst, cfg, params);
  const auto pattern = relu_pattern(fp);
  auto grads = zeros_like(params);
  backward(fp, params, NodeId(action), 1.0, grads);

  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_at;
  std::size_t checked = 0, kinks = 0;
  auto probe = params;
  zip_blocks(
      [&](const std::string& name, auto& pb, const auto& gb) {
        for (Eigen::Index i = 0; i < pb.size(); ++i) {
          const double orig = pb.data()[i];
          pb.data()[i] = orig + h;
          const auto plus = forward(inst, cfg, probe);
          pb.data()[i] = orig - h;
          const auto minus = forward(inst, cfg, probe);
          pb.data()[i] = orig;
          if (relu_pattern(plus) != pattern || relu_pattern(minus) != pattern) {
            ++kinks;
            continue;
          }
          const double fd = (plus.q[action] - minus.q[action]) / (2 * h);
          const double an = gb.data()[i];
          // relative error; the 1e-6 floor only matters for gradients that are zero
          const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
          if (rel > worst) {
            worst = rel;
            worst_at = name + "[" + std::to_string(i) + "]";
          }
          ++checked;
        }
      },
      probe, grads);
  return {worst <= 1e-4 && checked + kinks == parameter_count(params),
          fmt("%zu parameters checked, %zu skipped at ReLU kinks, worst relative error %.2e at %s", checked, kinks,
              worst, worst_at.c_str())};
}

// ---------------------------------------------------------------------------
// 6

Outcome episode_invariants() {
  auto topo = build_chimera(2);
  auto params = init_params(64, 3, 6006);
  int bad = 0;
  double worst_telescope = 0.0;
  for (std::uint64_t k = 0; k < 500; ++k) {
    auto inst = random_instance(topo, derive_seed(6006, k, 1));
    auto start = random_configuration(*topo, derive_seed(6006, k, 2));
    const Policy policy = k % 2 ? Policy::greedy() : Policy::epsilon_greedy(0.3, derive_seed(6006, k, 3));
    const auto tr = episode(inst, start, params, policy);
    std::set<std::uint32_t> actions;
    double sum = 0.0;
    for (const auto& s : tr.steps) {
      actions.insert(s.action.index);
      sum += s.reward;
    }
    const double e0 = energy(inst, start), eT = energy(inst, tr.final_config);
    worst_telescope = std::max(worst_telescope, std::abs(sum - (e0 - eT)));
    const bool ok = tr.steps.size() == 32 && actions.size() == 32 && std::abs(sum - (e0 - eT)) <= 1e-9 &&
                    tr.best_energy <= e0 && tr.final_config.spins == static_cast<SpinVector>(-start.spins);
    bad += !ok;
  }
  return {bad == 0, fmt("500 C2 episodes, %d violations, worst telescoping error %.2e", bad, worst_telescope)};
}

// ---------------------------------------------------------------------------
// 7

Outcome sawr_degenerate() {
  auto topo = build_chimera(2);
  auto params = init_params(64, 3, 7007);
  const auto sched = default_schedule();
  const double cold_start = *std::min_element(sched.betas.begin(), sched.betas.end());
  int sa_match = 0, pass_match = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    auto inst = random_instance(topo, derive_seed(7007, k, 1));
    auto start = random_configuration(*topo, derive_seed(7007, k, 2));
    const std::uint64_t seed = derive_seed(7007, k, 3);

    const auto inf = sawr::sawr(inst, start, {sched, std::numeric_limits<double>::infinity(), &params, seed});
    const auto sa = simulated_annealing(inst, start, sched, seed);
    sa_match += inf == sa;

    const auto low = sawr::sawr(inst, start, {sched, cold_start, &params, seed});
    const auto pass = episode(inst, start, params, Policy::greedy());
    pass_match += low.best_config == pass.best_config &&
                  std::bit_cast<std::uint64_t>(low.best_energy) == std::bit_cast<std::uint64_t>(pass.best_energy);
  }
  return {sa_match == 20 && pass_match == 20,
          fmt("switch=inf equals SA on %d/20, switch=min(beta) equals one greedy pass on %d/20", sa_match, pass_match)};
}

// ---------------------------------------------------------------------------
// 8

Outcome training_signal() {
  TrainConfig cfg;
  cfg.chimera_n = 1;
  cfg.episodes = 500;
  cfg.embed_dim = 16;
  cfg.layers = 2;
  cfg.seed = 8008;
  const auto untrained = init_params(cfg.embed_dim, cfg.layers, derive_seed(cfg.seed, 0));
  const auto trained = train(cfg, untrained).params;

  auto topo = build_chimera(1);
  double base = 0.0, after = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    // held out: seeds disjoint from the training stream
    auto inst = random_instance(topo, derive_seed(80080, k, 1));
    auto start = random_configuration(*topo, derive_seed(80080, k, 2));
    base += episode(inst, start, untrained, Policy::greedy()).best_energy / 100.0;
    after += episode(inst, start, trained, Policy::greedy()).best_energy / 100.0;
  }
  return {after < base, fmt("mean greedy best energy on 100 held-out C1: untrained %.4f, trained %.4f", base, after)};
}

// ---------------------------------------------------------------------------
// 9-11: CLI pipeline

const char* kCli = SAWR_CLI_PATH;
constexpr int kPipelineSeed = 11;
constexpr int kPipelineEpisodes = 500;

void run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + kCli + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: " + args + " (see " + log.string() + ")");
}

void pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto log = dir / "log.txt";
  const std::string d = "\"" + dir.string() + "\"";
  const std::string seed = std::to_string(kPipelineSeed);
  run("generate --out " + d + "/bench --seed " + seed, log);
  run("train --episodes " + std::to_string(kPipelineEpisodes) + " --seed " + seed + " --checkpoint " + d +
          "/model.ckpt --log " + d + "/train.csv",
      log);
  run("evaluate --benchmark " + d + "/bench --checkpoint " + d + "/model.ckpt --seed " + seed + " --out " + d + "/eval",
      log);
  run("report --trials " + d + "/eval/trials.csv --out " + d + "/report.csv --plotdata " + d + "/plot.dat", log);
}

fs::path work_dir() { return fs::temp_directory_path() / "sawr_acceptance"; }

Outcome qualitative_ordering() {
  pipeline(work_dir() / "run_a");
  const auto rows = read_report_csv(work_dir() / "run_a" / "report.csv");
  std::string detail;
  bool ok = true;
  for (std::uint32_t n : {2u, 3u, 4u}) {
    auto get = [&](Method m) {
      for (const auto& r : rows) {
        if (r.size == n && r.method == m) return r.probability;
      }
      throw std::runtime_error("report lacks a row");
    };
    const double sa = get(Method::SA), sw = get(Method::Sawr), model = get(Method::Model);
    ok = ok && sa >= sw && sw > model;
    detail += fmt("C%u sa=%.2f sawr=%.2f model=%.2f; ", n, sa, sw, model);
  }
  detail += fmt("model trained %d episodes on C3", kPipelineEpisodes);
  return {ok, detail};
}

Outcome scalability() {
  const auto params = read_checkpoint(work_dir() / "run_a" / "model.ckpt");
  auto topo = build_chimera(16);
  auto inst = random_instance(topo, 10010);
  auto start = random_configuration(*topo, 10011);
  const auto t0 = std::chrono::steady_clock::now();
  const auto tr = episode(inst, start, params, Policy::greedy());
  const auto t1 = std::chrono::steady_clock::now();
  const auto sa = simulated_annealing(inst, start, default_schedule(), 10012);
  const auto t2 = std::chrono::steady_clock::now();
  const bool ok = topo->node_count() == 2048 && topo->edge_count() == 6016 && tr.steps.size() == 2048;
  return {ok, fmt("C16 greedy episode %.1fs (best %.2f from %.2f), SA %.1fs (best %.2f)",
                  std::chrono::duration<double>(t1 - t0).count(), tr.best_energy, tr.start_energy,
                  std::chrono::duration<double>(t2 - t1).count(), sa.best_energy)};
}

Outcome determinism() {
  pipeline(work_dir() / "run_b");
  const fs::path a = work_dir() / "run_a", b = work_dir() / "run_b";
  std::vector<fs::path> files{"bench/manifest.csv", "train.csv", "eval/trials.csv", "eval/report.csv", "report.csv",
                              "plot.dat", "model.ckpt"};
  std::string differing;
  for (const auto& f : files) {
    if (slurp(a / f) != slurp(b / f)) differing += f.string() + " ";
  }
  if (!differing.empty()) return {false, "outputs differ: " + differing};
  return {true, "generate -> train -> evaluate -> report twice: CSV, plot data and checkpoint byte-identical"};
}

}  // namespace

int main() {
  std::printf("acceptance suite (CLI: %s)\n", kCli);
  criterion(1, "topology exactness", 5, topology_exactness);
  criterion(2, "energy correctness", 5, energy_correctness);
  criterion(3, "brute-force oracle agreement", 30, brute_force_agreement);
  criterion(4, "Metropolis statistics", 5, metropolis_statistics);
  criterion(5, "gradient fidelity", 60, gradient_fidelity);
  criterion(6, "episode invariants", 300, episode_invariants);
  criterion(7, "SAwR degenerate equivalences", 0, sawr_degenerate);
  criterion(8, "training signal", 900, training_signal);
  criterion(9, "qualitative ordering", 0, qualitative_ordering);
  criterion(10, "C16 scalability", 600, scalability);
  criterion(11, "CLI determinism", 0, determinism);
  std::printf("%d criteria failed\n", failures);
  fs::remove_all(work_dir());
  return failures ? 1 : 0;
}
