// Command line front end: generate -> train -> evaluate -> report, plus solve.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sawr/agent.hpp"
#include "sawr/annealing.hpp"
#include "sawr/format.hpp"
#include "sawr/gnn.hpp"
#include "sawr/harness.hpp"
#include "sawr/ising.hpp"
#include "sawr/rng.hpp"
#include "sawr/sawr.hpp"

namespace fs = std::filesystem;
using namespace sawr;

namespace {

struct ScheduleFlags {
  double beta_min = 0.1;
  double beta_max = 5.0;
  int beta_steps = 100;
  int sweeps = 1;

  void add(CLI::App* app, const std::string& prefix = "") {
    app->add_option("--" + prefix + "beta-min", beta_min, "Initial inverse temperature")->capture_default_str();
    app->add_option("--" + prefix + "beta-max", beta_max, "Final inverse temperature")->capture_default_str();
    app->add_option("--" + prefix + "beta-steps", beta_steps, "Number of geometric beta steps")->capture_default_str();
    app->add_option("--" + prefix + "sweeps", sweeps, "Sweeps (N proposals) per beta")->capture_default_str();
  }
  AnnealSchedule schedule() const { return geometric_schedule(beta_min, beta_max, beta_steps, sweeps); }
};

std::optional<double> beta_switch_value(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  auto v = parse_double(text);
  if (!v) throw CLI::ValidationError("--beta-switch", "not a number: " + text);
  return v;
}

void write_config(const CLI::App& app, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << app.config_to_str(true, false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ising post-processing: simulated annealing, learned spin-flip agent, SAwR"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI config file");
  int config_version = 1;
  app.add_option("--config-version", config_version, "Config schema version")
      ->check(CLI::IsMember({1}))
      ->capture_default_str();
  std::string write_config_path;
  app.add_option("--write-config", write_config_path, "Write the effective configuration here");

  // generate --------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Write random benchmark instances and starts");
  std::vector<std::uint32_t> gen_sizes{2, 3, 4};
  int gen_count = 50;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  bool paper_scale = false;
  gen->add_option("--sizes", gen_sizes, "Chimera sizes n")->delimiter(',')->capture_default_str();
  gen->add_option("--count", gen_count, "Instances per size")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Master seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Benchmark directory")->required();
  gen->add_flag("--paper-scale", paper_scale, "Sizes 4,8,12,16 with 500 instances each");

  // train -----------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the spin-flip Q network");
  TrainConfig tc;
  std::string tr_checkpoint, tr_log;
  tr->add_option("--chimera-size", tc.chimera_n, "Training instance size n")->capture_default_str();
  tr->add_option("--episodes", tc.episodes)->capture_default_str();
  tr->add_option("--n-step", tc.n_step)->capture_default_str();
  tr->add_option("--gamma", tc.gamma)->capture_default_str();
  tr->add_option("--epsilon-start", tc.epsilon_start)->capture_default_str();
  tr->add_option("--epsilon-end", tc.epsilon_end)->capture_default_str();
  tr->add_option("--epsilon-decay", tc.epsilon_decay_fraction, "Fraction of episodes to anneal epsilon over")
      ->capture_default_str();
  tr->add_option("--buffer", tc.buffer_capacity, "Replay capacity")->capture_default_str();
  tr->add_option("--batch", tc.batch_size)->capture_default_str();
  tr->add_option("--updates-per-episode", tc.updates_per_episode)->capture_default_str();
  tr->add_option("--target-sync", tc.target_sync, "Gradient steps between target copies")->capture_default_str();
  tr->add_option("--lr", tc.learning_rate)->capture_default_str();
  tr->add_option("--sa-prob", tc.sa_preprocess_probability, "Probability of annealing a training start")
      ->capture_default_str();
  tr->add_option("--embed-dim", tc.embed_dim)->capture_default_str();
  tr->add_option("--layers", tc.layers)->capture_default_str();
  tr->add_option("--seed", tc.seed)->capture_default_str();
  tr->add_option("--checkpoint", tr_checkpoint, "Checkpoint output path")->required();
  tr->add_option("--checkpoint-every", tc.checkpoint_every)->capture_default_str();
  tr->add_option("--log", tr_log, "Training log CSV");

  // evaluate --------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Compare methods on a benchmark");
  std::string ev_bench, ev_checkpoint, ev_out, ev_samples, ev_switch;
  std::vector<std::string> ev_methods{"sa", "model", "sawr"};
  ScheduleFlags ev_sched;
  ScheduleFlags proxy_sched{0.1, 1.0, 10, 1};
  std::uint64_t ev_seed = 1;
  unsigned ev_threads = 1;
  ev->add_option("--benchmark", ev_bench, "Benchmark directory")->required();
  ev->add_option("--checkpoint", ev_checkpoint, "Trained parameters (needed for model/sawr)");
  ev->add_option("--methods", ev_methods)->delimiter(',')->check(CLI::IsMember({"sa", "model", "sawr"}))
      ->capture_default_str();
  ev_sched.add(ev);
  proxy_sched.add(ev, "proxy-");
  ev->add_option("--beta-switch", ev_switch, "SAwR switch inverse temperature (default 0.8*beta-max, 'inf' = SA)");
  ev->add_option("--annealer-samples", ev_samples, "Directory of <id>.sigma annealer samples replacing the proxy");
  ev->add_option("--seed", ev_seed)->capture_default_str();
  ev->add_option("--threads", ev_threads)->capture_default_str();
  ev->add_option("--out", ev_out, "Output directory")->required();

  // report ----------------------------------------------------------------
  auto* rp = app.add_subcommand("report", "Aggregate trial records into CSV and plot data");
  std::string rp_trials, rp_out, rp_plot;
  rp->add_option("--trials", rp_trials, "trials.csv from evaluate")->required();
  rp->add_option("--out", rp_out, "Aggregate CSV path")->required();
  rp->add_option("--plotdata", rp_plot, "Plot data path");

  // solve -----------------------------------------------------------------
  auto* sv = app.add_subcommand("solve", "Post-process one instance");
  std::string sv_method = "sawr", sv_instance, sv_start, sv_checkpoint, sv_out, sv_switch;
  ScheduleFlags sv_sched;
  std::uint64_t sv_seed = 1;
  sv->add_option("--method", sv_method)->check(CLI::IsMember({"sa", "model", "sawr"}))->capture_default_str();
  sv->add_option("instance", sv_instance, "Instance file")->required();
  sv->add_option("--start", sv_start, "Start configuration (default: random from --seed)");
  sv->add_option("--checkpoint", sv_checkpoint);
  sv->add_option("--beta-switch", sv_switch);
  sv_sched.add(sv);
  sv->add_option("--seed", sv_seed)->capture_default_str();
  sv->add_option("--out", sv_out, "Result configuration path");

  CLI11_PARSE(app, argc, argv);

  try {
    write_config(app, write_config_path);

    if (*gen) {
      if (paper_scale) {
        gen_sizes = {4, 8, 12, 16};
        gen_count = 500;
      }
      const auto entries = generate_benchmark(gen_sizes, gen_count, gen_seed, gen_out);
      std::cout << "wrote " << entries.size() << " instances to " << gen_out << '\n';
    } else if (*tr) {
      tc.checkpoint = tr_checkpoint;
      const TrainResult result = train(tc);
      if (!tr_log.empty()) write_train_log(result.log, tr_log);
      std::cout << "trained " << tc.episodes << " episodes, " << result.gradient_steps
                << " gradient steps -> " << tr_checkpoint << '\n';
      if (result.diverged) std::cerr << "warning: non-finite loss observed during training\n";
    } else if (*ev) {
      std::optional<QNetwork> params;
      if (!ev_checkpoint.empty()) params = read_checkpoint(fs::path(ev_checkpoint));
      EvalConfig cfg;
      cfg.methods.clear();
      for (const auto& m : ev_methods) cfg.methods.push_back(*parse_method(m));
      std::sort(cfg.methods.begin(), cfg.methods.end());
      cfg.methods.erase(std::unique(cfg.methods.begin(), cfg.methods.end()), cfg.methods.end());
      cfg.schedule = ev_sched.schedule();
      cfg.beta_switch = beta_switch_value(ev_switch);
      cfg.params = params ? &*params : nullptr;
      cfg.seed = ev_seed;
      cfg.threads = ev_threads;
      if (std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return m != Method::SA; }) &&
          !cfg.params) {
        std::cerr << "error: --checkpoint is required for model/sawr\n";
        return 2;
      }
      ProxyConfig proxy;
      proxy.schedule = proxy_sched.schedule();
      std::optional<fs::path> samples;
      if (!ev_samples.empty()) samples = ev_samples;
      const auto trials = prepare_trials(ev_bench, proxy, ev_seed, samples);
      const ExperimentReport report = evaluate(trials, cfg);
      fs::create_directories(ev_out);
      write_trials_csv(report.trials, fs::path(ev_out) / "trials.csv");
      write_report_csv(report.summaries, fs::path(ev_out) / "report.csv");
      write_timings(report.trials, fs::path(ev_out) / "timings.txt");
      for (const auto& s : report.summaries) {
        std::cout << "C" << s.size << ' ' << method_name(s.method) << ": " << s.improved << '/'
                  << s.trials << " improved";
        if (s.mean_improvement) std::cout << ", mean improvement " << *s.mean_improvement;
        std::cout << '\n';
      }
    } else if (*rp) {
      const auto rows = aggregate(read_trials_csv(rp_trials));
      write_report_csv(rows, rp_out);
      if (!rp_plot.empty()) write_plotdata(rows, rp_plot);
      std::cout << "wrote " << rows.size() << " rows to " << rp_out << '\n';
    } else if (*sv) {
      const IsingInstance inst = read_instance(fs::path(sv_instance));
      SpinConfiguration start = sv_start.empty() ? random_configuration(inst.topology(), sv_seed)
                                                 : read_configuration(fs::path(sv_start));
      if (start.size() != inst.size()) throw std::runtime_error("start configuration size mismatch");
      std::optional<QNetwork> params;
      if (!sv_checkpoint.empty()) params = read_checkpoint(fs::path(sv_checkpoint));
      const Method method = *parse_method(sv_method);
      if (method != Method::SA && !params) {
        std::cerr << "error: --checkpoint is required for model/sawr\n";
        return 2;
      }
      SpinConfiguration best;
      double best_energy = 0.0;
      const AnnealSchedule sched = sv_sched.schedule();
      if (method == Method::SA) {
        auto r = simulated_annealing(inst, start, sched, sv_seed);
        best = r.best_config;
        best_energy = r.best_energy;
      } else if (method == Method::Model) {
        auto t = episode(inst, start, *params, Policy::greedy());
        best = t.best_config;
        best_energy = t.best_energy;
      } else {
        SawrConfig sc;
        sc.schedule = sched;
        sc.beta_switch = beta_switch_value(sv_switch).value_or(SawrConfig::default_beta_switch(sched));
        sc.params = &*params;
        sc.seed = sv_seed;
        auto r = sawr::sawr(inst, start, sc);
        best = r.best_config;
        best_energy = r.best_energy;
      }
      std::cout << "start_energy " << format_double(energy(inst, start)) << '\n'
                << "best_energy " << format_double(best_energy) << '\n';
      if (!sv_out.empty()) write_configuration(best, fs::path(sv_out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
