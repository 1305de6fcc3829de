// Command-line front end: run, sweep, probe-random.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetcur/config.hpp"
#include "hetcur/env_grid.hpp"
#include "hetcur/experiment.hpp"
#include "hetcur/metrics.hpp"
#include "hetcur/probe.hpp"
#include "hetcur/sweep.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

hetcur::RunOptions progress_options(bool quiet) {
  hetcur::RunOptions opts;
  opts.stop = &g_stop;
  if (!quiet) {
    opts.on_cycle = [](const hetcur::TrainState& s) {
      if (s.cycle % 200 != 0 && !s.finished()) return;
      std::fprintf(stderr, "cycle %ld  steps %llu  episodes", s.cycle,
                   static_cast<unsigned long long>(s.total_steps));
      for (std::size_t a = 0; a < s.episodes_done.size(); ++a) {
        std::fprintf(stderr, "  %s=%ld", s.profiles[a].name.c_str(), s.episodes_done[a]);
      }
      std::fprintf(stderr, "\n");
    };
  }
  return opts;
}

void print_summary(const hetcur::metrics::MetricsLog& log, const hetcur::ExperimentConfig& cfg) {
  for (int agent : hetcur::metrics::agents_in(log.records)) {
    const auto sr = hetcur::metrics::success_rate_window(log.records, agent, cfg.sr_window);
    const auto src = hetcur::metrics::success_rate_window(log.records, agent, cfg.sr_window, true);
    std::printf("agent %d: episodes %zu  final SR %.3f  corridor SR %.3f", agent, sr.size(), sr.back(), src.back());
    try {
      const auto st = hetcur::metrics::steps_summary(log.records, agent, cfg.sr_window);
      std::printf("  steps %.1f +- %.1f", st.mean, st.std);
    } catch (const hetcur::Error&) {
    }
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous-agent curiosity experiments on door-gated gridworlds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  long episodes = 0;
  int threads = 0;
  bool quiet = false;
  bool print_config = false;

  auto* run = app.add_subcommand("run", "Train one experiment and export its metrics");
  run->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--episodes", episodes, "Override the per-agent episode budget");
  run->add_option("--threads", threads, "Collection threads");
  run->add_flag("--quiet", quiet, "No progress output");
  run->add_flag("--print-config", print_config, "Print the resolved config and exit");

  std::string param = "beta";
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per parameter value");
  sweep->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Parameter to vary")
      ->check(CLI::IsMember({"beta", "curiosity_cutoff_episode", "seed", "lr"}));
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_flag("--quiet", quiet, "No progress output");

  std::string map_path = "maps/mwh_grid.txt";
  long probe_episodes = 10000;
  int max_steps = 600;
  auto* probe = app.add_subcommand("probe-random", "Success rates of uniform-random agents");
  probe->add_option("--map", map_path, "Map file")->check(CLI::ExistingFile);
  probe->add_option("--episodes", probe_episodes, "Episodes per agent");
  probe->add_option("--max-steps", max_steps, "Step limit per episode");
  probe->add_option("--seed", seed, "Random seed");

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  hetcur::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = hetcur::load_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (episodes > 0) cfg.episodes = episodes;
    if (threads > 0) cfg.threads = threads;
    hetcur::validate(cfg);
  } catch (const hetcur::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*run) {
      if (print_config) {
        std::cout << hetcur::to_json(cfg).dump(2) << '\n';
        return 0;
      }
      hetcur::TrainState state = hetcur::build_experiment(cfg);
      bool complete = false;
      try {
        complete = hetcur::run_experiment(state, progress_options(quiet));
      } catch (...) {
        hetcur::metrics::export_log(state.log, out_dir, true, cfg.sr_window);
        std::cerr << "run aborted; partial metrics written to " << out_dir << '\n';
        throw;
      }
      hetcur::metrics::export_log(state.log, out_dir, true, cfg.sr_window);
      if (!state.log.records.empty()) print_summary(state.log, cfg);
      if (!complete) {
        std::cerr << "interrupted; partial metrics written to " << out_dir << '\n';
        return 130;
      }
      return 0;
    }
    if (*sweep) {
      const auto points = hetcur::run_sweep(cfg, param, values, out_dir, progress_options(quiet));
      for (const auto& p : points) {
        std::printf("%s = %s\n", param.c_str(), hetcur::metrics::fmt_double(p.value).c_str());
        if (!p.log.records.empty()) print_summary(p.log, cfg);
      }
      return g_stop.load() ? 130 : 0;
    }
    if (*probe) {
      const auto map = hetcur::load_map(map_path);
      std::printf("agent,episodes,successes,success_rate,corridor_successes,corridor_share,mean_success_steps\n");
      for (const auto& profile : hetcur::build_profiles(cfg)) {
        const auto r = hetcur::probe_random(map, profile, probe_episodes, max_steps, seed);
        std::printf("%s,%ld,%ld,%.6f,%ld,%.6f,%.3f\n", profile.name.c_str(), r.episodes, r.successes,
                    r.success_rate(), r.corridor_successes, r.corridor_share(), r.mean_success_steps);
      }
      return 0;
    }
  } catch (const hetcur::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == hetcur::Errc::InconsistentConfig ? 2 : 1;
  }
  return 0;
}
