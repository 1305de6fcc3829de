#pragma once

// Single-parameter sweep: one run per value, each exported to its own
// subdirectory, plus a combined sweep_sr.csv
// (<param>,agent_id,episode_index,sr,sr_corridor).

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hetcur/config.hpp"
#include "hetcur/error.hpp"
#include "hetcur/experiment.hpp"
#include "hetcur/metrics.hpp"

namespace hetcur {

inline constexpr const char* kSweepParams[] = {"beta", "curiosity_cutoff_episode", "seed", "lr"};

inline ExperimentConfig with_param(ExperimentConfig c, const std::string& param, double value) {
  if (param == "beta") c.beta = value;
  else if (param == "curiosity_cutoff_episode") c.curiosity_cutoff_episode = static_cast<long>(value);
  else if (param == "seed") c.seed = static_cast<std::uint64_t>(value);
  else if (param == "lr") c.ppo.lr = value;
  else throw Error(Errc::InconsistentConfig, "cannot sweep '" + param + "'");
  validate(c);
  return c;
}

struct SweepPoint {
  double value = 0.0;
  metrics::MetricsLog log;
};

inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::string& param,
                                         const std::vector<double>& values, const std::filesystem::path& out_dir,
                                         const RunOptions& opts = {}) {
  if (values.empty()) throw Error(Errc::InconsistentConfig, "sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(with_param(base, param, v));

  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint p{values[i], run_experiment(configs[i], opts)};
    if (!out_dir.empty()) metrics::export_log(p.log, out_dir / (param + "_" + metrics::fmt_double(values[i])));
    points.push_back(std::move(p));
    if (opts.stop && opts.stop->load()) break;
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / "sweep_sr.csv", std::ios::binary);
    if (!f) throw Error(Errc::IoFailure, "cannot write sweep_sr.csv");
    f << param << ",agent_id,episode_index,sr,sr_corridor\n";
    for (const auto& p : points) {
      for (int agent : metrics::agents_in(p.log.records)) {
        const auto sr = metrics::success_rate_window(p.log.records, agent, base.sr_window, false);
        const auto src = metrics::success_rate_window(p.log.records, agent, base.sr_window, true);
        for (std::size_t e = 0; e < sr.size(); ++e) {
          f << metrics::fmt_double(p.value) << ',' << agent << ',' << e << ',' << metrics::fmt_double(sr[e]) << ','
            << metrics::fmt_double(src[e]) << '\n';
        }
      }
    }
    if (!f) throw Error(Errc::IoFailure, "write failed for sweep_sr.csv");
  }
  return points;
}

}  // namespace hetcur
