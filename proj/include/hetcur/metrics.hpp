#pragma once

// Episode records, success-rate windows, threshold crossing, steps-to-goal
// summaries, advantage-dominance maps and CSV / SVG export.
//
// CSV schemas (all files have a header row; doubles use 17 significant digits):
//   episodes.csv        agent_id,episode_index,success,via_corridor,steps,return_ext
//   sr_curves.csv       agent_id,episode_index,sr,sr_corridor
//   dominance_<b>.csv   x,y,ext,int          b = w<agent>_<first>-<last+1>
//   diagnostics.csv     cycle,agent_id,runner,episode_count,beta,mean_ratio,clip_fraction,
//                       entropy,adv_ext_abs,adv_int_abs,critic_loss,policy_loss,ext_dominant_fraction

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hetcur/env_grid.hpp"
#include "hetcur/error.hpp"

namespace hetcur::metrics {

struct EpisodeRecord {
  int agent_id = 0;
  long episode_index = 0;
  bool success = false;
  bool via_corridor = false;
  int steps = 0;
  double return_ext = 0.0;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct DominanceCounts {
  std::uint64_t ext = 0;
  std::uint64_t intr = 0;
  friend bool operator==(const DominanceCounts&, const DominanceCounts&) = default;
};

/// Per-bin counts of steps whose mixed advantage was led by either stream.
struct DominanceMap {
  int width = 0;
  int height = 0;
  std::vector<DominanceCounts> cells;

  DominanceMap() = default;
  DominanceMap(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w * h)) {}
  DominanceCounts& at(Cell c) { return cells.at(static_cast<std::size_t>(c.y * width + c.x)); }
  [[nodiscard]] const DominanceCounts& at(Cell c) const { return cells.at(static_cast<std::size_t>(c.y * width + c.x)); }
  friend bool operator==(const DominanceMap&, const DominanceMap&) = default;
};

struct DiagnosticsRow {
  long cycle = 0;
  int agent_id = 0;
  int runner = 0;
  long episode_count = 0;
  double beta = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double adv_ext_abs = 0.0;
  double adv_int_abs = 0.0;
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double ext_dominant_fraction = 0.0;
  friend bool operator==(const DiagnosticsRow&, const DiagnosticsRow&) = default;
};

struct MetricsLog {
  int width = 0;
  int height = 0;
  long bucket_size = 500;
  std::vector<EpisodeRecord> records;
  /// (agent_id, bucket index) -> map
  std::map<std::pair<int, long>, DominanceMap> dominance;
  std::vector<DiagnosticsRow> diagnostics;

  friend bool operator==(const MetricsLog&, const MetricsLog&) = default;
};

inline std::vector<int> agents_in(std::span<const EpisodeRecord> records) {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.agent_id);
  return {ids.begin(), ids.end()};
}

/// Trailing-window mean of success (or success through the corridor) over one
/// agent's episodes. Entries before the window fills use the prefix mean.
inline std::vector<double> success_rate_window(std::span<const EpisodeRecord> records, int agent_id,
                                               std::size_t window = 100, bool corridor_only = false) {
  if (window == 0) throw Error(Errc::LengthMismatch, "window must be >= 1");
  std::vector<double> hits;
  for (const auto& r : records) {
    if (r.agent_id == agent_id) hits.push_back(r.success && (!corridor_only || r.via_corridor) ? 1.0 : 0.0);
  }
  if (hits.empty()) throw Error(Errc::UnknownAgent, "no episodes for agent " + std::to_string(agent_id));
  std::vector<double> sr(hits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    sum += hits[i];
    if (i >= window) sum -= hits[i - window];
    sr[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return sr;
}

/// First index >= `start` at which the series reaches `threshold`.
inline std::optional<std::size_t> episodes_to_threshold(std::span<const double> series, double threshold,
                                                        std::size_t start = 0) {
  for (std::size_t i = start; i < series.size(); ++i) {
    if (series[i] >= threshold) return i;
  }
  return std::nullopt;
}

struct StepsSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t successes = 0;
};

/// Mean and population std of episode length over the successful episodes
/// among the agent's last `last_k` episodes.
inline StepsSummary steps_summary(std::span<const EpisodeRecord> records, int agent_id, std::size_t last_k = 100) {
  std::vector<const EpisodeRecord*> mine;
  for (const auto& r : records) {
    if (r.agent_id == agent_id) mine.push_back(&r);
  }
  if (mine.empty()) throw Error(Errc::UnknownAgent, "no episodes for agent " + std::to_string(agent_id));
  const std::size_t from = mine.size() > last_k ? mine.size() - last_k : 0;
  std::vector<double> steps;
  for (std::size_t i = from; i < mine.size(); ++i) {
    if (mine[i]->success) steps.push_back(static_cast<double>(mine[i]->steps));
  }
  if (steps.empty()) throw Error(Errc::NoSuccessfulEpisodes, "agent " + std::to_string(agent_id));
  StepsSummary s;
  s.successes = steps.size();
  for (double v : steps) s.mean += v;
  s.mean /= static_cast<double>(steps.size());
  for (double v : steps) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(steps.size()));
  return s;
}

/// Adds one rollout's per-step dominance flags to the bucket holding
/// `episode_index`.
inline void record_dominance(MetricsLog& log, int agent_id, long episode_index, std::span<const Cell> bins,
                             std::span<const std::uint8_t> ext_dominant) {
  if (bins.size() != ext_dominant.size()) throw Error(Errc::LengthMismatch, "bins and dominance flags differ");
  const long bucket = log.bucket_size > 0 ? episode_index / log.bucket_size : 0;
  auto [it, inserted] = log.dominance.try_emplace({agent_id, bucket}, log.width, log.height);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    auto& c = it->second.at(bins[i]);
    if (ext_dominant[i]) ++c.ext;
    else ++c.intr;
  }
}

// ---- Export ----------------------------------------------------------------

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kEpisodesHeader = "agent_id,episode_index,success,via_corridor,steps,return_ext";
inline constexpr const char* kSrHeader = "agent_id,episode_index,sr,sr_corridor";
inline constexpr const char* kDominanceHeader = "x,y,ext,int";
inline constexpr const char* kDiagnosticsHeader =
    "cycle,agent_id,runner,episode_count,beta,mean_ratio,clip_fraction,entropy,adv_ext_abs,adv_int_abs,"
    "critic_loss,policy_loss,ext_dominant_fraction";

inline void write_episodes(std::ostream& out, std::span<const EpisodeRecord> records) {
  out << kEpisodesHeader << '\n';
  for (const auto& r : records) {
    out << r.agent_id << ',' << r.episode_index << ',' << (r.success ? 1 : 0) << ',' << (r.via_corridor ? 1 : 0)
        << ',' << r.steps << ',' << fmt_double(r.return_ext) << '\n';
  }
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
  return f;
}

inline std::vector<EpisodeRecord> read_episodes(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEpisodesHeader) throw Error(Errc::IoFailure, "bad episodes.csv header");
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) throw Error(Errc::IoFailure, "bad episodes.csv row '" + line + "'");
    EpisodeRecord r;
    r.agent_id = std::stoi(f[0]);
    r.episode_index = std::stol(f[1]);
    r.success = f[2] == "1";
    r.via_corridor = f[3] == "1";
    r.steps = std::stoi(f[4]);
    r.return_ext = std::stod(f[5]);
    out.push_back(r);
  }
  return out;
}

inline void write_sr_curves(std::ostream& out, std::span<const EpisodeRecord> records, std::size_t window = 100) {
  out << kSrHeader << '\n';
  for (int agent : agents_in(records)) {
    const auto sr = success_rate_window(records, agent, window, false);
    const auto src = success_rate_window(records, agent, window, true);
    for (std::size_t i = 0; i < sr.size(); ++i) {
      out << agent << ',' << i << ',' << fmt_double(sr[i]) << ',' << fmt_double(src[i]) << '\n';
    }
  }
}

inline void write_dominance(std::ostream& out, const DominanceMap& map) {
  out << kDominanceHeader << '\n';
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const auto& c = map.at({x, y});
      if (c.ext == 0 && c.intr == 0) continue;
      out << x << ',' << y << ',' << c.ext << ',' << c.intr << '\n';
    }
  }
}

inline std::string dominance_bucket_name(int agent, long bucket, long bucket_size) {
  return "w" + std::to_string(agent) + "_" + std::to_string(bucket * bucket_size) + "-" +
         std::to_string((bucket + 1) * bucket_size);
}

inline void write_diagnostics(std::ostream& out, std::span<const DiagnosticsRow> rows) {
  out << kDiagnosticsHeader << '\n';
  for (const auto& r : rows) {
    out << r.cycle << ',' << r.agent_id << ',' << r.runner << ',' << r.episode_count << ',' << fmt_double(r.beta)
        << ',' << fmt_double(r.mean_ratio) << ',' << fmt_double(r.clip_fraction) << ',' << fmt_double(r.entropy)
        << ',' << fmt_double(r.adv_ext_abs) << ',' << fmt_double(r.adv_int_abs) << ',' << fmt_double(r.critic_loss)
        << ',' << fmt_double(r.policy_loss) << ',' << fmt_double(r.ext_dominant_fraction) << '\n';
  }
}

inline std::vector<DiagnosticsRow> read_diagnostics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kDiagnosticsHeader) throw Error(Errc::IoFailure, "bad diagnostics header");
  std::vector<DiagnosticsRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 13) throw Error(Errc::IoFailure, "bad diagnostics row");
    DiagnosticsRow r;
    r.cycle = std::stol(f[0]);
    r.agent_id = std::stoi(f[1]);
    r.runner = std::stoi(f[2]);
    r.episode_count = std::stol(f[3]);
    double* doubles[] = {&r.beta, &r.mean_ratio, &r.clip_fraction, &r.entropy, &r.adv_ext_abs,
                         &r.adv_int_abs, &r.critic_loss, &r.policy_loss, &r.ext_dominant_fraction};
    for (std::size_t k = 0; k < 9; ++k) *doubles[k] = std::stod(f[4 + k]);
    out.push_back(r);
  }
  return out;
}

/// Minimal static line chart of the per-agent success-rate curves.
inline void write_sr_svg(std::ostream& out, std::span<const EpisodeRecord> records, std::size_t window = 100) {
  constexpr double W = 640, H = 360, pad = 40;
  static constexpr const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
  const auto agents = agents_in(records);
  std::size_t longest = 1;
  for (int a : agents) longest = std::max(longest, success_rate_window(records, a, window).size());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"12\">episode</text>\n";
  out << "<text x=\"12\" y=\"" << pad - 10 << "\" font-size=\"12\">SR</text>\n";
  for (std::size_t k = 0; k < agents.size(); ++k) {
    for (int corridor = 0; corridor < 2; ++corridor) {
      const auto sr = success_rate_window(records, agents[k], window, corridor == 1);
      out << "<polyline fill=\"none\" stroke=\"" << colors[k % 5] << "\""
          << (corridor ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
      for (std::size_t i = 0; i < sr.size(); ++i) {
        const double x = pad + (W - 2 * pad) * static_cast<double>(i) / static_cast<double>(longest);
        const double y = H - pad - (H - 2 * pad) * sr[i];
        out << x << ',' << y << ' ';
      }
      out << "\"/>\n";
    }
    out << "<text x=\"" << W - pad - 60 << "\" y=\"" << pad + 14.0 * static_cast<double>(k) << "\" font-size=\"12\" fill=\""
        << colors[k % 5] << "\">W" << agents[k] << "</text>\n";
  }
  out << "</svg>\n";
}

/// Writes every table of `log` into `out_dir` (created if needed).
inline std::vector<std::filesystem::path> export_log(const MetricsLog& log, const std::filesystem::path& out_dir,
                                                     bool svg = true, std::size_t window = 100) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& name) {
    const auto path = out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::IoFailure, "cannot write " + path.string());
    written.push_back(path);
    return f;
  };
  auto check = [](std::ofstream& f, const std::filesystem::path& p) {
    f.flush();
    if (!f) throw Error(Errc::IoFailure, "write failed for " + p.string());
  };
  {
    auto f = open("episodes.csv");
    write_episodes(f, log.records);
    check(f, written.back());
  }
  {
    auto f = open("sr_curves.csv");
    write_sr_curves(f, log.records, window);
    check(f, written.back());
  }
  for (const auto& [key, map] : log.dominance) {
    auto f = open("dominance_" + dominance_bucket_name(key.first, key.second, log.bucket_size) + ".csv");
    write_dominance(f, map);
    check(f, written.back());
  }
  {
    auto f = open("diagnostics.csv");
    write_diagnostics(f, log.diagnostics);
    check(f, written.back());
  }
  if (svg) {
    auto f = open("sr_curve.svg");
    write_sr_svg(f, log.records, window);
    check(f, written.back());
  }
  return written;
}

}  // namespace hetcur::metrics
