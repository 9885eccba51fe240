#pragma once

// Online codebook maintenance under user motion: one update per tick, with
// reuse decisions logged per entry and spot-checked afterwards.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "subbeam/optimizer.hpp"

namespace subbeam {

/// Linear sweep from start to end over the scenario duration.
struct Trajectory {
  double start = 0.0;  ///< radians
  double end = 0.0;    ///< radians
  double base_snr = 1.0;

  double at(double fraction) const { return start + (end - start) * fraction; }
};

struct MobilityScenario {
  std::vector<Trajectory> users;
  double tick_interval = 5e-3;
  double duration = 10.0;
  std::size_t array_size = 32;
  /// Codebook sensing angles, radians.
  std::vector<double> sweep{0.0};
  /// Entry whose gains are logged.
  std::size_t focus_entry = 0;
  OptimizerConfig optimizer;
  std::size_t validation_ticks = 20;

  std::size_t ticks() const {
    return static_cast<std::size_t>(std::llround(duration / tick_interval));
  }

  void validate() const {
    if (!(tick_interval > 0.0) || !(duration > 0.0))
      throw std::invalid_argument("MobilityScenario: tick_interval and duration must be > 0");
    if (ticks() == 0) throw std::invalid_argument("MobilityScenario: duration shorter than one tick");
    if (sweep.empty()) throw std::invalid_argument("MobilityScenario: empty sweep");
    if (focus_entry >= sweep.size()) throw std::invalid_argument("MobilityScenario: focus_entry out of range");
    for (const auto& t : users)
      if (std::abs(t.start) > optimizer.fov || std::abs(t.end) > optimizer.fov)
        throw std::invalid_argument("MobilityScenario: trajectory leaves the FoV");
  }

  /// The four-user scenario: users at -10, +10, +30 degrees and one moving
  /// from -30 to +30 degrees.
  static MobilityScenario four_user_sweep() {
    MobilityScenario s;
    s.users = {{deg2rad(-30.0), deg2rad(30.0)},
               {deg2rad(-10.0), deg2rad(-10.0)},
               {deg2rad(10.0), deg2rad(10.0)},
               {deg2rad(30.0), deg2rad(30.0)}};
    return s;
  }
};

struct MobilityTick {
  std::size_t tick = 0;
  double time = 0.0;
  std::vector<double> user_angles;  ///< radians
  std::size_t reoptimized = 0;
  double focus_gamma_min = 0.0;     ///< stored value, linear
  double focus_sensing_gain = 0.0;  ///< linear
  std::vector<double> focus_user_gains;
};

struct DecisionCheck {
  std::size_t tick = 0;
  std::size_t entry = 0;
  bool reused = false;
  bool decision_matches = false;
  /// Fresh-solve bottleneck SNR minus the kept entry's, dB.
  double fresh_gap_db = 0.0;
};

struct MobilityResult {
  std::vector<MobilityTick> ticks;
  std::size_t reopt_ticks = 0;
  std::size_t reopt_entries = 0;
  std::size_t total_entries = 0;
  double sensing_min_db = 0.0;
  double sensing_max_db = 0.0;
  std::vector<double> solve_seconds;
  std::vector<DecisionCheck> checks;

  double reopt_fraction() const {
    return ticks.empty() ? 0.0 : static_cast<double>(reopt_ticks) / static_cast<double>(ticks.size());
  }
};

inline std::vector<UserLink> users_at(const MobilityScenario& sc, double fraction) {
  std::vector<UserLink> out;
  for (const auto& t : sc.users) out.push_back({t.at(fraction), t.base_snr});
  return out;
}

/// Reuse tolerance allowed between a kept entry and a fresh solve.
inline constexpr double kFreshGapToleranceDb = 0.5;

inline MobilityResult run_mobility(const MobilityScenario& sc, std::uint64_t seed) {
  sc.validate();
  const auto geom = ArrayGeometry::ula(sc.array_size);
  OptimizerConfig cfg = sc.optimizer;
  cfg.seed = seed;
  const std::size_t n_ticks = sc.ticks();

  std::vector<Direction> sweep;
  for (double a : sc.sweep) sweep.push_back(sensing_direction(geom, a));
  Codebook book = build_codebook(users_at(sc, 0.0), sweep, 1.0, geom, cfg);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> sample;
  {
    std::vector<std::size_t> all(n_ticks);
    for (std::size_t k = 0; k < n_ticks; ++k) all[k] = k + 1;
    std::shuffle(all.begin(), all.end(), rng);
    sample.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(sc.validation_ticks, n_ticks)));
    std::sort(sample.begin(), sample.end());
  }

  MobilityResult res;
  res.sensing_min_db = std::numeric_limits<double>::infinity();
  res.sensing_max_db = -std::numeric_limits<double>::infinity();
  std::size_t next_sample = 0;
  for (std::size_t k = 1; k <= n_ticks; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(n_ticks);
    const auto users = users_at(sc, frac);
    auto [next, stats] = update_codebook(book, users, cfg);

    if (next_sample < sample.size() && sample[next_sample] == k) {
      ++next_sample;
      for (std::size_t m = 0; m < book.entries.size(); ++m) {
        DecisionCheck c;
        c.tick = k;
        c.entry = m;
        c.reused = !stats.entry_reoptimized[m];
        // Recompute the bottleneck SNR of the previous weights directly.
        const auto& old = book.entries[m];
        double fresh_min = std::numeric_limits<double>::infinity();
        for (const auto& u : users)
          fresh_min = std::min(fresh_min, effective_snr(u.base_snr, old.weights, geom, u.angle));
        const bool expect_reuse = users.empty() || std::isinf(old.gamma_min) ||
                                  std::abs(fresh_min - old.gamma_min) <= cfg.snr_match_tol;
        c.decision_matches = expect_reuse == c.reused;
        const auto fresh = solve_opt_accel(users, SensingTarget{old.sensing, 1.0}, geom, cfg);
        const double kept = gamma_min_of(next.entries[m].weights, geom, users);
        c.fresh_gap_db = lin2db(fresh.gamma_min) - lin2db(kept);
        res.checks.push_back(c);
      }
    }

    book = std::move(next);
    MobilityTick t;
    t.tick = k;
    t.time = static_cast<double>(k) * sc.tick_interval;
    for (const auto& u : users) t.user_angles.push_back(u.angle);
    t.reoptimized = stats.reoptimized;
    const auto& focus = book.entries[sc.focus_entry];
    t.focus_gamma_min = focus.gamma_min;
    t.focus_sensing_gain = beamforming_gain(focus.weights, geom, focus.sensing);
    for (const auto& u : users) t.focus_user_gains.push_back(beamforming_gain(focus.weights, geom, u.angle));
    const double sg = lin2db(t.focus_sensing_gain);
    res.sensing_min_db = std::min(res.sensing_min_db, sg);
    res.sensing_max_db = std::max(res.sensing_max_db, sg);
    if (stats.reoptimized > 0) ++res.reopt_ticks;
    res.reopt_entries += stats.reoptimized;
    res.total_entries += book.entries.size();
    for (std::size_t m = 0; m < stats.entry_reoptimized.size(); ++m)
      if (stats.entry_reoptimized[m]) res.solve_seconds.push_back(stats.solve_seconds[m]);
    res.ticks.push_back(std::move(t));
  }
  return res;
}

/// Time series without wall-clock columns, so reruns are byte-identical.
inline void write_mobility_csv(std::ostream& out, const MobilityResult& r) {
  if (r.ticks.empty()) return;
  const std::size_t nu = r.ticks.front().user_angles.size();
  out << "tick,time_s";
  for (std::size_t u = 0; u < nu; ++u) out << ",user" << u << "_deg";
  out << ",reoptimized,gamma_min_db,sensing_gain_db";
  for (std::size_t u = 0; u < nu; ++u) out << ",user" << u << "_gain_db";
  out << '\n';
  char b[64];
  for (const auto& t : r.ticks) {
    std::snprintf(b, sizeof b, "%zu,%.3f", t.tick, t.time);
    out << b;
    for (double a : t.user_angles) {
      std::snprintf(b, sizeof b, ",%.4f", rad2deg(a));
      out << b;
    }
    std::snprintf(b, sizeof b, ",%zu,%.6f,%.6f", t.reoptimized, lin2db(t.focus_gamma_min),
                  lin2db(t.focus_sensing_gain));
    out << b;
    for (double g : t.focus_user_gains) {
      std::snprintf(b, sizeof b, ",%.6f", lin2db(g));
      out << b;
    }
    out << '\n';
  }
}

}  // namespace subbeam
