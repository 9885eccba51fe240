#pragma once

// Three ways to run the same scene: single-user beamforming, one sensing
// beam per DMRS symbol, and sub-symbol switching with pre-distortion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "subbeam/apps/isac.hpp"

namespace subbeam {

enum class BaselineMode { Subf, FixedBeam, Subbeam };

inline const char* to_string(BaselineMode m) {
  switch (m) {
    case BaselineMode::Subf: return "subf";
    case BaselineMode::FixedBeam: return "fixed-beam";
    case BaselineMode::Subbeam: return "subbeam";
  }
  return "?";
}

inline BaselineMode parse_baseline_mode(const std::string& s) {
  if (s == "subf") return BaselineMode::Subf;
  if (s == "fixed-beam") return BaselineMode::FixedBeam;
  if (s == "subbeam") return BaselineMode::Subbeam;
  throw std::invalid_argument("unknown baseline mode '" + s + "' (subf, fixed-beam, subbeam)");
}

struct BaselineConfig {
  Numerology numerology;
  std::size_t array_size = 16;
  std::size_t num_beams = 34;
  double sweep_step_deg = 1.0;
  double sensing_angle_deg = 0.0;
  Modulation modulation = Modulation::Qam64;
  OptimizerConfig optimizer;
  DelaySearchConfig search;
  std::size_t slots = 4;
};

struct BaselineResult {
  BaselineMode mode = BaselineMode::Subf;
  std::vector<double> user_evm_percent;
  std::vector<double> user_ber;
  std::size_t beams_per_dmrs_symbol = 0;
  /// Sensing CSI toward the sensing angle, gain-normalized, averaged over
  /// DMRS symbols and slots; empty for SUBF.
  std::vector<double> sensing_freq;  ///< cycles per sample
  std::vector<double> sensing_amp_db;
  /// Median refined delay estimate, samples.
  double sensing_delay = 0.0;
};

/// Sub-symbol sweep: num_beams azimuths at sweep_step_deg spacing with the
/// sensing angle at index num_beams / 2.
inline std::vector<double> baseline_sweep(const BaselineConfig& cfg) {
  std::vector<double> az;
  const long half = static_cast<long>(cfg.num_beams / 2);
  for (long m = 0; m < static_cast<long>(cfg.num_beams); ++m)
    az.push_back(deg2rad(cfg.sensing_angle_deg + cfg.sweep_step_deg * static_cast<double>(m - half)));
  return az;
}

inline BaselineResult run_baseline(BaselineMode mode, const Scene& scene, const BaselineConfig& cfg,
                                   std::uint64_t seed) {
  if (cfg.slots == 0) throw std::invalid_argument("run_baseline: slots must be >= 1");
  if (cfg.num_beams == 0) throw std::invalid_argument("run_baseline: num_beams must be >= 1");
  const auto geom = ArrayGeometry::ula(cfg.array_size);
  const auto users = user_links(scene);
  const Direction target = sensing_direction(geom, deg2rad(cfg.sensing_angle_deg));

  IsacSetup setup;
  setup.numerology = cfg.numerology;
  setup.geometry = geom;
  setup.modulation = cfg.modulation;
  setup.search = cfg.search;
  setup.data_beam = data_beam_for(users, geom, cfg.optimizer);
  std::size_t probe = 0;
  switch (mode) {
    case BaselineMode::Subf:
      setup.sensing_beams = {{setup.data_beam}};
      setup.predistort = false;
      break;
    case BaselineMode::FixedBeam:
      setup.sensing_beams = {{conjugate_beam(geom, target)}};
      setup.predistort = true;
      break;
    case BaselineMode::Subbeam: {
      const auto az = baseline_sweep(cfg);
      const auto sweep = azimuth_sweep(geom, az);
      std::vector<Beamformer> set;
      if (users.empty()) {
        for (const auto& d : sweep) set.push_back(conjugate_beam(geom, d));
      } else {
        const auto book = build_codebook(users, sweep, 1.0, geom, cfg.optimizer);
        for (const auto& e : book.entries) set.push_back(e.weights);
      }
      setup.sensing_beams = {set};
      setup.predistort = true;
      probe = cfg.num_beams / 2;
      break;
    }
  }

  BaselineResult out;
  out.mode = mode;
  out.beams_per_dmrs_symbol = mode == BaselineMode::Subf ? 0 : setup.sensing_beams.front().size();
  const bool sense = mode != BaselineMode::Subf;
  const double g_probe = sense ? beamforming_gain(setup.sensing_beams.front()[probe], geom, target) : 0.0;
  if (sense && !(g_probe > 0.0))
    throw std::invalid_argument("run_baseline: sensing beam has no gain toward the sensing angle");

  std::vector<double> evm_sum(users.size(), 0.0), ber_sum(users.size(), 0.0);
  std::vector<double> amp_sum;
  std::vector<double> amp_count;
  std::vector<double> delays;
  for (std::size_t s = 0; s < cfg.slots; ++s) {
    const auto res = simulate_isac_slot(setup, scene, broadside_rx_gain(), seed * 7919ULL + s, sense);
    for (std::size_t u = 0; u < users.size(); ++u) {
      evm_sum[u] += res.users[u].estimated.evm_percent;
      ber_sum[u] += res.users[u].estimated.ber;
    }
    for (const auto& sym : res.sensing) {
      const auto& c = sym[probe];
      if (amp_sum.empty()) {
        amp_sum.assign(c.csi.size(), 0.0);
        amp_count.assign(c.csi.size(), 0.0);
      }
      for (std::size_t k = 0; k < c.csi.size(); ++k) {
        if (!c.valid[k]) continue;
        amp_sum[k] += std::abs(c.csi[k]) / std::sqrt(g_probe);
        amp_count[k] += 1.0;
      }
      delays.push_back(extract_features(c).delay_estimate);
    }
  }
  for (std::size_t u = 0; u < users.size(); ++u) {
    out.user_evm_percent.push_back(evm_sum[u] / static_cast<double>(cfg.slots));
    out.user_ber.push_back(ber_sum[u] / static_cast<double>(cfg.slots));
  }
  const double n = static_cast<double>(amp_sum.size());
  for (std::size_t k = 0; k < amp_sum.size(); ++k) {
    if (amp_count[k] == 0.0) continue;
    out.sensing_freq.push_back(signed_bin(k, amp_sum.size()) / n);
    out.sensing_amp_db.push_back(20.0 * std::log10(amp_sum[k] / amp_count[k]));
  }
  if (!delays.empty()) out.sensing_delay = median_value(delays);
  return out;
}

/// Largest |dB difference| between two sensing profiles, matching each bin
/// of the coarser profile to the nearest frequency of the finer one.
inline double profile_max_difference_db(const BaselineResult& coarse, const BaselineResult& fine) {
  if (coarse.sensing_freq.empty() || fine.sensing_freq.empty())
    throw std::invalid_argument("profile_max_difference_db: missing sensing profile");
  double worst = 0.0;
  for (std::size_t i = 0; i < coarse.sensing_freq.size(); ++i) {
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < fine.sensing_freq.size(); ++j) {
      const double d = std::abs(fine.sensing_freq[j] - coarse.sensing_freq[i]);
      if (d < dist) {
        dist = d;
        best = j;
      }
    }
    worst = std::max(worst, std::abs(coarse.sensing_amp_db[i] - fine.sensing_amp_db[best]));
  }
  return worst;
}

}  // namespace subbeam
