#pragma once

// 2D imaging by sweeping one beam per pixel through the sub-symbol windows
// of consecutive DMRS symbols.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "subbeam/apps/isac.hpp"

namespace subbeam {

struct ImagingGrid {
  std::vector<double> az_angles;  ///< radians
  std::vector<double> el_angles;  ///< radians
  /// heatmap[e][a], received power over the pixel beam's transmit gain, dB.
  std::vector<std::vector<double>> heatmap;
  /// Same layout, un-normalized power in dB.
  std::vector<std::vector<double>> raw;

  static ImagingGrid uniform(double half_span_deg = 15.0, double step_deg = 1.0) {
    ImagingGrid g;
    const int n = static_cast<int>(std::lround(2.0 * half_span_deg / step_deg));
    for (int i = 0; i <= n; ++i) {
      const double a = deg2rad(-half_span_deg + step_deg * i);
      g.az_angles.push_back(a);
      g.el_angles.push_back(a);
    }
    return g;
  }

  std::size_t pixels() const { return az_angles.size() * el_angles.size(); }
};

struct AirTime {
  std::size_t directions = 0;
  std::size_t per_slot = 0;  ///< M x DMRS symbols per slot
  std::size_t slots = 0;     ///< whole slots
  std::size_t dmrs_symbols = 0;
  double whole_slot_seconds = 0.0;
  /// Only DMRS symbols completely filled with beams, at dmrs-per-slot symbols
  /// per slot.
  double dmrs_counted_seconds = 0.0;
};

/// Whole-slot and DMRS-counted air time for sweeping `directions` beams.
inline AirTime imaging_air_time(std::size_t directions, std::size_t num_beams,
                                const Numerology& num) {
  num.validate();
  if (num_beams == 0) throw std::invalid_argument("imaging_air_time: M must be >= 1");
  const std::size_t dmrs = num.dmrs_symbols.size();
  if (dmrs == 0) throw std::invalid_argument("imaging_air_time: no DMRS symbols");
  AirTime t;
  t.directions = directions;
  t.per_slot = num_beams * dmrs;
  t.slots = (directions + t.per_slot - 1) / t.per_slot;
  t.dmrs_symbols = (directions + num_beams - 1) / num_beams;
  t.whole_slot_seconds = static_cast<double>(t.slots) * num.slot_duration;
  t.dmrs_counted_seconds = static_cast<double>(directions / num_beams) /
                           static_cast<double>(dmrs) * num.slot_duration;
  return t;
}

struct ImagingConfig {
  Numerology numerology;
  std::size_t tx_rows = 8;
  std::size_t tx_cols = 8;
  std::size_t rx_rows = 4;
  std::size_t rx_cols = 4;
  std::size_t num_beams = 34;
  OptimizerConfig optimizer;
  DelaySearchConfig search;
};

struct ImagingResult {
  ImagingGrid grid;
  AirTime air_time;
  std::size_t slots_simulated = 0;
};

/// Pixel beams: planar conjugate, or OPT-Accel around the pixel direction
/// when the scene has users.
inline std::vector<Beamformer> imaging_beams(const ImagingGrid& grid, const ArrayGeometry& geom,
                                             const Scene& scene, const OptimizerConfig& cfg) {
  const auto users = user_links(scene);
  std::vector<Beamformer> beams;
  beams.reserve(grid.pixels());
  for (double el : grid.el_angles)
    for (double az : grid.az_angles) {
      const Direction dir{az, el};
      if (users.empty()) beams.push_back(conjugate_beam(geom, dir));
      else beams.push_back(solve_opt_accel(users, SensingTarget{dir, 1.0}, geom, cfg).weights);
    }
  return beams;
}

inline ImagingResult run_imaging(const Scene& scene, const ImagingGrid& grid_in,
                                 const ImagingConfig& cfg, std::uint64_t seed) {
  for (double a : grid_in.az_angles)
    if (std::abs(a) > cfg.optimizer.fov) throw std::invalid_argument("run_imaging: azimuth outside FoV");
  for (double a : grid_in.el_angles)
    if (std::abs(a) > cfg.optimizer.fov) throw std::invalid_argument("run_imaging: elevation outside FoV");
  if (grid_in.pixels() == 0) throw std::invalid_argument("run_imaging: empty grid");
  const auto geom = ArrayGeometry::planar(cfg.tx_rows, cfg.tx_cols);
  const auto rx_gain = broadside_rx_gain(cfg.rx_rows, cfg.rx_cols);
  const auto& num = cfg.numerology;
  const std::size_t m_beams = cfg.num_beams;

  ImagingResult out;
  out.grid = grid_in;
  const std::size_t na = grid_in.az_angles.size(), ne = grid_in.el_angles.size();
  out.grid.heatmap.assign(ne, std::vector<double>(na, 0.0));
  out.grid.raw.assign(ne, std::vector<double>(na, 0.0));
  out.air_time = imaging_air_time(grid_in.pixels(), m_beams, num);

  const auto pixel_beams = imaging_beams(grid_in, geom, scene, cfg.optimizer);
  const auto users = user_links(scene);
  IsacSetup setup;
  setup.numerology = num;
  setup.geometry = geom;
  setup.data_beam = data_beam_for(users, geom, cfg.optimizer);
  setup.search = cfg.search;
  setup.predistort = !users.empty();

  const std::size_t dmrs = num.dmrs_symbols.size();
  const std::size_t total = grid_in.pixels();
  for (std::size_t slot = 0; slot < out.air_time.slots; ++slot) {
    // DMRS symbol d of this slot carries pixels first + d*M .. +M-1; past the
    // end of the grid the last pixel's beam is repeated and ignored.
    const std::size_t first = slot * m_beams * dmrs;
    setup.sensing_beams.assign(dmrs, {});
    for (std::size_t d = 0; d < dmrs; ++d)
      for (std::size_t m = 0; m < m_beams; ++m)
        setup.sensing_beams[d].push_back(pixel_beams[std::min(first + d * m_beams + m, total - 1)]);
    const auto res = simulate_isac_slot(setup, scene, rx_gain, seed * 7919ULL + slot, true);
    for (std::size_t d = 0; d < dmrs; ++d)
      for (std::size_t m = 0; m < m_beams; ++m) {
        const std::size_t p = first + d * m_beams + m;
        if (p >= total) break;
        const std::size_t e = p / na, a = p % na;
        const Direction dir{grid_in.az_angles[a], grid_in.el_angles[e]};
        const double power = extract_features(res.sensing[d][m]).weighted_power;
        const double norm = beamforming_gain(pixel_beams[p], geom, dir);
        const auto db = [](double v) { return v > 0.0 ? lin2db(v) : -400.0; };
        out.grid.raw[e][a] = db(power);
        out.grid.heatmap[e][a] = db(power / norm);
      }
    ++out.slots_simulated;
  }
  return out;
}

/// Heatmap as CSV: one row per elevation (descending), one column per azimuth.
inline void write_heatmap_csv(std::ostream& out, const ImagingGrid& g, bool raw = false) {
  const auto& h = raw ? g.raw : g.heatmap;
  out << "elevation_deg";
  for (double a : g.az_angles) {
    char b[32];
    std::snprintf(b, sizeof b, ",%.2f", rad2deg(a));
    out << b;
  }
  out << '\n';
  for (std::size_t e = g.el_angles.size(); e-- > 0;) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", rad2deg(g.el_angles[e]));
    out << b;
    for (double v : h[e]) {
      std::snprintf(b, sizeof b, ",%.4f", v);
      out << b;
    }
    out << '\n';
  }
}

/// Binary 8-bit PGM, top row = highest elevation, scaled min..max.
inline void write_heatmap_pgm(std::ostream& out, const ImagingGrid& g) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : g.heatmap)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const std::size_t w = g.az_angles.size(), h = g.el_angles.size();
  out << "P5\n" << w << ' ' << h << "\n255\n";
  for (std::size_t e = h; e-- > 0;)
    for (std::size_t a = 0; a < w; ++a) {
      const double t = hi > lo ? (g.heatmap[e][a] - lo) / (hi - lo) : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
}

struct HeatmapPeak {
  std::size_t el = 0;
  std::size_t az = 0;
  double value = 0.0;
};

/// Local maxima over the 8-neighbourhood (ties broken by raster order),
/// strongest first.
inline std::vector<HeatmapPeak> heatmap_peaks(const ImagingGrid& g, std::size_t max_peaks = 8) {
  std::vector<HeatmapPeak> peaks;
  const std::size_t ne = g.heatmap.size();
  for (std::size_t e = 0; e < ne; ++e) {
    const std::size_t na = g.heatmap[e].size();
    for (std::size_t a = 0; a < na; ++a) {
      const double v = g.heatmap[e][a];
      bool top = true;
      for (int de = -1; de <= 1 && top; ++de)
        for (int da = -1; da <= 1 && top; ++da) {
          if (de == 0 && da == 0) continue;
          const long ee = static_cast<long>(e) + de, aa = static_cast<long>(a) + da;
          if (ee < 0 || aa < 0 || ee >= static_cast<long>(ne) ||
              aa >= static_cast<long>(g.heatmap[ee].size()))
            continue;
          const double u = g.heatmap[ee][aa];
          const bool earlier = de < 0 || (de == 0 && da < 0);
          if (u > v || (u == v && earlier)) top = false;
        }
      if (top) peaks.push_back({e, a, v});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const HeatmapPeak& x, const HeatmapPeak& y) { return x.value > y.value; });
  if (peaks.size() > max_peaks) peaks.resize(max_peaks);
  return peaks;
}

}  // namespace subbeam
