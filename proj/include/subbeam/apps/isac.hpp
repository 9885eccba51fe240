#pragma once

// One ISAC slot end to end: sub-symbol switched DMRS (optionally
// pre-distorted), downlink to every scene user, monostatic capture and the
// sensing estimator on every DMRS symbol.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "subbeam/channel.hpp"
#include "subbeam/optimizer.hpp"
#include "subbeam/sensing.hpp"
#include "subbeam/waveform.hpp"

namespace subbeam {

/// Beam for the data symbols: conjugate toward a single user, otherwise the
/// max-min beam with the perturbation bound switched off.
inline Beamformer data_beam_for(std::span<const UserLink> users, const ArrayGeometry& geom,
                                const OptimizerConfig& cfg = {}) {
  if (users.empty()) return conjugate_beam(geom, sensing_direction(geom, 0.0));
  if (users.size() == 1) return conjugate_beam(geom, sensing_direction(geom, users[0].angle));
  OptimizerConfig c = cfg;
  c.epsilon = 2.0;
  return solve_opt_accel(users, SensingTarget{sensing_direction(geom, 0.0), 1.0}, geom, c).weights;
}

inline double median_value(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median_value: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<UserLink> user_links(const Scene& scene) {
  std::vector<UserLink> out;
  for (const auto& u : scene.users) out.push_back(u.link);
  return out;
}

/// Ideal per-subcarrier channel seen by a user on the data symbols.
inline CVec genie_user_csi(const SceneUser& user, const Beamformer& data_beam,
                           const ArrayGeometry& geom, const Numerology& num) {
  const double g = beamforming_gain(data_beam, geom, user.link.angle);
  const cplx c = std::sqrt(g) * std::polar(user.path.attenuation, user.path.phase_shift);
  const auto bins = num.occupied_bins();
  CVec h(bins.size());
  const double n = static_cast<double>(num.fft_size);
  const double d = static_cast<double>(user.path.delay_samples);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double f = signed_bin(bins[i], num.fft_size);
    h[i] = c * std::polar(1.0, -2.0 * kPi * f * d / n);
  }
  return h;
}

/// Noise power giving a per-subcarrier SNR on the data symbols of `user`.
inline double noise_for_user_snr(const SceneUser& user, const Beamformer& data_beam,
                                 const ArrayGeometry& geom, double snr_db) {
  const double g = beamforming_gain(data_beam, geom, user.link.angle);
  return g * user.path.attenuation * user.path.attenuation / db2lin(snr_db);
}

struct IsacSetup {
  Numerology numerology;
  ArrayGeometry geometry = ArrayGeometry::ula(16);
  Modulation modulation = Modulation::Qam64;
  /// Sub-symbol beam sets: one shared by every DMRS symbol, or one per DMRS
  /// symbol. The set size is M.
  std::vector<std::vector<Beamformer>> sensing_beams;
  Beamformer data_beam;
  bool predistort = true;
  DelaySearchConfig search;
};

struct UserResult {
  LinkScore estimated;
  LinkScore genie;
};

struct IsacSlotResult {
  SlotWaveform tx;
  /// One plan per beam set.
  std::vector<PredistortionPlan> plans;
  std::vector<UserResult> users;
  /// Sensing estimates per DMRS symbol, M each.
  std::vector<std::vector<SensingCsi>> sensing;
  OpCount ops;
};

inline IsacSlotResult simulate_isac_slot(const IsacSetup& setup, const Scene& scene,
                                         const RxGainFn& rx_gain, std::uint64_t seed,
                                         bool run_sensing = true) {
  scene.validate();
  const auto& num = setup.numerology;
  if (setup.sensing_beams.empty()) throw std::invalid_argument("simulate_isac_slot: no sensing beams");
  const SubSymbolSchedule sched(num, setup.sensing_beams.front().size());
  IsacSlotResult res;
  const SlotWaveform clean = generate_slot(num, setup.modulation, seed);

  std::vector<double> angles;
  for (const auto& u : scene.users) angles.push_back(u.link.angle);
  for (const auto& set : setup.sensing_beams) {
    if (setup.predistort && !angles.empty()) {
      res.plans.push_back(make_predistortion(set, setup.data_beam, setup.geometry, angles));
    } else {
      res.plans.push_back(PredistortionPlan{std::vector<double>(set.size(), 1.0)});
    }
  }
  res.tx = predistort_dmrs(clean, sched, res.plans);
  const BeamSchedule beams = make_beam_schedule(num, sched, setup.sensing_beams, setup.data_beam);

  for (std::size_t u = 0; u < scene.users.size(); ++u) {
    const auto& user = scene.users[u];
    const CVec y = apply_downlink(res.tx.samples, beams, user, setup.geometry, scene.noise_power,
                                  seed * 1000003ULL + 17 + u);
    // CSI from the received DMRS against the nominal (undistorted) grid.
    const CVec h_est = estimate_user_csi(y, clean);
    const CVec h_genie = genie_user_csi(user, setup.data_beam, setup.geometry, num);
    UserResult r;
    r.estimated = demodulate_and_score(y, res.tx, h_est, setup.modulation);
    r.genie = demodulate_and_score(y, res.tx, h_genie, setup.modulation);
    res.users.push_back(r);
  }

  if (run_sensing) {
    const CVec rx = apply_monostatic(res.tx.samples, beams, scene, setup.geometry, rx_gain,
                                     seed * 1000003ULL + 5);
    const auto dmrs = num.dmrs_indices();
    for (std::size_t d = 0; d < dmrs.size(); ++d) {
      // The plan undoes the transmit scaling; windows are compared against clean.
      const auto& plan = res.plans[res.plans.size() == 1 ? 0 : d];
      res.sensing.push_back(
          estimate_symbol(sensing_symbol(rx, clean, dmrs[d]), sched, setup.search, &plan, &res.ops));
    }
  }
  return res;
}

}  // namespace subbeam
