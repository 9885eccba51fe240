#pragma once

// Dominant-path channel: downlink to users and the monostatic round trip
// through point reflectors. Delays are whole samples; the transmit gain of
// each received sample uses the beam that was active when it left the array.

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "subbeam/array.hpp"
#include "subbeam/optimizer.hpp"
#include "subbeam/waveform.hpp"

namespace subbeam {

inline constexpr double kSpeedOfLight = 299792458.0;

struct PathModel {
  double attenuation = 1.0;  ///< alpha in [0, 1]
  double phase_shift = 0.0;  ///< radians
  std::size_t delay_samples = 0;

  void validate() const {
    if (!(attenuation >= 0.0 && attenuation <= 1.0))
      throw std::invalid_argument("PathModel: attenuation must be in [0, 1]");
  }
};

struct SceneUser {
  UserLink link;
  PathModel path;
};

struct Reflector {
  double azimuth = 0.0;
  double elevation = 0.0;
  PathModel path;
  std::string label;
};

struct Scene {
  std::vector<SceneUser> users;
  std::vector<Reflector> reflectors;
  double noise_power = 1e-6;
  /// Residual TX->RX leakage in dB above the noise floor; absent disables it.
  std::optional<double> self_interference_inr_db = 20.0;

  void validate() const {
    if (!(noise_power > 0.0)) throw std::invalid_argument("Scene: noise_power must be > 0");
    for (const auto& u : users) u.path.validate();
    for (const auto& r : reflectors) r.path.validate();
  }
};

/// One-way delay in samples for a distance, rounded to the nearest sample.
inline std::size_t delay_for_distance(double meters, double sample_rate) {
  if (!(meters >= 0.0)) throw std::invalid_argument("delay_for_distance: distance must be >= 0");
  return static_cast<std::size_t>(std::llround(meters * sample_rate / kSpeedOfLight));
}

/// Round-trip delay in samples for a reflector at `meters`.
inline std::size_t round_trip_delay(double meters, double sample_rate) {
  return delay_for_distance(2.0 * meters, sample_rate);
}

namespace detail {

inline void add_awgn(std::span<cplx> y, double noise_power, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
  for (auto& v : y) v += cplx(gauss(rng), gauss(rng));
}

/// Adds sqrt(gain(beam)) * c * x[n - d] for every n, caching gain per beam.
inline void add_path(std::span<cplx> y, std::span<const cplx> x, const BeamSchedule& sched,
                     const std::function<double(const Beamformer&)>& gain, cplx c,
                     std::size_t delay) {
  std::vector<double> amp(sched.beams.size());
  for (std::size_t b = 0; b < amp.size(); ++b) amp[b] = std::sqrt(gain(sched.beams[b]));
  for (std::size_t n = delay; n < y.size(); ++n) {
    const std::size_t t = n - delay;
    if (t >= x.size()) break;
    y[n] += amp[sched.beam_of[t]] * c * x[t];
  }
}

inline void check_schedule(std::span<const cplx> x, const BeamSchedule& sched) {
  if (sched.beam_of.size() != x.size())
    throw std::invalid_argument("beam schedule length differs from the waveform");
}

}  // namespace detail

/// Received samples at one user. A noise power of 0 gives the noiseless signal.
inline CVec apply_downlink(std::span<const cplx> x, const BeamSchedule& sched,
                           const SceneUser& user, const ArrayGeometry& geom,
                           double noise_power, std::uint64_t seed) {
  detail::check_schedule(x, sched);
  user.path.validate();
  CVec y(x.size());
  const auto dir = Direction{user.link.angle, default_elevation(geom)};
  const cplx c = std::polar(user.path.attenuation, user.path.phase_shift);
  detail::add_path(y, x, sched,
                   [&](const Beamformer& w) { return beamforming_gain(w, geom, dir); }, c,
                   user.path.delay_samples);
  if (noise_power > 0.0) detail::add_awgn(y, noise_power, seed);
  return y;
}

/// Receive gain of the sensing antenna toward a direction.
using RxGainFn = std::function<double(const Direction&)>;

/// Fixed conjugate beam of a rows x cols planar receive array toward broadside.
inline RxGainFn broadside_rx_gain(std::size_t rows = 4, std::size_t cols = 4) {
  const auto geom = ArrayGeometry::planar(rows, cols);
  const auto beam = conjugate_beam(geom, Direction{0.0, 0.0});
  return [geom, beam](const Direction& d) {
    return beamforming_gain(beam, geom, Direction{d.azimuth, d.elevation.value_or(0.0)});
  };
}

struct MonostaticOptions {
  double noise_power = 0.0;
  /// Leakage level relative to noise_power; absent disables it.
  std::optional<double> self_interference_inr_db;
};

/// Direction of a reflector as seen by a transmit geometry.
inline Direction reflector_direction(const Reflector& r, const ArrayGeometry& geom) {
  return Direction{r.azimuth, geom.layout() == Layout::Planar ? std::optional<double>(r.elevation)
                                                              : std::nullopt};
}

/// Samples at the co-located sensing receiver.
inline CVec apply_monostatic(std::span<const cplx> x, const BeamSchedule& sched,
                             std::span<const Reflector> reflectors, const ArrayGeometry& geom,
                             const RxGainFn& rx_gain, const MonostaticOptions& opt,
                             std::uint64_t seed) {
  detail::check_schedule(x, sched);
  CVec y(x.size());
  for (const auto& r : reflectors) {
    r.path.validate();
    const Direction dir = reflector_direction(r, geom);
    const double g_rx = rx_gain(Direction{r.azimuth, r.elevation});
    const cplx c = std::polar(r.path.attenuation, r.path.phase_shift);
    detail::add_path(y, x, sched,
                     [&](const Beamformer& w) { return beamforming_gain(w, geom, dir) * g_rx; },
                     c, r.path.delay_samples);
  }
  if (opt.self_interference_inr_db) {
    if (!(opt.noise_power > 0.0))
      throw std::invalid_argument("apply_monostatic: self-interference needs noise_power > 0");
    double px = 0.0;
    for (const auto& v : x) px += std::norm(v);
    px /= static_cast<double>(x.size());
    if (px > 0.0) {
      const double a = std::sqrt(db2lin(*opt.self_interference_inr_db) * opt.noise_power / px);
      for (std::size_t n = 0; n < x.size(); ++n) y[n] += a * x[n];
    }
  }
  if (opt.noise_power > 0.0) detail::add_awgn(y, opt.noise_power, seed);
  return y;
}

inline CVec apply_monostatic(std::span<const cplx> x, const BeamSchedule& sched,
                             const Scene& scene, const ArrayGeometry& geom,
                             const RxGainFn& rx_gain, std::uint64_t seed) {
  scene.validate();
  return apply_monostatic(x, sched, scene.reflectors, geom, rx_gain,
                          MonostaticOptions{scene.noise_power, scene.self_interference_inr_db},
                          seed);
}

}  // namespace subbeam
