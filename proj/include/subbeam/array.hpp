#pragma once

// Antenna-array geometry, steering vectors, beamforming gain and weight
// quantization. Angles are radians, gains and SNRs are linear.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace subbeam {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline double lin2db(double lin) { return 10.0 * std::log10(lin); }
inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }

/// Wraps an angle into [-pi, +pi).
inline double wrap_phase(double rad) {
  double r = std::fmod(rad + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  return r >= kPi ? -kPi : r;
}

enum class Layout { Ula, Planar };

/// Uniform linear array (azimuth only) or uniform planar array.
///
/// Planar arrays are stored row-major: element index = row * cols + col.
/// Columns are spaced along the azimuth axis, rows along elevation, and the
/// steering vector is the separable product of the two ULA responses.
class ArrayGeometry {
 public:
  static ArrayGeometry ula(std::size_t num_elements, double spacing = 0.5) {
    return ArrayGeometry(Layout::Ula, 1, num_elements, spacing);
  }
  static ArrayGeometry planar(std::size_t rows, std::size_t cols,
                              double spacing = 0.5) {
    return ArrayGeometry(Layout::Planar, rows, cols, spacing);
  }

  Layout layout() const { return layout_; }
  std::size_t num_elements() const { return rows_ * cols_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double spacing() const { return spacing_; }

  bool operator==(const ArrayGeometry&) const = default;

 private:
  ArrayGeometry(Layout layout, std::size_t rows, std::size_t cols,
                double spacing)
      : layout_(layout), rows_(rows), cols_(cols), spacing_(spacing) {
    if (rows == 0 || cols == 0)
      throw std::invalid_argument("ArrayGeometry: num_elements must be >= 1");
    if (!(spacing > 0.0))
      throw std::invalid_argument("ArrayGeometry: spacing must be > 0");
  }

  Layout layout_;
  std::size_t rows_;
  std::size_t cols_;
  double spacing_;
};

/// A pointing direction. Elevation is only meaningful for planar arrays.
struct Direction {
  double azimuth = 0.0;
  std::optional<double> elevation;
};

/// Complex per-element beamforming weights with |w_n| <= 1.
class Beamformer {
 public:
  static constexpr double kAmplitudeSlack = 1e-9;

  Beamformer() = default;
  explicit Beamformer(CVec weights) : weights_(std::move(weights)) {
    for (std::size_t n = 0; n < weights_.size(); ++n) {
      if (!(std::abs(weights_[n]) <= 1.0 + kAmplitudeSlack))
        throw std::invalid_argument("Beamformer: |w_" + std::to_string(n) +
                                    "| exceeds 1");
    }
  }

  static Beamformer zeros(std::size_t n) { return Beamformer(CVec(n)); }

  const CVec& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  const cplx& operator[](std::size_t n) const { return weights_[n]; }

  bool operator==(const Beamformer&) const = default;

 private:
  CVec weights_;
};

namespace detail {

inline void check_azimuth(double az) {
  if (!(az > -kPi / 2 && az < kPi / 2))
    throw std::invalid_argument("steering_vector: azimuth outside (-90, 90) deg");
}

inline void ula_response(std::size_t n, double spacing, double angle,
                         std::span<cplx> out) {
  const double psi = 2.0 * kPi * spacing * std::sin(angle);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::polar(1.0, psi * static_cast<double>(i));
  }
}

}  // namespace detail

/// Array response toward (azimuth, elevation). Element n of a ULA is
/// exp(j 2 pi n (d/lambda) sin(az)); element 0 is always 1.
inline CVec steering_vector(const ArrayGeometry& geom, double azimuth,
                            std::optional<double> elevation = std::nullopt) {
  detail::check_azimuth(azimuth);
  if (geom.layout() == Layout::Ula) {
    if (elevation)
      throw std::invalid_argument(
          "steering_vector: elevation given for a linear array");
    CVec s(geom.num_elements());
    detail::ula_response(s.size(), geom.spacing(), azimuth, s);
    return s;
  }
  if (!elevation)
    throw std::invalid_argument(
        "steering_vector: planar array requires an elevation");
  if (!(*elevation > -kPi / 2 && *elevation < kPi / 2))
    throw std::invalid_argument(
        "steering_vector: elevation outside (-90, 90) deg");
  CVec az(geom.cols()), el(geom.rows());
  detail::ula_response(geom.cols(), geom.spacing(), azimuth, az);
  detail::ula_response(geom.rows(), geom.spacing(), *elevation, el);
  CVec s(geom.num_elements());
  for (std::size_t r = 0; r < geom.rows(); ++r)
    for (std::size_t c = 0; c < geom.cols(); ++c)
      s[r * geom.cols() + c] = el[r] * az[c];
  return s;
}

inline CVec steering_vector(const ArrayGeometry& geom, const Direction& dir) {
  return steering_vector(geom, dir.azimuth, dir.elevation);
}

/// Elevation argument for a geometry: 0 for planar arrays, absent for ULAs.
inline std::optional<double> default_elevation(const ArrayGeometry& geom) {
  return geom.layout() == Layout::Planar ? std::optional<double>(0.0)
                                         : std::nullopt;
}

/// w = conj(s(dir)); gain N^2 toward dir.
inline Beamformer conjugate_beam(const ArrayGeometry& geom,
                                 const Direction& dir) {
  CVec s = steering_vector(geom, dir);
  for (auto& v : s) v = std::conj(v);
  return Beamformer(std::move(s));
}

/// s^T w.
inline cplx array_response(std::span<const cplx> steering,
                           std::span<const cplx> weights) {
  if (steering.size() != weights.size())
    throw std::invalid_argument("array_response: length mismatch");
  cplx acc{};
  for (std::size_t n = 0; n < weights.size(); ++n) acc += steering[n] * weights[n];
  return acc;
}

/// |s^T(dir) w|^2
inline double beamforming_gain(const Beamformer& w, const ArrayGeometry& geom,
                               const Direction& dir) {
  if (w.size() != geom.num_elements())
    throw std::invalid_argument(
        "beamforming_gain: beamformer length does not match the array");
  return std::norm(array_response(steering_vector(geom, dir), w.weights()));
}

inline double beamforming_gain(const Beamformer& w, const ArrayGeometry& geom,
                               double azimuth) {
  return beamforming_gain(w, geom, Direction{azimuth, default_elevation(geom)});
}

/// Effective SNR = base SNR x beamforming gain. Serves both the per-user
/// communication SNR and the sensing SNR.
inline double effective_snr(double base_snr, const Beamformer& w,
                            const ArrayGeometry& geom, const Direction& dir) {
  if (!(base_snr >= 0.0))
    throw std::invalid_argument("effective_snr: base_snr must be >= 0");
  return base_snr * beamforming_gain(w, geom, dir);
}

inline double effective_snr(double base_snr, const Beamformer& w,
                            const ArrayGeometry& geom, double azimuth) {
  return effective_snr(base_snr, w, geom,
                       Direction{azimuth, default_elevation(geom)});
}

// ---------------------------------------------------------------------------
// Quantization

struct QuantizationSpec {
  int amplitude_bits = 5;
  double phase_step = deg2rad(4.87);

  void validate() const {
    if (amplitude_bits < 1)
      throw std::invalid_argument("QuantizationSpec: amplitude_bits must be >= 1");
    if (!(phase_step > 0.0 && phase_step < 2.0 * kPi))
      throw std::invalid_argument("QuantizationSpec: phase_step outside (0, 2pi)");
  }

  /// Number of phase grid points k * phase_step, k = 0 .. L-1, covering one
  /// turn. With a step that does not divide 2 pi the last gap is shorter.
  std::size_t phase_levels() const {
    return static_cast<std::size_t>(std::ceil(2.0 * kPi / phase_step - 1e-12));
  }
};

/// Rounds to the nearest of 2^bits uniform levels on [0, 1]; ties go to the
/// lower level.
inline double quantize_amplitude(double amp, int bits) {
  const double top = static_cast<double>((1u << bits) - 1u);
  const double t = std::clamp(amp, 0.0, 1.0) * top;
  double lo = std::floor(t);
  if (lo >= top) return 1.0;
  return (t - lo > 0.5 ? lo + 1.0 : lo) / top;
}

/// Rounds to the nearest phase grid point k * step (k < levels), wrapped into
/// [-pi, pi). Ties go to the lower grid point.
inline double quantize_phase(double phase, double step, std::size_t levels) {
  double p = std::fmod(phase, 2.0 * kPi);
  if (p < 0.0) p += 2.0 * kPi;
  const double t = p / step;
  auto lo = static_cast<std::size_t>(std::floor(t));
  if (lo >= levels) lo = levels - 1;
  const double lo_angle = static_cast<double>(lo) * step;
  // Upper neighbour wraps to the grid origin after the last level.
  const double hi_angle = (lo + 1 < levels) ? static_cast<double>(lo + 1) * step : 2.0 * kPi;
  const double chosen = (hi_angle - p < p - lo_angle) ? hi_angle : lo_angle;
  return wrap_phase(chosen);
}

/// Hardware-style quantization of every element. Idempotent.
inline Beamformer quantize(const Beamformer& w,
                           const QuantizationSpec& spec = {}) {
  spec.validate();
  const std::size_t levels = spec.phase_levels();
  CVec out(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double amp = quantize_amplitude(std::abs(w[n]), spec.amplitude_bits);
    const double ph = quantize_phase(std::arg(w[n]), spec.phase_step, levels);
    out[n] = std::polar(amp, ph);
  }
  return Beamformer(std::move(out));
}

}  // namespace subbeam
