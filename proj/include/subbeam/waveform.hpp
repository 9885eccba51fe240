#pragma once

// Simplified NR slot waveforms: data and DMRS OFDM symbols, sub-symbol beam
// schedules, DMRS pre-distortion, user-side CSI estimation and EVM/BER.
//
// Symbol indices in Numerology::dmrs_symbols are 1-based; everything else is
// 0-based. Time-domain symbols use a unitary DFT, so the FFT of a symbol body
// reproduces its frequency grid and per-sample power is occupied / fft_size.

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "subbeam/array.hpp"
#include "subbeam/dft.hpp"

namespace subbeam {

struct Numerology {
  std::size_t fft_size = 1024;
  std::size_t occupied = 768;
  std::size_t cp_length = 72;
  double sample_rate = 122.88e6;
  std::size_t symbols_per_slot = 14;
  std::set<std::size_t> dmrs_symbols{3, 4, 11, 12};
  double slot_duration = 0.125e-3;

  void validate() const {
    if (fft_size == 0) throw std::invalid_argument("Numerology: fft_size must be >= 1");
    if (occupied == 0 || occupied > fft_size)
      throw std::invalid_argument("Numerology: occupied subcarriers must be in [1, fft_size]");
    if (!(sample_rate > 0.0))
      throw std::invalid_argument("Numerology: sample_rate must be > 0");
    if (symbols_per_slot == 0)
      throw std::invalid_argument("Numerology: symbols_per_slot must be >= 1");
    for (auto s : dmrs_symbols)
      if (s < 1 || s > symbols_per_slot)
        throw std::invalid_argument("Numerology: DMRS symbol index " + std::to_string(s) +
                                    " outside [1, symbols_per_slot]");
    if (!(slot_duration > 0.0))
      throw std::invalid_argument("Numerology: slot_duration must be > 0");
  }

  std::size_t symbol_length() const { return fft_size + cp_length; }
  std::size_t slot_length() const { return symbols_per_slot * symbol_length(); }
  /// First sample of symbol s (0-based), CP included.
  std::size_t symbol_start(std::size_t s) const { return s * symbol_length(); }
  /// First sample of symbol s after its cyclic prefix.
  std::size_t body_start(std::size_t s) const { return symbol_start(s) + cp_length; }
  bool is_dmrs(std::size_t s) const { return dmrs_symbols.count(s + 1) != 0; }

  /// 0-based indices of the DMRS symbols, ascending.
  std::vector<std::size_t> dmrs_indices() const {
    std::vector<std::size_t> out;
    for (auto s : dmrs_symbols) out.push_back(s - 1);
    return out;
  }

  /// FFT bins of the occupied subcarriers, centered on DC: logical
  /// subcarriers -occupied/2 .. occupied/2 - 1 in ascending order.
  std::vector<std::size_t> occupied_bins() const {
    std::vector<std::size_t> bins(occupied);
    const auto half = static_cast<std::ptrdiff_t>(occupied / 2);
    const auto n = static_cast<std::ptrdiff_t>(fft_size);
    for (std::size_t i = 0; i < occupied; ++i) {
      const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i) - half;
      bins[i] = static_cast<std::size_t>((k + n) % n);
    }
    return bins;
  }
};

// ---------------------------------------------------------------------------
// Constellations

enum class Modulation { Qpsk, Qam16, Qam64, Qam256 };

inline int bits_per_symbol(Modulation m) {
  switch (m) {
    case Modulation::Qpsk: return 2;
    case Modulation::Qam16: return 4;
    case Modulation::Qam64: return 6;
    case Modulation::Qam256: return 8;
  }
  throw std::invalid_argument("unknown modulation");
}

inline const char* to_string(Modulation m) {
  switch (m) {
    case Modulation::Qpsk: return "qpsk";
    case Modulation::Qam16: return "16qam";
    case Modulation::Qam64: return "64qam";
    case Modulation::Qam256: return "256qam";
  }
  return "?";
}

inline Modulation parse_modulation(const std::string& s) {
  if (s == "qpsk" || s == "QPSK") return Modulation::Qpsk;
  if (s == "16qam" || s == "16QAM") return Modulation::Qam16;
  if (s == "64qam" || s == "64QAM") return Modulation::Qam64;
  if (s == "256qam" || s == "256QAM") return Modulation::Qam256;
  throw std::invalid_argument("unknown modulation '" + s + "'");
}

/// Square Gray-coded QAM with unit average energy. Bits are split evenly
/// between I (high half) and Q (low half).
class Constellation {
 public:
  explicit Constellation(Modulation mod) : mod_(mod), bits_(bits_per_symbol(mod)) {
    const int axis_bits = bits_ / 2;
    levels_ = 1 << axis_bits;
    const double order = static_cast<double>(levels_ * levels_);
    norm_ = std::sqrt(2.0 * (order - 1.0) / 3.0);
    points_.resize(static_cast<std::size_t>(levels_ * levels_));
    for (unsigned code = 0; code < points_.size(); ++code) {
      const unsigned gi = code >> axis_bits;
      const unsigned gq = code & static_cast<unsigned>(levels_ - 1);
      points_[code] = cplx(level(gray_to_index(gi)), level(gray_to_index(gq)));
    }
  }

  Modulation modulation() const { return mod_; }
  int bits() const { return bits_; }
  const CVec& points() const { return points_; }
  cplx map(unsigned code) const { return points_.at(code); }

  /// Nearest constellation point, returned as its bit code.
  unsigned slice(cplx z) const {
    const unsigned i = axis_index(z.real());
    const unsigned q = axis_index(z.imag());
    const int axis_bits = bits_ / 2;
    return (index_to_gray(i) << axis_bits) | index_to_gray(q);
  }

 private:
  static unsigned gray_to_index(unsigned g) {
    unsigned b = g;
    for (unsigned s = g >> 1; s; s >>= 1) b ^= s;
    return b;
  }
  static unsigned index_to_gray(unsigned i) { return i ^ (i >> 1); }

  double level(unsigned idx) const {
    return (2.0 * static_cast<double>(idx) - static_cast<double>(levels_ - 1)) / norm_;
  }

  unsigned axis_index(double v) const {
    const double t = (v * norm_ + static_cast<double>(levels_ - 1)) / 2.0;
    const double r = std::clamp(std::round(t), 0.0, static_cast<double>(levels_ - 1));
    return static_cast<unsigned>(r);
  }

  Modulation mod_;
  int bits_;
  int levels_ = 0;
  double norm_ = 1.0;
  CVec points_;
};

// ---------------------------------------------------------------------------
// Slot waveform

struct SlotWaveform {
  Numerology numerology;
  Modulation modulation = Modulation::Qam64;
  /// Time-domain samples of the whole slot, CP included.
  CVec samples;
  /// Frequency grid (fft_size bins) of every symbol.
  std::vector<CVec> grids;
  /// Bit codes of the data symbols, per symbol per occupied subcarrier;
  /// empty for DMRS symbols.
  std::vector<std::vector<unsigned>> codes;

  /// CP-stripped samples of symbol s.
  std::span<const cplx> body(std::size_t s) const {
    return std::span<const cplx>(samples).subspan(numerology.body_start(s),
                                                  numerology.fft_size);
  }
};

namespace detail {

/// Unitary inverse DFT of a grid followed by the cyclic prefix.
inline void write_symbol(const Dft& dft, const Numerology& num, std::span<const cplx> grid,
                         std::span<cplx> dst) {
  CVec body = dft.inverse(grid);
  const double scale = std::sqrt(static_cast<double>(num.fft_size));
  for (auto& v : body) v *= scale;
  const std::size_t n = num.fft_size;
  for (std::size_t i = 0; i < num.cp_length; ++i) dst[i] = body[n - num.cp_length + i];
  for (std::size_t i = 0; i < n; ++i) dst[num.cp_length + i] = body[i];
}

}  // namespace detail

/// Unitary forward DFT of one CP-stripped symbol.
inline CVec symbol_spectrum(std::span<const cplx> body, const Dft& dft) {
  CVec spec = dft.forward(body);
  const double scale = 1.0 / std::sqrt(static_cast<double>(body.size()));
  for (auto& v : spec) v *= scale;
  return spec;
}

/// Seeded slot: QPSK DMRS sequence (shared by all DMRS symbols) and random
/// data constellation points on the occupied subcarriers.
inline SlotWaveform generate_slot(const Numerology& num, Modulation mod,
                                  std::uint64_t seed) {
  num.validate();
  if (num.cp_length > num.fft_size)
    throw std::invalid_argument("Numerology: cp_length must not exceed fft_size");
  SlotWaveform slot;
  slot.numerology = num;
  slot.modulation = mod;
  slot.samples.assign(num.slot_length(), cplx{});
  slot.grids.assign(num.symbols_per_slot, CVec(num.fft_size));
  slot.codes.assign(num.symbols_per_slot, {});

  std::mt19937_64 rng(seed);
  const auto bins = num.occupied_bins();
  const Constellation qpsk(Modulation::Qpsk);
  const Constellation data(mod);
  std::uniform_int_distribution<unsigned> qpsk_code(0, 3);
  std::uniform_int_distribution<unsigned> data_code(0, static_cast<unsigned>(data.points().size() - 1));

  CVec dmrs(num.fft_size);
  for (auto b : bins) dmrs[b] = qpsk.map(qpsk_code(rng));

  const Dft dft(num.fft_size);
  for (std::size_t s = 0; s < num.symbols_per_slot; ++s) {
    auto& grid = slot.grids[s];
    if (num.is_dmrs(s)) {
      grid = dmrs;
    } else {
      auto& codes = slot.codes[s];
      codes.resize(bins.size());
      for (std::size_t i = 0; i < bins.size(); ++i) {
        codes[i] = data_code(rng);
        grid[bins[i]] = data.map(codes[i]);
      }
    }
    detail::write_symbol(dft, num, grid,
                         std::span<cplx>(slot.samples).subspan(num.symbol_start(s),
                                                               num.symbol_length()));
  }
  return slot;
}

// ---------------------------------------------------------------------------
// Sub-symbol schedule

/// Splits each CP-stripped DMRS symbol into M windows of floor(fft_size / M)
/// samples. Samples past M * sub_len (and the CP, which copies them) ride on
/// the last beam and are not used for sensing.
class SubSymbolSchedule {
 public:
  SubSymbolSchedule(const Numerology& num, std::size_t num_beams)
      : fft_size_(num.fft_size), num_beams_(num_beams) {
    if (num_beams == 0) throw std::invalid_argument("SubSymbolSchedule: M must be >= 1");
    sub_len_ = num.fft_size / num_beams;
    if (sub_len_ == 0)
      throw std::invalid_argument("SubSymbolSchedule: M exceeds fft_size");
  }

  std::size_t num_beams() const { return num_beams_; }
  std::size_t sub_len() const { return sub_len_; }
  std::size_t fft_size() const { return fft_size_; }
  std::size_t used_samples() const { return num_beams_ * sub_len_; }
  std::size_t unused_samples() const { return fft_size_ - used_samples(); }

  /// Beam of body sample i, or -1 for the unused tail.
  std::ptrdiff_t beam_of_sample(std::size_t i) const {
    if (i >= fft_size_) throw std::invalid_argument("SubSymbolSchedule: sample out of range");
    if (i >= used_samples()) return -1;
    return static_cast<std::ptrdiff_t>(i / sub_len_);
  }

  /// Beam used to transmit body sample i (the tail rides on the last beam).
  std::size_t tx_beam(std::size_t i) const {
    const auto m = beam_of_sample(i);
    return m < 0 ? num_beams_ - 1 : static_cast<std::size_t>(m);
  }

 private:
  std::size_t fft_size_;
  std::size_t num_beams_;
  std::size_t sub_len_ = 0;
};

/// Per-sample transmit beamformer for one slot: data symbols use the data
/// beam, DMRS symbols switch through the sensing beams.
struct BeamSchedule {
  std::vector<Beamformer> beams;           ///< sensing beams 0..M-1, then the data beam
  std::vector<std::uint32_t> beam_of;      ///< index into beams, one per slot sample

  const Beamformer& at(std::size_t n) const { return beams[beam_of.at(n)]; }
  std::size_t data_index() const { return beams.size() - 1; }
};

/// Beam set d (of M beams) drives DMRS symbol d; a single set drives all of them.
inline BeamSchedule make_beam_schedule(const Numerology& num, const SubSymbolSchedule& sched,
                                       std::span<const std::vector<Beamformer>> sets,
                                       const Beamformer& data_beam) {
  const auto dmrs = num.dmrs_indices();
  if (sets.empty()) throw std::invalid_argument("make_beam_schedule: no beam sets");
  if (sets.size() != 1 && sets.size() != dmrs.size())
    throw std::invalid_argument("make_beam_schedule: need one beam set or one per DMRS symbol");
  BeamSchedule bs;
  for (const auto& set : sets) {
    if (set.size() != sched.num_beams())
      throw std::invalid_argument("make_beam_schedule: beam count differs from schedule M");
    bs.beams.insert(bs.beams.end(), set.begin(), set.end());
  }
  bs.beams.push_back(data_beam);
  const auto data_idx = static_cast<std::uint32_t>(bs.data_index());
  bs.beam_of.assign(num.slot_length(), data_idx);
  for (std::size_t d = 0; d < dmrs.size(); ++d) {
    const std::size_t start = num.symbol_start(dmrs[d]);
    const std::size_t offset = sets.size() == 1 ? 0 : d * sched.num_beams();
    const auto last = static_cast<std::uint32_t>(offset + sched.num_beams() - 1);
    for (std::size_t i = 0; i < num.cp_length; ++i) bs.beam_of[start + i] = last;
    for (std::size_t i = 0; i < num.fft_size; ++i)
      bs.beam_of[start + num.cp_length + i] = static_cast<std::uint32_t>(offset + sched.tx_beam(i));
  }
  return bs;
}

inline BeamSchedule make_beam_schedule(const Numerology& num, const SubSymbolSchedule& sched,
                                       std::span<const Beamformer> sensing_beams,
                                       const Beamformer& data_beam) {
  const std::vector<std::vector<Beamformer>> sets{
      std::vector<Beamformer>(sensing_beams.begin(), sensing_beams.end())};
  return make_beam_schedule(num, sched, std::span<const std::vector<Beamformer>>(sets), data_beam);
}

/// Every sample on the same beam.
inline BeamSchedule fixed_beam_schedule(const Numerology& num, const Beamformer& beam) {
  BeamSchedule bs;
  bs.beams.push_back(beam);
  bs.beam_of.assign(num.slot_length(), 0);
  return bs;
}

// ---------------------------------------------------------------------------
// Pre-distortion

struct PredistortionPlan {
  /// Amplitude factor per sub-symbol beam.
  std::vector<double> factors;
};

/// factor_m = sqrt(sum_u g_data[u] / sum_u g_dmrs[m][u]).
inline PredistortionPlan make_predistortion(std::span<const double> data_gains,
                                            const std::vector<std::vector<double>>& dmrs_gains) {
  double num = 0.0;
  for (double g : data_gains) num += g;
  PredistortionPlan plan;
  for (std::size_t m = 0; m < dmrs_gains.size(); ++m) {
    if (dmrs_gains[m].size() != data_gains.size())
      throw std::invalid_argument("make_predistortion: user count mismatch for entry " +
                                  std::to_string(m));
    double den = 0.0;
    for (double g : dmrs_gains[m]) den += g;
    if (!(den > 0.0))
      throw std::invalid_argument("make_predistortion: entry " + std::to_string(m) +
                                  " has zero gain toward every user");
    plan.factors.push_back(std::sqrt(num / den));
  }
  return plan;
}

/// Plan from the sensing beams and data beam evaluated at the user angles.
inline PredistortionPlan make_predistortion(std::span<const Beamformer> sensing_beams,
                                            const Beamformer& data_beam,
                                            const ArrayGeometry& geom,
                                            std::span<const double> user_angles) {
  std::vector<double> gd;
  for (double a : user_angles) gd.push_back(beamforming_gain(data_beam, geom, a));
  std::vector<std::vector<double>> gc;
  for (const auto& w : sensing_beams) {
    auto& row = gc.emplace_back();
    for (double a : user_angles) row.push_back(beamforming_gain(w, geom, a));
  }
  return make_predistortion(gd, gc);
}

/// Scales sub-symbol m of DMRS symbol d by plans[d].factors[m] (a single plan
/// applies to every DMRS symbol). The unused tail and the CP follow the last
/// beam's factor. Data symbols are untouched.
inline SlotWaveform predistort_dmrs(const SlotWaveform& slot, const SubSymbolSchedule& sched,
                                    std::span<const PredistortionPlan> plans) {
  const auto& num = slot.numerology;
  if (sched.fft_size() != num.fft_size)
    throw std::invalid_argument("predistort_dmrs: schedule does not match numerology");
  const auto dmrs = num.dmrs_indices();
  if (plans.empty() || (plans.size() != 1 && plans.size() != dmrs.size()))
    throw std::invalid_argument("predistort_dmrs: need one plan or one per DMRS symbol");
  for (const auto& plan : plans)
    if (plan.factors.size() != sched.num_beams())
      throw std::invalid_argument("predistort_dmrs: plan size differs from schedule M");
  SlotWaveform out = slot;
  for (std::size_t d = 0; d < dmrs.size(); ++d) {
    const auto& f = plans[plans.size() == 1 ? 0 : d].factors;
    cplx* p = out.samples.data() + num.symbol_start(dmrs[d]);
    for (std::size_t i = 0; i < num.cp_length; ++i) p[i] *= f.back();
    p += num.cp_length;
    for (std::size_t i = 0; i < num.fft_size; ++i) p[i] *= f[sched.tx_beam(i)];
  }
  return out;
}

inline SlotWaveform predistort_dmrs(const SlotWaveform& slot, const SubSymbolSchedule& sched,
                                    const PredistortionPlan& plan) {
  return predistort_dmrs(slot, sched, std::span<const PredistortionPlan>(&plan, 1));
}

// ---------------------------------------------------------------------------
// User side

/// H[k] = Y[k] / X[k] on the occupied bins (ascending logical subcarrier).
inline CVec estimate_user_csi(std::span<const cplx> rx_body, std::span<const cplx> tx_grid,
                              const Numerology& num) {
  if (rx_body.size() != num.fft_size || tx_grid.size() != num.fft_size)
    throw std::invalid_argument("estimate_user_csi: symbols must have fft_size samples");
  const Dft dft(num.fft_size);
  const CVec y = symbol_spectrum(rx_body, dft);
  const auto bins = num.occupied_bins();
  CVec h(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) h[i] = y[bins[i]] / tx_grid[bins[i]];
  return h;
}

/// Mean of the per-DMRS-symbol estimates over the slot.
inline CVec estimate_user_csi(std::span<const cplx> rx_slot, const SlotWaveform& tx) {
  const auto& num = tx.numerology;
  if (rx_slot.size() < num.slot_length())
    throw std::invalid_argument("estimate_user_csi: received slot too short");
  const auto dmrs = num.dmrs_indices();
  if (dmrs.empty()) throw std::invalid_argument("estimate_user_csi: no DMRS symbols");
  CVec acc(num.occupied);
  for (auto s : dmrs) {
    const CVec h = estimate_user_csi(rx_slot.subspan(num.body_start(s), num.fft_size),
                                     tx.grids[s], num);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += h[i];
  }
  for (auto& v : acc) v /= static_cast<double>(dmrs.size());
  return acc;
}

struct LinkScore {
  double evm_percent = 0.0;
  double ber = 0.0;
  std::size_t symbols = 0;
  std::size_t bits = 0;
};

/// Equalizes every data symbol of the received slot by per-bin division with
/// `csi`, slices to the nearest point and scores against the transmitted slot.
inline LinkScore demodulate_and_score(std::span<const cplx> rx_slot, const SlotWaveform& tx,
                                      std::span<const cplx> csi, Modulation modulation) {
  const auto& num = tx.numerology;
  if (modulation != tx.modulation)
    throw std::invalid_argument("demodulate_and_score: modulation differs from the slot");
  if (csi.size() != num.occupied)
    throw std::invalid_argument("demodulate_and_score: csi must cover the occupied bins");
  if (rx_slot.size() < num.slot_length())
    throw std::invalid_argument("demodulate_and_score: received slot too short");
  const Constellation con(modulation);
  const Dft dft(num.fft_size);
  const auto bins = num.occupied_bins();
  double err = 0.0, ref = 0.0;
  std::size_t bit_errors = 0;
  LinkScore score;
  for (std::size_t s = 0; s < num.symbols_per_slot; ++s) {
    if (num.is_dmrs(s)) continue;
    const CVec y = symbol_spectrum(rx_slot.subspan(num.body_start(s), num.fft_size), dft);
    for (std::size_t i = 0; i < bins.size(); ++i) {
      const cplx x = tx.grids[s][bins[i]];
      const cplx eq = y[bins[i]] / csi[i];
      err += std::norm(eq - x);
      ref += std::norm(x);
      const unsigned got = con.slice(eq);
      bit_errors += static_cast<std::size_t>(std::popcount(got ^ tx.codes[s][i]));
      ++score.symbols;
    }
  }
  score.bits = score.symbols * static_cast<std::size_t>(con.bits());
  score.evm_percent = ref > 0.0 ? 100.0 * std::sqrt(err / ref) : 0.0;
  score.ber = score.bits ? static_cast<double>(bit_errors) / static_cast<double>(score.bits) : 0.0;
  return score;
}

}  // namespace subbeam
