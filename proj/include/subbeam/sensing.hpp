#pragma once

// Sub-symbol sensing CSI: per beam window, enumerate integer receive delays,
// fit a line to the unwrapped CSI phase and keep the delay with the smallest
// weighted fit error. Spectra for successive delays come from a one-sample
// sliding DFT instead of a fresh transform per candidate.

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "subbeam/dft.hpp"
#include "subbeam/waveform.hpp"

namespace subbeam {

struct DelaySearchConfig {
  std::size_t num_candidates = 10;
  /// Sliding-DFT update between candidates; false recomputes each spectrum.
  bool accelerated = true;

  /// ceil(log2(fft_size)) candidates.
  static DelaySearchConfig for_fft_size(std::size_t fft_size) {
    DelaySearchConfig c;
    c.num_candidates = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(fft_size))));
    if (c.num_candidates == 0) c.num_candidates = 1;
    return c;
  }

  void validate() const {
    if (num_candidates == 0)
      throw std::invalid_argument("DelaySearchConfig: num_candidates must be >= 1");
  }
};

struct LineFit {
  double slope = 0.0;      ///< radians per bin
  double intercept = 0.0;  ///< radians
  double mse = 0.0;        ///< weighted mean squared phase residual
};

struct SensingCsi {
  std::size_t beam_index = 0;
  CVec csi;
  /// Bins whose transmit magnitude cleared the floor.
  std::vector<bool> valid;
  /// Fit weight per bin (transmit magnitude; 0 for invalid bins).
  std::vector<double> weights;
  std::size_t delay_star = 0;
  LineFit fit;
  /// Fit error for every candidate delay.
  std::vector<double> loss_profile;
};

struct CsiFeatures {
  double received_power = 0.0;  ///< sum of |H|^2 over valid bins, linear
  /// n_valid * sum w^2 |H|^2 / sum w^2; equals received_power for flat CSI
  /// and is insensitive to bins with little transmit energy.
  double weighted_power = 0.0;
  double phase_slope = 0.0;     ///< radians per bin
  double linearity_loss = 0.0;
  /// Delay refined by the residual slope: delay_star - slope * N' / (2 pi).
  double delay_estimate = 0.0;
};

inline constexpr double kTxBinFloor = 1e-12;

/// DFT bin indices in ascending signed frequency: -N/2 .. N/2 - 1 (mod N).
inline std::vector<std::size_t> centered_bins(std::size_t n) {
  std::vector<std::size_t> order(n);
  const std::size_t neg = n / 2;
  for (std::size_t i = 0; i < n; ++i) order[i] = (i + n - neg) % n;
  return order;
}

/// Signed frequency of bin k of an n-point DFT.
inline double signed_bin(std::size_t k, std::size_t n) {
  return k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

/// Weighted least-squares line through the unwrapped phase of h, visiting
/// bins in the given order and using their signed frequency as abscissa.
/// Bins with zero weight or zero magnitude are skipped, including during
/// unwrapping.
inline LineFit fit_phase_line(std::span<const cplx> h, std::span<const double> weights,
                              std::span<const std::size_t> order) {
  if (h.size() != weights.size())
    throw std::invalid_argument("fit_phase_line: weight count differs from bin count");
  std::vector<double> ks, ph, ws;
  double prev = 0.0;
  for (std::size_t k : order) {
    if (k >= h.size()) throw std::invalid_argument("fit_phase_line: bin order out of range");
    if (!(weights[k] > 0.0) || h[k] == cplx{}) continue;
    double p = std::arg(h[k]);
    if (!ph.empty()) p += 2.0 * kPi * std::round((prev - p) / (2.0 * kPi));
    prev = p;
    ks.push_back(signed_bin(k, h.size()));
    ph.push_back(p);
    ws.push_back(weights[k]);
  }
  if (ph.empty()) throw std::invalid_argument("no usable subcarriers");
  double sw = 0, sk = 0, sp = 0;
  for (std::size_t i = 0; i < ph.size(); ++i) {
    sw += ws[i];
    sk += ws[i] * ks[i];
    sp += ws[i] * ph[i];
  }
  const double kbar = sk / sw, pbar = sp / sw;
  double skk = 0, skp = 0;
  for (std::size_t i = 0; i < ph.size(); ++i) {
    skk += ws[i] * (ks[i] - kbar) * (ks[i] - kbar);
    skp += ws[i] * (ks[i] - kbar) * (ph[i] - pbar);
  }
  LineFit fit;
  fit.slope = skk > 0.0 ? skp / skk : 0.0;
  fit.intercept = pbar - fit.slope * kbar;
  double err = 0.0;
  for (std::size_t i = 0; i < ph.size(); ++i) {
    const double r = ph[i] - fit.slope * ks[i] - fit.intercept;
    err += ws[i] * r * r;
  }
  fit.mse = err / sw;
  return fit;
}

inline LineFit fit_phase_line(std::span<const cplx> h, std::span<const double> weights) {
  const auto order = centered_bins(h.size());
  return fit_phase_line(h, weights, order);
}

/// Received and transmitted samples for one DMRS symbol. `rx` runs from the
/// symbol body start to the end of the capture, so delayed windows may read
/// past the body; samples past the end of the capture are taken as zero.
struct SensingSymbol {
  std::span<const cplx> rx;
  std::span<const cplx> tx_body;
  /// Fraction of the band carrying subcarriers; sub-symbol bins outside it
  /// are excluded.
  double occupied_fraction = 1.0;
};

inline SensingSymbol sensing_symbol(std::span<const cplx> rx_slot, const SlotWaveform& tx,
                                    std::size_t symbol) {
  const auto& num = tx.numerology;
  if (symbol >= num.symbols_per_slot)
    throw std::invalid_argument("sensing_symbol: symbol index out of range");
  const std::size_t start = num.body_start(symbol);
  if (rx_slot.size() < start)
    throw std::invalid_argument("sensing_symbol: capture shorter than the symbol start");
  return SensingSymbol{rx_slot.subspan(start), tx.body(symbol),
                       static_cast<double>(num.occupied) / static_cast<double>(num.fft_size)};
}

namespace detail {

inline cplx rx_at(const SensingSymbol& sym, std::size_t i) {
  return i < sym.rx.size() ? sym.rx[i] : cplx{};
}

inline CVec rx_window(const SensingSymbol& sym, std::size_t start, std::size_t len) {
  CVec w(len);
  for (std::size_t i = 0; i < len; ++i) w[i] = rx_at(sym, start + i);
  return w;
}

struct TxWindow {
  CVec spectrum;
  std::vector<bool> valid;
  std::vector<double> weights;
};

inline TxWindow tx_window(const SensingSymbol& sym, const SubSymbolSchedule& sched,
                          std::size_t m, double factor, const Dft& dft, OpCount* ops) {
  if (sym.tx_body.size() != sched.fft_size())
    throw std::invalid_argument("sensing: transmit body length differs from the schedule");
  const std::size_t len = sched.sub_len();
  const auto tx = sym.tx_body.subspan(m * len, len);
  TxWindow t;
  t.spectrum = dft.forward(tx, ops);
  t.valid.resize(len);
  t.weights.resize(len);
  const double edge = sym.occupied_fraction * static_cast<double>(len) / 2.0;
  for (std::size_t k = 0; k < len; ++k) {
    const double a = std::abs(t.spectrum[k]);
    t.valid[k] = a > kTxBinFloor && std::abs(signed_bin(k, len)) <= edge;
    t.weights[k] = t.valid[k] ? factor * a : 0.0;
  }
  return t;
}

inline void check_beam(const SubSymbolSchedule& sched, std::size_t m) {
  if (m >= sched.num_beams())
    throw std::invalid_argument("sensing: beam index " + std::to_string(m) + " out of range");
}

inline double plan_factor(const PredistortionPlan* plan, std::size_t m) {
  if (!plan) return 1.0;
  if (m >= plan->factors.size())
    throw std::invalid_argument("sensing: pre-distortion plan has no entry for beam " +
                                std::to_string(m));
  return plan->factors[m];
}

/// H[k] = DFT(rx window)[k] / (factor * DFT(tx window)[k]); invalid bins are 0.
inline CVec divide(std::span<const cplx> rx_spec, const TxWindow& tx, double factor,
                   OpCount* ops) {
  CVec h(rx_spec.size());
  for (std::size_t k = 0; k < h.size(); ++k)
    if (tx.valid[k]) h[k] = rx_spec[k] / (factor * tx.spectrum[k]);
  if (ops) ops->complex_macs += h.size();
  return h;
}

}  // namespace detail

/// CSI of beam m's window evaluated at receive delay delta_n. The plan's
/// amplitude factor is divided out so pre-distortion does not bias the CSI.
inline CVec sub_symbol_csi(const SensingSymbol& sym, const SubSymbolSchedule& sched,
                           std::size_t m, std::size_t delta_n,
                           const PredistortionPlan* plan = nullptr) {
  detail::check_beam(sched, m);
  const double factor = detail::plan_factor(plan, m);
  const Dft dft(sched.sub_len());
  const auto tx = detail::tx_window(sym, sched, m, factor, dft, nullptr);
  const CVec rx = detail::rx_window(sym, m * sched.sub_len() + delta_n, sched.sub_len());
  return detail::divide(dft.forward(rx), tx, factor, nullptr);
}

/// Delay search for beam m over candidates 0 .. num_candidates - 1.
inline SensingCsi solve_opt_delay(const SensingSymbol& sym, const SubSymbolSchedule& sched,
                                  std::size_t m, const DelaySearchConfig& cfg,
                                  const PredistortionPlan* plan = nullptr,
                                  OpCount* ops = nullptr) {
  cfg.validate();
  detail::check_beam(sched, m);
  const std::size_t len = sched.sub_len();
  const double factor = detail::plan_factor(plan, m);
  const Dft dft(len);
  const auto tx = detail::tx_window(sym, sched, m, factor, dft, ops);
  bool any = false;
  for (bool v : tx.valid) any = any || v;
  if (!any)
    throw std::invalid_argument("beam " + std::to_string(m) + ": no usable subcarriers");

  const std::size_t base = m * len;
  const CVec rot = sliding_rotations(len);
  CVec spec = dft.forward(detail::rx_window(sym, base, len), ops);
  SensingCsi best;
  best.beam_index = m;
  best.valid = tx.valid;
  best.weights = tx.weights;
  double best_mse = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < cfg.num_candidates; ++d) {
    if (d > 0) {
      if (cfg.accelerated) {
        sliding_dft_step(spec, detail::rx_at(sym, base + d - 1 + len),
                         detail::rx_at(sym, base + d - 1), rot, ops);
      } else {
        spec = dft.forward(detail::rx_window(sym, base + d, len), ops);
      }
    }
    CVec h = detail::divide(spec, tx, factor, ops);
    LineFit fit;
    try {
      fit = fit_phase_line(h, tx.weights);
    } catch (const std::invalid_argument&) {
      // Every valid bin received nothing; this candidate cannot be fitted.
      best.loss_profile.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    best.loss_profile.push_back(fit.mse);
    if (fit.mse < best_mse) {
      best_mse = fit.mse;
      best.delay_star = d;
      best.fit = fit;
      best.csi = std::move(h);
    }
  }
  if (best.csi.empty())
    throw std::invalid_argument("beam " + std::to_string(m) + ": no usable subcarriers");
  return best;
}

inline CsiFeatures extract_features(const SensingCsi& s) {
  CsiFeatures f;
  double wsum = 0.0, wpow = 0.0, count = 0.0;
  for (std::size_t k = 0; k < s.csi.size(); ++k) {
    if (!s.valid.empty() && !s.valid[k]) continue;
    const double p = std::norm(s.csi[k]);
    const double w = s.weights.empty() ? 1.0 : s.weights[k] * s.weights[k];
    f.received_power += p;
    wsum += w;
    wpow += w * p;
    count += 1.0;
  }
  f.weighted_power = wsum > 0.0 ? count * wpow / wsum : 0.0;
  f.phase_slope = s.fit.slope;
  f.linearity_loss = s.fit.mse;
  const double len = static_cast<double>(s.csi.size());
  f.delay_estimate = static_cast<double>(s.delay_star) - s.fit.slope * len / (2.0 * kPi);
  return f;
}

/// Delay search for every beam of one DMRS symbol.
inline std::vector<SensingCsi> estimate_symbol(const SensingSymbol& sym,
                                               const SubSymbolSchedule& sched,
                                               const DelaySearchConfig& cfg,
                                               const PredistortionPlan* plan = nullptr,
                                               OpCount* ops = nullptr) {
  if (plan && plan->factors.size() != sched.num_beams())
    throw std::invalid_argument("estimate_symbol: plan size differs from schedule M");
  std::vector<SensingCsi> out;
  out.reserve(sched.num_beams());
  for (std::size_t m = 0; m < sched.num_beams(); ++m) {
    try {
      out.push_back(solve_opt_delay(sym, sched, m, cfg, plan, ops));
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      if (msg.rfind("beam ", 0) == 0) throw;
      throw std::invalid_argument("beam " + std::to_string(m) + ": " + msg);
    }
  }
  return out;
}

/// Multiply-adds of the two delay-sweep strategies for one beam window,
/// counting the transmit DFT and the per-bin division in both.
struct SweepCost {
  std::uint64_t accelerated = 0;
  std::uint64_t recompute = 0;
};

inline SweepCost delay_sweep_cost(std::size_t sub_len, std::size_t num_candidates) {
  const Dft dft(sub_len);
  const std::uint64_t fft = dft.mac_count();
  const std::uint64_t div = sub_len * num_candidates;
  SweepCost c;
  c.accelerated = fft + fft + (num_candidates - 1) * sub_len + div;
  c.recompute = fft + num_candidates * fft + div;
  return c;
}

// ---------------------------------------------------------------------------
// CSV output

struct SensingRow {
  std::size_t slot = 0;
  std::size_t symbol = 0;
  std::size_t beam = 0;
  double azimuth_deg = 0.0;
  std::optional<double> elevation_deg;
  std::size_t delay_star = 0;
  CsiFeatures features;
  /// Power divided by the round-trip beam gain, when known.
  std::optional<double> normalized_power;
};

inline void write_sensing_csv_header(std::ostream& out) {
  out << "slot,symbol,beam,azimuth_deg,elevation_deg,delay_star,power_db,"
         "weighted_power_db,normalized_power_db,phase_slope,linearity_loss,delay_estimate\n";
}

inline void write_sensing_csv_row(std::ostream& out, const SensingRow& r) {
  char buf[512];
  auto db = [](double v) { return v > 0.0 ? lin2db(v) : -400.0; };
  const std::string el = r.elevation_deg ? std::to_string(*r.elevation_deg) : "";
  const std::string np = r.normalized_power
                             ? [&] {
                                 char b[32];
                                 std::snprintf(b, sizeof b, "%.6f", db(*r.normalized_power));
                                 return std::string(b);
                               }()
                             : "";
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.4f,%s,%zu,%.6f,%.6f,%s,%.9g,%.9g,%.6f\n", r.slot,
                r.symbol, r.beam, r.azimuth_deg, el.c_str(), r.delay_star,
                db(r.features.received_power), db(r.features.weighted_power), np.c_str(),
                r.features.phase_slope,
                r.features.linearity_loss, r.features.delay_estimate);
  out << buf;
}

}  // namespace subbeam
