#include "catch_amalgamated.hpp"

#include <random>

#include "subbeam/channel.hpp"
#include "subbeam/sensing.hpp"

using namespace subbeam;
using Catch::Approx;

namespace {

struct Capture {
  SlotWaveform slot;
  CVec rx;
};

// Single-element transmitter so every sub-symbol beam has unit gain.
Capture echo(std::size_t delay, double phase, double noise, std::uint64_t seed, std::size_t m_beams = 34) {
  Numerology num;
  const SubSymbolSchedule sched(num, m_beams);
  const auto g = ArrayGeometry::ula(1);
  const std::vector<Beamformer> beams(m_beams, Beamformer(CVec{1.0}));
  Capture c{generate_slot(num, Modulation::Qam64, seed), {}};
  Reflector r;
  r.path = PathModel{1.0, phase, delay};
  c.rx = apply_monostatic(c.slot.samples, make_beam_schedule(num, sched, beams, beams[0]),
                          std::vector<Reflector>{r}, g, [](const Direction&) { return 1.0; },
                          MonostaticOptions{noise, std::nullopt}, seed + 1);
  return c;
}

}  // namespace

TEST_CASE("phase line fit is exact on a wrapped linear phase") {
  for (double slope : {-2.5, -0.7, 0.0, 0.3, 1.9}) {
    const std::size_t n = 30;
    CVec h(n);
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
      h[k] = std::polar(1.0 + 0.1 * k, slope * signed_bin(k, n) + 0.4);
      w[k] = 0.5 + (k % 3);
    }
    const auto fit = fit_phase_line(h, w);
    CHECK(fit.slope == Approx(slope).margin(1e-12));
    CHECK(std::remainder(fit.intercept - 0.4, 2.0 * kPi) == Approx(0.0).margin(1e-12));
    CHECK(fit.mse < 1e-20);
  }
}

TEST_CASE("weighted fit matches the closed-form weighted regression") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.3, 0.3), wd(0.1, 2.0);
  const std::size_t n = 16;
  CVec h(n);
  std::vector<double> w(n), x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = signed_bin(centered_bins(n)[k], n);
    y[k] = 0.2 * x[k] + u(rng);
    w[k] = wd(rng);
    h[centered_bins(n)[k]] = std::polar(1.0, y[k]);
  }
  std::vector<double> wb(n);
  for (std::size_t k = 0; k < n; ++k) wb[centered_bins(n)[k]] = w[k];
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
    sxx += w[k] * x[k] * x[k];
    sxy += w[k] * x[k] * y[k];
  }
  const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
  CHECK(fit_phase_line(h, wb).slope == Approx(slope).epsilon(1e-10));
}

TEST_CASE("zero-weight bins are ignored") {
  CVec h(8, cplx(1.0, 0.0));
  std::vector<double> w(8, 1.0);
  h[3] = std::polar(5.0, 2.0);
  w[3] = 0.0;
  CHECK(fit_phase_line(h, w).mse < 1e-24);
  CHECK_THROWS_AS(fit_phase_line(h, std::vector<double>(8, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(fit_phase_line(h, std::vector<double>(7, 1.0)), std::invalid_argument);
}

TEST_CASE("noiseless delay recovery is exact for every candidate delay") {
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  DelaySearchConfig cfg;
  for (std::size_t d = 0; d < cfg.num_candidates; ++d) {
    const auto c = echo(d, 0.37 * static_cast<double>(d) + 0.1, 0.0, 100 + d);
    for (std::size_t s : num.dmrs_indices()) {
      const auto sym = sensing_symbol(c.rx, c.slot, s);
      for (std::size_t m : {0u, 7u, 16u, 33u}) {
        const auto est = solve_opt_delay(sym, sched, m, cfg);
        INFO("delay " << d << " symbol " << s << " beam " << m);
        CHECK(est.delay_star == d);
        CHECK(est.loss_profile[d] < 1e-12);
        const auto f = extract_features(est);
        CHECK(f.delay_estimate == Approx(static_cast<double>(d)).margin(1e-6));
        CHECK(f.received_power == Approx(23.0).epsilon(1e-9));
        CHECK(f.weighted_power == Approx(f.received_power).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("accelerated and recomputed sweeps agree") {
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  const auto c = echo(4, 1.0, 1e-3, 77);
  const auto sym = sensing_symbol(c.rx, c.slot, 3);
  DelaySearchConfig fast, slow;
  slow.accelerated = false;
  for (std::size_t m = 0; m < 34; m += 3) {
    const auto a = solve_opt_delay(sym, sched, m, fast);
    const auto b = solve_opt_delay(sym, sched, m, slow);
    CHECK(a.delay_star == b.delay_star);
    for (std::size_t d = 0; d < a.loss_profile.size(); ++d)
      CHECK(a.loss_profile[d] == Approx(b.loss_profile[d]).epsilon(1e-6).margin(1e-12));
  }
}

TEST_CASE("instrumented cost matches the analytic sweep cost") {
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  const auto c = echo(2, 0.0, 0.0, 5);
  const auto sym = sensing_symbol(c.rx, c.slot, 2);
  for (bool acc : {true, false}) {
    DelaySearchConfig cfg;
    cfg.accelerated = acc;
    OpCount ops;
    solve_opt_delay(sym, sched, 5, cfg, nullptr, &ops);
    const auto cost = delay_sweep_cost(30, 10);
    CHECK(ops.complex_macs == (acc ? cost.accelerated : cost.recompute));
  }
  const auto cost = delay_sweep_cost(30, 10);
  CHECK(2 * cost.accelerated <= cost.recompute);
}

TEST_CASE("pre-distortion factor is divided out of the CSI") {
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  const auto c = echo(3, 0.5, 0.0, 9);
  PredistortionPlan plan{std::vector<double>(34, 1.0)};
  for (std::size_t m = 0; m < 34; ++m) plan.factors[m] = 0.5 + 0.03 * m;
  const auto scaled = predistort_dmrs(c.slot, sched, plan);
  // Echo of the scaled waveform compared against the clean reference.
  CVec rx(c.rx.size());
  for (std::size_t n = 3; n < rx.size(); ++n) rx[n] = std::polar(1.0, 0.5) * scaled.samples[n - 3];
  const auto sym = sensing_symbol(rx, c.slot, 10);
  for (std::size_t m : {1u, 20u}) {
    const auto est = solve_opt_delay(sym, sched, m, DelaySearchConfig{}, &plan);
    CHECK(est.delay_star == 3);
    CHECK(extract_features(est).received_power == Approx(23.0).epsilon(1e-9));
  }
}

TEST_CASE("sensing argument errors") {
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  const auto c = echo(0, 0.0, 0.0, 1);
  const auto sym = sensing_symbol(c.rx, c.slot, 2);
  CHECK_THROWS_AS(solve_opt_delay(sym, sched, 34, DelaySearchConfig{}), std::invalid_argument);
  DelaySearchConfig zero;
  zero.num_candidates = 0;
  CHECK_THROWS_AS(solve_opt_delay(sym, sched, 0, zero), std::invalid_argument);
  CHECK_THROWS_AS(sensing_symbol(c.rx, c.slot, 14), std::invalid_argument);
  PredistortionPlan short_plan{std::vector<double>(3, 1.0)};
  CHECK_THROWS_AS(estimate_symbol(sym, sched, DelaySearchConfig{}, &short_plan), std::invalid_argument);
}

TEST_CASE("sensing CSV header and row layout") {
  std::ostringstream ss;
  write_sensing_csv_header(ss);
  SensingRow r;
  r.beam = 3;
  r.features.received_power = 10.0;
  r.features.weighted_power = 100.0;
  write_sensing_csv_row(ss, r);
  const auto s = ss.str();
  CHECK(s.find("slot,symbol,beam,azimuth_deg") == 0);
  CHECK(s.find("0,0,3,0.0000,,0,10.000000,20.000000,,") != std::string::npos);
}
