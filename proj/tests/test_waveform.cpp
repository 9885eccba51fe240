#include "catch_amalgamated.hpp"

#include "subbeam/apps/isac.hpp"
#include "subbeam/waveform.hpp"

using namespace subbeam;
using Catch::Approx;

TEST_CASE("constellations have unit energy, Gray labels and exact slicing") {
  for (auto mod : {Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64, Modulation::Qam256}) {
    const Constellation c(mod);
    const auto& pts = c.points();
    REQUIRE(pts.size() == (1u << c.bits()));
    double e = 0.0, dmin = 1e9;
    for (auto p : pts) e += std::norm(p);
    CHECK(e / static_cast<double>(pts.size()) == Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) dmin = std::min(dmin, std::abs(pts[i] - pts[j]));
    for (unsigned code = 0; code < pts.size(); ++code) {
      CHECK(c.slice(pts[code]) == code);
      CHECK(c.slice(pts[code] + cplx(0.45 * dmin, -0.45 * dmin)) == code);
      for (unsigned other = 0; other < pts.size(); ++other) {
        if (std::abs(std::abs(pts[code] - pts[other]) - dmin) < 1e-12)
          CHECK(std::popcount(code ^ other) == 1);
      }
    }
  }
}

TEST_CASE("slot symbols: FFT of the body reproduces the grid, CP copies the tail") {
  Numerology num;
  const auto slot = generate_slot(num, Modulation::Qam64, 42);
  REQUIRE(slot.samples.size() == 14u * 1096u);
  const Dft dft(num.fft_size);
  double power = 0.0;
  for (auto v : slot.samples) power += std::norm(v);
  CHECK(power / static_cast<double>(slot.samples.size()) == Approx(768.0 / 1024.0).epsilon(0.02));
  for (std::size_t s = 0; s < num.symbols_per_slot; ++s) {
    const auto spec = symbol_spectrum(slot.body(s), dft);
    double err = 0.0;
    for (std::size_t k = 0; k < num.fft_size; ++k) err = std::max(err, std::abs(spec[k] - slot.grids[s][k]));
    CHECK(err < 1e-10);
    const auto* p = slot.samples.data() + num.symbol_start(s);
    for (std::size_t i = 0; i < num.cp_length; ++i) CHECK(p[i] == p[num.fft_size + i]);
    CHECK(slot.codes[s].empty() == num.is_dmrs(s));
  }
  CHECK(num.dmrs_indices() == std::vector<std::size_t>{2, 3, 10, 11});
  CHECK(slot.grids[2] == slot.grids[11]);
}

TEST_CASE("same seed gives the same slot") {
  Numerology num;
  CHECK(generate_slot(num, Modulation::Qam16, 7).samples == generate_slot(num, Modulation::Qam16, 7).samples);
  CHECK(generate_slot(num, Modulation::Qam16, 7).samples != generate_slot(num, Modulation::Qam16, 8).samples);
}

TEST_CASE("sub-symbol schedule: floor(1024 / 34) = 30 samples, 4 on the last beam") {
  Numerology num;
  const SubSymbolSchedule s(num, 34);
  CHECK(s.sub_len() == 30);
  CHECK(s.used_samples() == 1020);
  CHECK(s.unused_samples() == 4);
  CHECK(s.beam_of_sample(29) == 0);
  CHECK(s.beam_of_sample(30) == 1);
  CHECK(s.beam_of_sample(1021) == -1);
  CHECK(s.tx_beam(1021) == 33);
  CHECK_THROWS_AS(SubSymbolSchedule(num, 0), std::invalid_argument);
  CHECK_THROWS_AS(SubSymbolSchedule(num, 2000), std::invalid_argument);
}

TEST_CASE("beam schedule maps DMRS samples to sub-symbol beams") {
  Numerology num;
  const auto g = ArrayGeometry::ula(4);
  const SubSymbolSchedule sched(num, 4);
  std::vector<Beamformer> set;
  for (int m = 0; m < 4; ++m) set.push_back(conjugate_beam(g, sensing_direction(g, deg2rad(10.0 * m))));
  const auto data = conjugate_beam(g, sensing_direction(g, 0.0));
  const auto bs = make_beam_schedule(num, sched, set, data);
  CHECK(bs.beam_of[0] == bs.data_index());
  const std::size_t b = num.body_start(2);
  CHECK(bs.beam_of[b] == 0);
  CHECK(bs.beam_of[b + 256] == 1);
  CHECK(bs.beam_of[b + 1023] == 3);
  CHECK(bs.beam_of[num.symbol_start(2)] == 3);
  CHECK(bs.beam_of[num.body_start(4)] == bs.data_index());
}

TEST_CASE("pre-distortion factor equalizes the summed user gain") {
  const auto g = ArrayGeometry::ula(16);
  const std::vector<double> angles{deg2rad(-20.0), deg2rad(25.0)};
  std::vector<UserLink> users{{angles[0], 1.0}, {angles[1], 1.0}};
  const auto data = data_beam_for(users, g);
  std::vector<Beamformer> set;
  for (int m = 0; m < 5; ++m) set.push_back(conjugate_beam(g, sensing_direction(g, deg2rad(-10.0 + 5.0 * m))));
  const auto plan = make_predistortion(set, data, g, angles);
  double gd = 0.0;
  for (double a : angles) gd += beamforming_gain(data, g, a);
  for (std::size_t m = 0; m < set.size(); ++m) {
    double gc = 0.0;
    for (double a : angles) gc += beamforming_gain(set[m], g, a);
    CHECK(plan.factors[m] * plan.factors[m] * gc == Approx(gd).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_predistortion(std::vector<double>{1.0}, {{0.0}}), std::invalid_argument);
}

TEST_CASE("noiseless downlink: estimated CSI equals the genie and decoding is error free") {
  Numerology num;
  const auto g = ArrayGeometry::ula(16);
  SceneUser user;
  user.link.angle = deg2rad(15.0);
  user.path.delay_samples = 5;
  user.path.phase_shift = 0.7;
  user.path.attenuation = 0.3;
  const auto data = conjugate_beam(g, sensing_direction(g, user.link.angle));
  const auto slot = generate_slot(num, Modulation::Qam64, 3);
  const auto bs = fixed_beam_schedule(num, data);
  const auto y = apply_downlink(slot.samples, bs, user, g, 0.0, 0);
  const auto h = estimate_user_csi(y, slot);
  const auto genie = genie_user_csi(user, data, g, num);
  double err = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) err = std::max(err, std::abs(h[i] - genie[i]));
  CHECK(err < 1e-9);
  const auto score = demodulate_and_score(y, slot, h, Modulation::Qam64);
  CHECK(score.evm_percent < 1e-6);
  CHECK(score.ber == 0.0);
  CHECK(score.symbols == 10u * 768u);
}

TEST_CASE("numerology validation") {
  Numerology n;
  n.dmrs_symbols = {0};
  CHECK_THROWS_AS(n.validate(), std::invalid_argument);
  n = {};
  n.occupied = 2000;
  CHECK_THROWS_AS(n.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_modulation("8psk"), std::invalid_argument);
}
