// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subbeam/subbeam.hpp"

using namespace subbeam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char b[512];
  std::snprintf(b, sizeof b, f, args...);
  return b;
}

// 1 ------------------------------------------------------------------------
Outcome conjugate_identity() {
  const auto g = ArrayGeometry::ula(16);
  double worst = 0.0;
  for (double deg : {-45.0, -10.0, 0.0, 7.0, 30.0}) {
    const auto w = conjugate_beam(g, sensing_direction(g, deg2rad(deg)));
    worst = std::max(worst, std::abs(beamforming_gain(w, g, deg2rad(deg)) - 256.0) / 256.0);
  }
  const double db = lin2db(beamforming_gain(conjugate_beam(g, sensing_direction(g, 0.0)), g, 0.0));
  return {worst < 1e-9 && std::abs(db - 24.08) < 0.005,
          fmt("gain %.2f dB, max relative error %.2e", db, worst)};
}

// 2 ------------------------------------------------------------------------
Outcome solver_parity() {
  const std::vector<std::vector<double>> sets{{-25.0, 15.0}, {-30.0, -18.0, -6.0, 6.0, 18.0, 30.0}};
  double worst = 0.0;
  std::string where;
  for (std::size_t n : {16u, 48u})
    for (const auto& degs : sets) {
      const auto g = ArrayGeometry::ula(n);
      std::vector<UserLink> users;
      for (double d : degs) users.push_back({deg2rad(d), 1.0});
      const SensingTarget target{sensing_direction(g, 0.0), 1.0};
      OptimizerConfig cfg;
      const auto accel = solve_opt_accel(users, target, g, cfg);
      OptimizerConfig base_cfg = cfg;
      base_cfg.alpha_tradeoff = 1.0 / static_cast<double>(users.size());
      const auto base = solve_opt_base(users, target, g, base_cfg);
      std::vector<double> angles{0.0};
      for (const auto& u : users) angles.push_back(u.angle);
      for (double a : angles) {
        const double d = std::abs(lin2db(beamforming_gain(accel.weights, g, a)) -
                                  lin2db(beamforming_gain(base.weights, g, a)));
        if (d > worst) {
          worst = d;
          where = fmt("N=%zu U=%zu at %.0f deg", n, users.size(), rad2deg(a));
        }
      }
    }
  return {worst < 1.0, fmt("max gain difference %.2f dB (%s); limit 1 dB", worst, where.c_str())};
}

// 3 ------------------------------------------------------------------------
Outcome epsilon_tradeoff() {
  const auto g = ArrayGeometry::ula(16);
  const std::vector<UserLink> users{{deg2rad(-30.0), 1.0}, {deg2rad(20.0), 1.0}};
  std::vector<double> eps;
  for (int i = 0; i <= 6; ++i) eps.push_back(0.25 * i);
  const auto pts = tradeoff_sweep(users, sensing_direction(g, 0.0), g, eps);
  bool mono = true;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    mono = mono && lin2db(pts[i].sensing_gain) <= lin2db(pts[i - 1].sensing_gain) + 0.2;
    mono = mono && lin2db(pts[i].gamma_min) >= lin2db(pts[i - 1].gamma_min) - 0.2;
  }
  const auto x = tradeoff_crossover(pts);
  const bool cross = x && *x > 0.0 && *x < 1.5;
  return {mono && cross,
          fmt("monotone %s; sensing %.2f -> %.2f dB, gamma_min %.2f -> %.2f dB; crossover %s",
              mono ? "yes" : "no", lin2db(pts.front().sensing_gain), lin2db(pts.back().sensing_gain),
              lin2db(pts.front().gamma_min), lin2db(pts.back().gamma_min),
              x ? fmt("eps=%.3f", *x).c_str() : "none")};
}

// 4 ------------------------------------------------------------------------
Outcome sliding_dft() {
  double worst = 0.0;
  for (std::size_t n : {16u, 30u, 64u}) {
    const Dft dft(n);
    const CVec rot = sliding_rotations(n);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gd;
      CVec x(n + 64);
      for (auto& v : x) v = cplx(gd(rng), gd(rng));
      CVec spec = dft.forward(std::span<const cplx>(x).first(n));
      for (std::size_t s = 1; s <= 64; ++s) {
        sliding_dft_step(spec, x[s - 1 + n], x[s - 1], rot);
        const CVec ref = dft.forward(std::span<const cplx>(x).subspan(s, n));
        double peak = 0.0, err = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          peak = std::max(peak, std::abs(ref[k]));
          err = std::max(err, std::abs(spec[k] - ref[k]));
        }
        worst = std::max(worst, err / peak);
      }
    }
  }
  // Instrumented count on a real delay sweep (N' = 30, 10 candidates).
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  const auto slot = generate_slot(num, Modulation::Qam64, 1);
  const auto sym = sensing_symbol(slot.samples, slot, 2);
  OpCount fast, slow;
  DelaySearchConfig cfg;
  solve_opt_delay(sym, sched, 0, cfg, nullptr, &fast);
  cfg.accelerated = false;
  solve_opt_delay(sym, sched, 0, cfg, nullptr, &slow);
  const double ratio = static_cast<double>(fast.complex_macs) / static_cast<double>(slow.complex_macs);
  return {worst < 1e-7 && ratio <= 0.5,
          fmt("max relative error %.2e; MACs %llu vs %llu (ratio %.3f)", worst,
              static_cast<unsigned long long>(fast.complex_macs),
              static_cast<unsigned long long>(slow.complex_macs), ratio)};
}

// 5 ------------------------------------------------------------------------
Outcome delay_recovery() {
  Numerology num;
  const SubSymbolSchedule sched(num, 34);
  const auto g = ArrayGeometry::ula(1);
  const std::vector<Beamformer> beams(34, Beamformer(CVec{1.0}));
  const auto bs = make_beam_schedule(num, sched, beams, beams[0]);
  const auto unit = [](const Direction&) { return 1.0; };
  const DelaySearchConfig cfg;
  const std::size_t len = sched.sub_len();

  auto trial = [&](std::size_t t, std::size_t d, double snr_db) {
    const auto slot = generate_slot(num, Modulation::Qam64, 1000 + t);
    const std::size_t m = (t * 7) % 34;
    double sigma2 = 0.0;
    if (snr_db < 1e9) {
      // Noise per time sample so that the in-band per-bin SNR is snr_db.
      const auto x = Dft(len).forward(slot.body(2).subspan(m * len, len));
      double acc = 0.0;
      int cnt = 0;
      for (std::size_t k = 0; k < len; ++k)
        if (std::abs(signed_bin(k, len)) <= 0.75 * len / 2.0) {
          acc += std::norm(x[k]);
          ++cnt;
        }
      sigma2 = acc / cnt / static_cast<double>(len) / db2lin(snr_db);
    }
    Reflector r;
    r.path = PathModel{1.0, 0.3 * static_cast<double>(t), d};
    const auto y = apply_monostatic(slot.samples, bs, std::vector<Reflector>{r}, g, unit,
                                    MonostaticOptions{sigma2, std::nullopt}, 100 + t);
    return solve_opt_delay(sensing_symbol(y, slot, 2), sched, m, cfg).delay_star;
  };

  bool exact = true;
  for (std::size_t d = 0; d < cfg.num_candidates; ++d)
    for (std::size_t t = 0; t < 5; ++t) exact = exact && trial(t * 10 + d, d, 1e12) == d;
  int within = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const std::size_t d = static_cast<std::size_t>(t) % cfg.num_candidates;
    const long err = static_cast<long>(trial(static_cast<std::size_t>(t), d, 10.0)) - static_cast<long>(d);
    within += std::abs(err) <= 1;
  }
  const double rate = 100.0 * within / trials;
  return {exact && rate >= 95.0,
          fmt("noiseless exact %s; within +-1 sample at 10 dB: %.1f%% (target 95%%)", exact ? "yes" : "no", rate)};
}

// 6 ------------------------------------------------------------------------
Outcome predistortion_evm() {
  IsacSetup st;
  st.geometry = ArrayGeometry::ula(16);
  Scene sc;
  sc.self_interference_inr_db.reset();
  SceneUser u;
  u.link.angle = deg2rad(20.0);
  u.path.delay_samples = 3;
  u.path.phase_shift = 0.4;
  sc.users.push_back(u);
  const auto links = user_links(sc);
  st.data_beam = data_beam_for(links, st.geometry);
  std::vector<double> az;
  for (int m = 0; m < 34; ++m) az.push_back(deg2rad(-16.5 + m));
  const auto book = build_codebook(links, azimuth_sweep(st.geometry, az), 1.0, st.geometry);
  st.sensing_beams.emplace_back();
  for (const auto& e : book.entries) st.sensing_beams[0].push_back(e.weights);
  sc.noise_power = noise_for_user_snr(sc.users[0], st.data_beam, st.geometry, 30.0);

  double est_on = 0, genie = 0, est_off = 0;
  const int slots = 4;
  for (int s = 0; s < slots; ++s) {
    st.predistort = true;
    const auto on = simulate_isac_slot(st, sc, broadside_rx_gain(), 5 + s, false);
    st.predistort = false;
    const auto off = simulate_isac_slot(st, sc, broadside_rx_gain(), 5 + s, false);
    est_on += on.users[0].estimated.evm_percent / slots;
    genie += on.users[0].genie.evm_percent / slots;
    est_off += off.users[0].estimated.evm_percent / slots;
  }
  const bool pass = est_on - genie < 1.0 && est_off > est_on;
  return {pass, fmt("EVM genie %.3f%%, estimated %.3f%% (pre-distorted), %.3f%% (not pre-distorted)",
                    genie, est_on, est_off)};
}

// 7 ------------------------------------------------------------------------
Outcome imaging() {
  const auto grid = ImagingGrid::uniform(15.0, 1.0);
  Scene scene;
  scene.noise_power = 0.01;
  scene.self_interference_inr_db = 20.0;
  Reflector a, b;
  a.azimuth = deg2rad(-8.0);
  a.elevation = deg2rad(-5.0);
  a.path = PathModel{1.0, 0.0, 4};
  b.azimuth = deg2rad(7.0);
  b.elevation = deg2rad(6.0);
  b.path = PathModel{std::pow(10.0, -6.0 / 20.0), 0.0, 6};
  scene.reflectors = {a, b};
  const auto res = run_imaging(scene, grid, ImagingConfig{}, 1);
  const auto peaks = heatmap_peaks(res.grid, 2);
  auto near = [&](const HeatmapPeak& p, const Reflector& r) {
    return std::abs(rad2deg(grid.az_angles[p.az] - r.azimuth)) <= 1.01 &&
           std::abs(rad2deg(grid.el_angles[p.el] - r.elevation)) <= 1.01;
  };
  const bool located = peaks.size() == 2 && near(peaks[0], a) && near(peaks[1], b);
  const auto& t = res.air_time;
  const bool air = t.directions == 961 && t.slots == 8 && std::abs(t.dmrs_counted_seconds - 0.875e-3) < 1e-12;
  std::string where;
  for (const auto& p : peaks)
    where += fmt(" (%.0f,%.0f) %.1f dB", rad2deg(grid.az_angles[p.az]), rad2deg(grid.el_angles[p.el]), p.value);
  return {located && air, fmt("peaks%s; %zu directions in %zu slots, %.3f ms DMRS time", where.c_str(),
                              t.directions, t.slots, t.dmrs_counted_seconds * 1e3)};
}

// 8 ------------------------------------------------------------------------
Outcome mobility() {
  const auto r = run_mobility(MobilityScenario::four_user_sweep(), 1);
  std::set<std::size_t> ticks;
  bool decisions = true;
  double gap = 0.0;
  for (const auto& c : r.checks) {
    ticks.insert(c.tick);
    decisions = decisions && c.decision_matches;
    gap = std::max(gap, c.fresh_gap_db);
  }
  const double band = r.sensing_max_db - r.sensing_min_db;
  const bool pass = r.reopt_fraction() < 0.5 && band <= 1.5 && ticks.size() == 20 && decisions;
  return {pass, fmt("re-optimized %zu/%zu ticks (%.1f%%); sensing gain %.2f..%.2f dB (band %.2f dB); "
                    "%zu sampled ticks, decisions %s; largest fresh-solve gap %.2f dB",
                    r.reopt_ticks, r.ticks.size(), 100.0 * r.reopt_fraction(), r.sensing_min_db,
                    r.sensing_max_db, band, ticks.size(), decisions ? "all match" : "MISMATCH", gap)};
}

// 9 ------------------------------------------------------------------------
Outcome localization() {
  const auto rep = run_localization(LocalizationConfig{}, LocalizationExperiment{}, 1);
  return {rep.median_distance_error <= 0.5 && rep.median_angle_error <= 2.0,
          fmt("median distance error %.3f m (limit 0.5), median angle error %.3f deg (limit 2); "
              "%zu calibration / %zu test runs",
              rep.median_distance_error, rep.median_angle_error, rep.train_runs, rep.test_runs)};
}

// 10 -----------------------------------------------------------------------
std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  const std::map<std::string, std::string> configs{
      {"codebook", R"({"sweep": {"start_deg": -6, "stop_deg": 6, "count": 3},
                       "update_users": [{"angle_deg": -26}, {"angle_deg": 20}]})"},
      {"pattern", R"({"grid": {"start_deg": -60, "stop_deg": 60, "step_deg": 2}})"},
      {"tradeoff", R"({"epsilons": {"start": 0, "stop": 1, "step": 0.5}})"},
      {"simulate", R"({"slots": 1, "baselines": true,
                       "scene": {"noise_power": 0.01,
                                 "users": [{"angle_deg": -20, "delay_samples": 2}],
                                 "reflectors": [{"azimuth_deg": 3, "delay_samples": 5, "attenuation_db": -6}]}})"},
      {"image", R"({"grid": {"half_span_deg": 4, "step_deg": 1},
                    "scene": {"noise_power": 0.01,
                              "reflectors": [{"azimuth_deg": 2, "elevation_deg": -1, "delay_samples": 4}]}})"},
      {"localize", R"({"num_beams": 8, "experiment": {"dist_min": 1, "dist_max": 3, "dist_step": 0.5,
                       "angle_half_span_deg": 4, "angle_step_deg": 2, "slots_per_position": 2}})"},
      {"mobility", R"({"array_size": 16, "duration": 0.1, "validation_ticks": 3})"},
      {"bench", R"({"sub_lens": [16, 30], "candidates": [4, 10], "trials": 5})"}};
  fs::remove_all(work);
  fs::create_directories(work);
  std::vector<std::string> bad;
  std::size_t files = 0;
  for (const auto& [cmd, text] : configs) {
    const fs::path cfg = work / (cmd + ".json");
    std::ofstream(cfg) << text;
    std::map<std::string, std::string> trees[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = work / (cmd + "_" + std::to_string(rep));
      const std::string line = "\"" + cli + "\" " + cmd + " -c \"" + cfg.string() + "\" -s 5 -o \"" +
                               out.string() + "\" > \"" + (work / (cmd + ".log")).string() + "\" 2>&1";
      if (std::system(line.c_str()) != 0) {
        bad.push_back(cmd + " (exit status)");
        break;
      }
      trees[rep] = read_tree(out);
    }
    if (trees[0].empty() || trees[0] != trees[1]) {
      if (!trees[0].empty()) bad.push_back(cmd);
      continue;
    }
    files += trees[0].size();
  }
  std::string detail = fmt("%zu subcommands, %zu output files compared", configs.size(), files);
  if (!bad.empty()) {
    detail += "; differing:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string cli, work = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the subbeam CLI")->required();
  app.add_option("--work", work, "scratch directory for CLI runs");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"conjugate gain identity", conjugate_identity},
      {"OPT-Base vs OPT-Accel parity", solver_parity},
      {"epsilon trade-off", epsilon_tradeoff},
      {"sliding-DFT equivalence and cost", sliding_dft},
      {"delay recovery", delay_recovery},
      {"pre-distortion EVM", predistortion_evm},
      {"imaging", imaging},
      {"mobility", mobility},
      {"SP localization", localization},
      {"determinism", [&] { return determinism(cli, work); }}};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), sec);
    std::fflush(stdout);
  }
  return failed;
}
