// subbeam command-line driver. Every subcommand takes one JSON config
// (--config), an optional --seed override and a run directory (--out). The
// run directory receives the outputs and manifest.json with the resolved
// config. Wall-clock measurements are only written with --timing.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"

namespace fs = std::filesystem;
using namespace subbeam;
using namespace subbeam::cli;

namespace {

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

std::string db_str(double lin) { return lin > 0.0 ? fmt("%.6f", lin2db(lin)) : "-inf"; }

class RunDir {
 public:
  RunDir(fs::path root, bool timing) : root_(std::move(root)), timing_(timing) {
    fs::create_directories(root_);
  }

  std::ofstream open(const std::string& name, bool binary = false) {
    files_.push_back(name);
    std::ofstream out(root_ / name, binary ? std::ios::binary : std::ios::out);
    if (!out) throw std::runtime_error("cannot write " + (root_ / name).string());
    return out;
  }

  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

  bool timing() const { return timing_; }
  const fs::path& root() const { return root_; }

  void finish(const std::string& command, std::uint64_t seed, const json& config) {
    json m;
    m["tool"] = "subbeam";
    m["manifest_version"] = 1;
    m["command"] = command;
    m["seed"] = seed;
    m["config"] = config;
    auto files = files_;
    std::sort(files.begin(), files.end());
    m["outputs"] = files;
    std::ofstream out(root_ / "manifest.json");
    out << m.dump(2) << '\n';
  }

 private:
  fs::path root_;
  bool timing_;
  std::vector<std::string> files_;
};

struct Context {
  json config;  ///< resolved
  std::uint64_t seed = 1;
};

Context resolve(const json& defaults, const std::string& config_path, std::optional<std::uint64_t> seed) {
  Context c;
  json user = config_path.empty() ? json::object() : read_json_file(config_path);
  c.config = overlay(defaults, user, "");
  if (seed) c.config["seed"] = *seed;
  c.seed = c.config.at("seed").get<std::uint64_t>();
  return c;
}

std::vector<Direction> directions_for(const ArrayGeometry& geom, std::span<const double> az,
                                      std::optional<double> elevation) {
  std::vector<Direction> out;
  for (double a : az) {
    Direction d = sensing_direction(geom, a);
    if (geom.layout() == Layout::Planar && elevation) d.elevation = *elevation;
    out.push_back(d);
  }
  return out;
}

json sweep_default(double start, double stop, std::size_t count) {
  return {{"start_deg", start}, {"stop_deg", stop}, {"count", count}, {"angles_deg", nullptr}};
}

json users_default() {
  return json::array({{{"angle_deg", -30.0}, {"base_snr_db", 0.0}},
                      {{"angle_deg", 20.0}, {"base_snr_db", 0.0}}});
}

std::string dir_label(const Direction& d) {
  return d.elevation ? fmt("%.4f", rad2deg(*d.elevation)) : std::string("-");
}

// ---------------------------------------------------------------------------
// codebook

json codebook_defaults() {
  return {{"seed", 1},
          {"array", default_array(16)},
          {"optimizer", default_optimizer()},
          {"users", users_default()},
          {"sweep", sweep_default(-15.0, 15.0, 7)},
          {"elevation_deg", nullptr},
          {"target_base_snr_db", 0.0},
          {"input_codebook", nullptr},
          {"update_users", nullptr}};
}

void write_gains(std::ostream& out, const Codebook& book) {
  out << "entry,azimuth_deg,elevation_deg,status,iterations,gamma_min_db,sensing_gain_db";
  for (std::size_t u = 0; u < book.users.size(); ++u) out << ",user" << u << "_gain_db";
  out << '\n';
  for (std::size_t m = 0; m < book.entries.size(); ++m) {
    const auto& e = book.entries[m];
    out << m << ',' << fmt("%.4f", rad2deg(e.sensing.azimuth)) << ',' << dir_label(e.sensing) << ','
        << to_string(e.status) << ',' << e.iterations << ','
        << (std::isinf(e.gamma_min) ? std::string("inf") : db_str(e.gamma_min)) << ','
        << db_str(beamforming_gain(e.weights, book.geometry, e.sensing));
    for (const auto& u : book.users) out << ',' << db_str(beamforming_gain(e.weights, book.geometry, u.angle));
    out << '\n';
  }
}

void cmd_codebook(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  const auto geom = parse_array(o.at("array"));
  const auto cfg = parse_optimizer(o.at("optimizer"), ctx.seed);
  Codebook book;
  if (o.has("input_codebook")) {
    book = load_codebook(o.get<std::string>("input_codebook"));
    o.at("users");
    o.at("sweep");
    o.at("elevation_deg");
    o.at("target_base_snr_db");
  } else {
    const auto users = parse_users(o.at("users"), "users");
    const auto az = parse_angle_list(o.at("sweep"), "sweep");
    std::optional<double> el;
    if (o.has("elevation_deg")) el = deg2rad(o.get<double>("elevation_deg"));
    const auto target = db2lin(o.get<double>("target_base_snr_db"));
    book = build_codebook(users, directions_for(geom, az, el), target, geom, cfg);
  }
  run.open("codebook.txt") << codebook_to_string(book);
  {
    auto out = run.open("gains.csv");
    write_gains(out, book);
  }
  write_gains(std::cout, book);
  if (o.has("update_users")) {
    const auto moved = parse_users(o.at("update_users"), "update_users");
    const auto [next, stats] = update_codebook(book, moved, cfg);
    run.open("codebook_updated.txt") << codebook_to_string(next);
    auto out = run.open("update.csv");
    out << "entry,reoptimized,gamma_min_db_before,gamma_min_db_after\n";
    for (std::size_t m = 0; m < next.entries.size(); ++m)
      out << m << ',' << (stats.entry_reoptimized[m] ? 1 : 0) << ',' << db_str(book.entries[m].gamma_min)
          << ',' << db_str(next.entries[m].gamma_min) << '\n';
    std::cout << "update: " << stats.reused << " reused, " << stats.reoptimized << " re-optimized\n";
  }
  o.done();
}

// ---------------------------------------------------------------------------
// pattern

json pattern_defaults() {
  return {{"seed", 1},
          {"array", default_array(16)},
          {"optimizer", default_optimizer()},
          {"users", users_default()},
          {"beams", json::array({{{"kind", "conjugate"}, {"azimuth_deg", 0.0}},
                                 {{"kind", "opt-accel"}, {"azimuth_deg", 0.0}}})},
          {"grid", {{"start_deg", -89.5}, {"stop_deg", 89.5}, {"step_deg", 0.5}}},
          {"elevation_deg", 0.0},
          {"quantize", false}};
}

void cmd_pattern(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  const auto geom = parse_array(o.at("array"));
  const auto cfg = parse_optimizer(o.at("optimizer"), ctx.seed);
  const auto users = parse_users(o.at("users"), "users");
  const double cut_el = deg2rad(o.get<double>("elevation_deg"));
  const bool quant = o.get<bool>("quantize");
  Obj g(o.at("grid"), "grid");
  const double a0 = g.get<double>("start_deg"), a1 = g.get<double>("stop_deg"), step = g.get<double>("step_deg");
  g.done();
  if (!(step > 0.0) || a1 < a0) throw std::invalid_argument("grid: bad range");

  std::vector<Beamformer> beams;
  std::vector<std::string> names;
  const auto& list = o.at("beams");
  if (!list.is_array() || list.empty()) throw std::invalid_argument("beams: expected a non-empty list");
  for (std::size_t i = 0; i < list.size(); ++i) {
    Obj b(list[i], "beams[" + std::to_string(i) + "]");
    const auto kind = b.get<std::string>("kind");
    const double az = deg2rad(b.get<double>("azimuth_deg"));
    Direction dir = sensing_direction(geom, az);
    if (b.has("elevation_deg") && geom.layout() == Layout::Planar) dir.elevation = deg2rad(b.get<double>("elevation_deg"));
    b.done();
    Beamformer w;
    if (kind == "conjugate") w = conjugate_beam(geom, dir);
    else if (kind == "opt-accel") w = solve_opt_accel(users, SensingTarget{dir, 1.0}, geom, cfg).weights;
    else if (kind == "opt-base") w = solve_opt_base(users, SensingTarget{dir, 1.0}, geom, cfg).weights;
    else throw std::invalid_argument("beams[" + std::to_string(i) + "].kind: expected conjugate, opt-accel or opt-base");
    if (quant) w = quantize(w);
    beams.push_back(w);
    names.push_back(kind + "_" + fmt("%g", rad2deg(az)));
  }
  o.done();

  auto out = run.open("pattern.csv");
  out << "azimuth_deg";
  for (const auto& n : names) out << ',' << n << "_db";
  out << '\n';
  const auto n = static_cast<std::size_t>(std::floor((a1 - a0) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    const double a = a0 + step * static_cast<double>(i);
    Direction d{deg2rad(a), geom.layout() == Layout::Planar ? std::optional<double>(cut_el) : std::nullopt};
    out << fmt("%.4f", a);
    for (const auto& w : beams) {
      const double gain = beamforming_gain(w, geom, d);
      out << ',' << (gain > 0.0 ? fmt("%.6f", lin2db(gain)) : std::string("-400"));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// tradeoff

json tradeoff_defaults() {
  return {{"seed", 1},
          {"array", default_array(16)},
          {"optimizer", default_optimizer()},
          {"users", users_default()},
          {"sensing_deg", 0.0},
          {"epsilons", {{"start", 0.0}, {"stop", 1.5}, {"step", 0.25}}}};
}

void cmd_tradeoff(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  const auto geom = parse_array(o.at("array"));
  const auto cfg = parse_optimizer(o.at("optimizer"), ctx.seed);
  const auto users = parse_users(o.at("users"), "users");
  const auto dir = sensing_direction(geom, deg2rad(o.get<double>("sensing_deg")));
  Obj e(o.at("epsilons"), "epsilons");
  const double e0 = e.get<double>("start"), e1 = e.get<double>("stop"), es = e.get<double>("step");
  e.done();
  o.done();
  if (!(es > 0.0) || e1 < e0) throw std::invalid_argument("epsilons: bad range");
  std::vector<double> eps;
  const auto n = static_cast<std::size_t>(std::floor((e1 - e0) / es + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) eps.push_back(e0 + es * static_cast<double>(i));

  const auto pts = tradeoff_sweep(users, dir, geom, eps, cfg);
  auto out = run.open("tradeoff.csv");
  out << "epsilon,sensing_gain_db,gamma_min_db,status";
  for (std::size_t u = 0; u < users.size(); ++u) out << ",user" << u << "_gain_db";
  out << '\n';
  for (const auto& p : pts) {
    out << fmt("%.4f", p.epsilon) << ',' << db_str(p.sensing_gain) << ',' << db_str(p.gamma_min) << ','
        << to_string(p.status);
    for (double g : p.user_gains) out << ',' << db_str(g);
    out << '\n';
  }
  json s;
  const auto x = tradeoff_crossover(pts);
  s["crossover_epsilon"] = x ? json(*x) : json();
  run.write_json("summary.json", s);
}

// ---------------------------------------------------------------------------
// simulate

json simulate_defaults() {
  return {{"seed", 1},
          {"numerology", default_numerology()},
          {"array", default_array(16)},
          {"optimizer", default_optimizer()},
          {"search", default_search()},
          {"scene", nullptr},
          {"scene_file", nullptr},
          {"sweep", sweep_default(-17.0, 16.0, 34)},
          {"modulation", "64qam"},
          {"slots", 2},
          {"predistort", true},
          {"write_iq", true},
          {"baselines", false}};
}

void cmd_simulate(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  const auto num = parse_numerology(o.at("numerology"));
  const auto geom = parse_array(o.at("array"));
  const auto cfg = parse_optimizer(o.at("optimizer"), ctx.seed);
  const auto search = parse_search(o.at("search"));
  const Scene scene = parse_scene(o, num.sample_rate);
  const auto az = parse_angle_list(o.at("sweep"), "sweep");
  const auto mod = parse_modulation(o.get<std::string>("modulation"));
  const auto slots = o.get<std::size_t>("slots");
  const bool predistort = o.get<bool>("predistort");
  const bool dump_iq = o.get<bool>("write_iq");
  const bool baselines = o.get<bool>("baselines");
  o.done();
  if (slots == 0) throw std::invalid_argument("slots: must be >= 1");

  const auto users = user_links(scene);
  const auto dirs = directions_for(geom, az, std::nullopt);
  IsacSetup setup;
  setup.numerology = num;
  setup.geometry = geom;
  setup.modulation = mod;
  setup.search = search;
  setup.predistort = predistort;
  setup.data_beam = data_beam_for(users, geom, cfg);
  std::vector<Beamformer> set;
  if (users.empty()) {
    for (const auto& d : dirs) set.push_back(conjugate_beam(geom, d));
  } else {
    for (const auto& e : build_codebook(users, dirs, 1.0, geom, cfg).entries) set.push_back(e.weights);
  }
  setup.sensing_beams = {set};
  const auto rx_gain = broadside_rx_gain();

  run.write_json("scene.json", scene_to_json(scene));
  auto ucsv = run.open("users.csv");
  ucsv << "slot,user,angle_deg,evm_percent,evm_genie_percent,ber,ber_genie\n";
  auto scsv = run.open("sensing.csv");
  write_sensing_csv_header(scsv);
  std::vector<double> evm(users.size(), 0.0), evm_g(users.size(), 0.0);
  OpCount ops;
  for (std::size_t s = 0; s < slots; ++s) {
    const auto res = simulate_isac_slot(setup, scene, rx_gain, ctx.seed * 7919ULL + s, true);
    ops.complex_macs += res.ops.complex_macs;
    if (s == 0 && dump_iq) {
      auto out = run.open("tx_slot0.iq", true);
      write_iq(out, iq_header_for(num, res.tx.samples.size()), res.tx.samples);
    }
    for (std::size_t u = 0; u < users.size(); ++u) {
      const auto& r = res.users[u];
      ucsv << s << ',' << u << ',' << fmt("%.4f", rad2deg(users[u].angle)) << ','
           << fmt("%.6f", r.estimated.evm_percent) << ',' << fmt("%.6f", r.genie.evm_percent) << ','
           << fmt("%.8f", r.estimated.ber) << ',' << fmt("%.8f", r.genie.ber) << '\n';
      evm[u] += r.estimated.evm_percent / static_cast<double>(slots);
      evm_g[u] += r.genie.evm_percent / static_cast<double>(slots);
    }
    const auto dmrs = num.dmrs_indices();
    for (std::size_t d = 0; d < res.sensing.size(); ++d)
      for (std::size_t m = 0; m < res.sensing[d].size(); ++m) {
        SensingRow row;
        row.slot = s;
        row.symbol = dmrs[d];
        row.beam = m;
        row.azimuth_deg = rad2deg(dirs[m].azimuth);
        row.delay_star = res.sensing[d][m].delay_star;
        row.features = extract_features(res.sensing[d][m]);
        const double g = beamforming_gain(set[m], geom, dirs[m]) *
                         rx_gain(Direction{dirs[m].azimuth, 0.0});
        if (g > 0.0) row.normalized_power = row.features.received_power / g;
        write_sensing_csv_row(scsv, row);
      }
  }
  json summary;
  summary["beams_per_dmrs_symbol"] = set.size();
  summary["sub_symbol_samples"] = SubSymbolSchedule(num, set.size()).sub_len();
  summary["sensing_complex_macs"] = ops.complex_macs;
  summary["users"] = json::array();
  for (std::size_t u = 0; u < users.size(); ++u)
    summary["users"].push_back({{"angle_deg", rad2deg(users[u].angle)},
                                {"mean_evm_percent", evm[u]},
                                {"mean_evm_genie_percent", evm_g[u]}});

  if (baselines) {
    if (geom.layout() != Layout::Ula) throw std::invalid_argument("baselines: require a linear array");
    BaselineConfig bc;
    bc.numerology = num;
    bc.array_size = geom.num_elements();
    bc.num_beams = set.size();
    bc.modulation = mod;
    bc.optimizer = cfg;
    bc.search = search;
    bc.slots = slots;
    auto bcsv = run.open("baselines.csv");
    bcsv << "mode,user,evm_percent,ber,beams_per_dmrs_symbol,sensing_delay\n";
    auto pcsv = run.open("sensing_profiles.csv");
    pcsv << "mode,freq_cycles_per_sample,amplitude_db\n";
    for (auto mode : {BaselineMode::Subf, BaselineMode::FixedBeam, BaselineMode::Subbeam}) {
      const auto r = run_baseline(mode, scene, bc, ctx.seed);
      for (std::size_t u = 0; u < r.user_evm_percent.size(); ++u)
        bcsv << to_string(mode) << ',' << u << ',' << fmt("%.6f", r.user_evm_percent[u]) << ','
             << fmt("%.8f", r.user_ber[u]) << ',' << r.beams_per_dmrs_symbol << ','
             << fmt("%.4f", r.sensing_delay) << '\n';
      for (std::size_t k = 0; k < r.sensing_freq.size(); ++k)
        pcsv << to_string(mode) << ',' << fmt("%.6f", r.sensing_freq[k]) << ','
             << fmt("%.6f", r.sensing_amp_db[k]) << '\n';
    }
  }
  run.write_json("summary.json", summary);
}

// ---------------------------------------------------------------------------
// image

json image_defaults() {
  return {{"seed", 1},
          {"numerology", default_numerology()},
          {"optimizer", default_optimizer()},
          {"search", default_search()},
          {"scene", nullptr},
          {"scene_file", nullptr},
          {"grid", {{"half_span_deg", 15.0}, {"step_deg", 1.0}}},
          {"tx_rows", 8},
          {"tx_cols", 8},
          {"rx_rows", 4},
          {"rx_cols", 4},
          {"num_beams", 34}};
}

void cmd_image(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  ImagingConfig cfg;
  cfg.numerology = parse_numerology(o.at("numerology"));
  cfg.optimizer = parse_optimizer(o.at("optimizer"), ctx.seed);
  cfg.search = parse_search(o.at("search"));
  const Scene scene = parse_scene(o, cfg.numerology.sample_rate);
  Obj g(o.at("grid"), "grid");
  const auto grid = ImagingGrid::uniform(g.get<double>("half_span_deg"), g.get<double>("step_deg"));
  g.done();
  cfg.tx_rows = o.get<std::size_t>("tx_rows");
  cfg.tx_cols = o.get<std::size_t>("tx_cols");
  cfg.rx_rows = o.get<std::size_t>("rx_rows");
  cfg.rx_cols = o.get<std::size_t>("rx_cols");
  cfg.num_beams = o.get<std::size_t>("num_beams");
  o.done();

  const auto res = run_imaging(scene, grid, cfg, ctx.seed);
  run.write_json("scene.json", scene_to_json(scene));
  {
    auto out = run.open("heatmap.csv");
    write_heatmap_csv(out, res.grid);
  }
  {
    auto out = run.open("heatmap_raw.csv");
    write_heatmap_csv(out, res.grid, true);
  }
  {
    auto out = run.open("heatmap.pgm", true);
    write_heatmap_pgm(out, res.grid);
  }
  const auto peaks = heatmap_peaks(res.grid);
  auto pcsv = run.open("peaks.csv");
  pcsv << "rank,azimuth_deg,elevation_deg,value_db\n";
  for (std::size_t i = 0; i < peaks.size(); ++i)
    pcsv << i << ',' << fmt("%.4f", rad2deg(res.grid.az_angles[peaks[i].az])) << ','
         << fmt("%.4f", rad2deg(res.grid.el_angles[peaks[i].el])) << ',' << fmt("%.6f", peaks[i].value)
         << '\n';
  json s;
  s["pixels"] = res.grid.pixels();
  s["slots_simulated"] = res.slots_simulated;
  s["air_time"] = {{"directions", res.air_time.directions},
                   {"directions_per_slot", res.air_time.per_slot},
                   {"slots", res.air_time.slots},
                   {"dmrs_symbols", res.air_time.dmrs_symbols},
                   {"whole_slot_ms", res.air_time.whole_slot_seconds * 1e3},
                   {"dmrs_counted_ms", res.air_time.dmrs_counted_seconds * 1e3}};
  run.write_json("summary.json", s);
  std::cout << "air time: " << res.air_time.slots << " slots = " << res.air_time.whole_slot_seconds * 1e3
            << " ms (whole slots), " << res.air_time.dmrs_counted_seconds * 1e3 << " ms (DMRS symbols)\n";
}

// ---------------------------------------------------------------------------
// localize

json localize_defaults() {
  LocalizationConfig c;
  LocalizationExperiment e;
  return {{"seed", 1},
          {"numerology", default_numerology()},
          {"search", default_search()},
          {"array_size", c.array_size},
          {"num_beams", c.num_beams},
          {"sweep_half_span_deg", c.sweep_half_span_deg},
          {"noise_power", c.noise_power},
          {"self_interference_inr_db", *c.self_interference_inr_db},
          {"rx_rows", c.rx_rows},
          {"rx_cols", c.rx_cols},
          {"experiment",
           {{"dist_min", e.dist_min},
            {"dist_max", e.dist_max},
            {"dist_step", e.dist_step},
            {"dist_angle_deg", e.dist_angle_deg},
            {"angle_half_span_deg", e.angle_half_span_deg},
            {"angle_step_deg", e.angle_step_deg},
            {"angle_distance", e.angle_distance},
            {"slots_per_position", e.slots_per_position},
            {"train_fraction", e.train_fraction},
            {"ridge", e.ridge}}}};
}

void cmd_localize(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  LocalizationConfig c;
  c.numerology = parse_numerology(o.at("numerology"));
  c.search = parse_search(o.at("search"));
  c.array_size = o.get<std::size_t>("array_size");
  c.num_beams = o.get<std::size_t>("num_beams");
  c.sweep_half_span_deg = o.get<double>("sweep_half_span_deg");
  c.noise_power = o.get<double>("noise_power");
  c.self_interference_inr_db.reset();
  if (o.has("self_interference_inr_db")) c.self_interference_inr_db = o.get<double>("self_interference_inr_db");
  c.rx_rows = o.get<std::size_t>("rx_rows");
  c.rx_cols = o.get<std::size_t>("rx_cols");
  Obj x(o.at("experiment"), "experiment");
  LocalizationExperiment e;
  e.dist_min = x.get<double>("dist_min");
  e.dist_max = x.get<double>("dist_max");
  e.dist_step = x.get<double>("dist_step");
  e.dist_angle_deg = x.get<double>("dist_angle_deg");
  e.angle_half_span_deg = x.get<double>("angle_half_span_deg");
  e.angle_step_deg = x.get<double>("angle_step_deg");
  e.angle_distance = x.get<double>("angle_distance");
  e.slots_per_position = x.get<std::size_t>("slots_per_position");
  e.train_fraction = x.get<double>("train_fraction");
  e.ridge = x.get<double>("ridge");
  x.done();
  o.done();

  const auto rep = run_localization(c, e, ctx.seed);
  {
    auto out = run.open("runs.csv");
    out << "set,train,distance_m,angle_deg,est_distance_m,est_angle_deg\n";
    for (const auto& s : rep.samples)
      out << (s.set == SpSet::Distance ? "distance" : "angle") << ',' << (s.train ? 1 : 0) << ','
          << fmt("%.4f", s.run.distance) << ',' << fmt("%.4f", s.run.angle_deg) << ','
          << fmt("%.6f", s.estimate.distance) << ',' << fmt("%.6f", s.estimate.angle_deg) << '\n';
  }
  {
    static const char* names[kSpFeaturesPerBeam] = {"power_db", "phase_slope", "linearity_loss",
                                                    "delay_estimate"};
    auto out = run.open("weights.csv");
    out << "beam,feature,distance_weight,angle_weight\n";
    char b[96];
    for (std::size_t j = 0; j < rep.weights.num_features; ++j) {
      std::snprintf(b, sizeof b, "%.17g,%.17g", rep.weights.distance[j], rep.weights.angle[j]);
      out << j / kSpFeaturesPerBeam << ',' << names[j % kSpFeaturesPerBeam] << ',' << b << '\n';
    }
    std::snprintf(b, sizeof b, "%.17g,%.17g", rep.weights.distance.back(), rep.weights.angle.back());
    out << "-,bias," << b << '\n';
  }
  json s;
  s["train_runs"] = rep.train_runs;
  s["test_runs"] = rep.test_runs;
  s["median_distance_error_m"] = rep.median_distance_error;
  s["median_angle_error_deg"] = rep.median_angle_error;
  run.write_json("summary.json", s);
  std::cout << "median distance error " << rep.median_distance_error << " m, median angle error "
            << rep.median_angle_error << " deg (" << rep.test_runs << " test runs)\n";
}

// ---------------------------------------------------------------------------
// mobility

json mobility_defaults() {
  const MobilityScenario sc;
  json users = json::array();
  for (auto [a, b] : {std::pair{-30.0, 30.0}, {-10.0, -10.0}, {10.0, 10.0}, {30.0, 30.0}})
    users.push_back({{"start_deg", a}, {"end_deg", b}, {"base_snr_db", 0.0}});
  return {{"seed", 1},
          {"optimizer", default_optimizer()},
          {"array_size", sc.array_size},
          {"tick_interval", sc.tick_interval},
          {"duration", sc.duration},
          {"sweep_deg", json::array({0.0})},
          {"focus_entry", sc.focus_entry},
          {"validation_ticks", sc.validation_ticks},
          {"users", users}};
}

void cmd_mobility(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  MobilityScenario sc;
  sc.optimizer = parse_optimizer(o.at("optimizer"), ctx.seed);
  sc.array_size = o.get<std::size_t>("array_size");
  sc.tick_interval = o.get<double>("tick_interval");
  sc.duration = o.get<double>("duration");
  sc.sweep.clear();
  for (double a : o.get<std::vector<double>>("sweep_deg")) sc.sweep.push_back(deg2rad(a));
  sc.focus_entry = o.get<std::size_t>("focus_entry");
  sc.validation_ticks = o.get<std::size_t>("validation_ticks");
  const auto& ul = o.at("users");
  if (!ul.is_array()) throw std::invalid_argument("users: expected a list");
  for (std::size_t i = 0; i < ul.size(); ++i) {
    Obj u(ul[i], "users[" + std::to_string(i) + "]");
    Trajectory t;
    t.start = deg2rad(u.get<double>("start_deg"));
    t.end = deg2rad(u.get<double>("end_deg"));
    t.base_snr = db2lin(u.get_or<double>("base_snr_db", 0.0));
    u.done();
    sc.users.push_back(t);
  }
  o.done();

  const auto res = run_mobility(sc, ctx.seed);
  {
    auto out = run.open("timeseries.csv");
    write_mobility_csv(out, res);
  }
  {
    auto out = run.open("checks.csv");
    out << "tick,entry,reused,decision_matches,fresh_gap_db\n";
    for (const auto& c : res.checks)
      out << c.tick << ',' << c.entry << ',' << (c.reused ? 1 : 0) << ',' << (c.decision_matches ? 1 : 0) << ','
          << fmt("%.6f", c.fresh_gap_db) << '\n';
  }
  std::size_t matches = 0;
  for (const auto& c : res.checks) matches += c.decision_matches ? 1 : 0;
  json s;
  s["ticks"] = res.ticks.size();
  s["reoptimized_ticks"] = res.reopt_ticks;
  s["reoptimized_fraction"] = res.reopt_fraction();
  s["reoptimized_entries"] = res.reopt_entries;
  s["sensing_gain_min_db"] = res.sensing_min_db;
  s["sensing_gain_max_db"] = res.sensing_max_db;
  s["checks"] = res.checks.size();
  s["checks_matching"] = matches;
  run.write_json("summary.json", s);
  if (run.timing()) {
    auto v = res.solve_seconds;
    json t;
    t["solves"] = v.size();
    double total = 0.0;
    for (double x : v) total += x;
    t["total_seconds"] = total;
    t["median_seconds"] = v.empty() ? 0.0 : median_value(v);
    t["occupancy"] = total / sc.duration;
    run.write_json("timing.json", t);
  }
  std::cout << "re-optimized on " << res.reopt_ticks << " of " << res.ticks.size() << " ticks ("
            << fmt("%.1f", 100.0 * res.reopt_fraction()) << "%), sensing gain "
            << fmt("%.2f", res.sensing_min_db) << ".." << fmt("%.2f", res.sensing_max_db) << " dB\n";
}

// ---------------------------------------------------------------------------
// bench

json bench_defaults() {
  return {{"seed", 1},
          {"sub_lens", json::array({16, 30, 64})},
          {"candidates", json::array({4, 8, 10, 16})},
          {"trials", 200}};
}

void cmd_bench(const Context& ctx, RunDir& run) {
  Obj o(ctx.config, "config");
  o.get<std::uint64_t>("seed");
  const auto lens = o.get<std::vector<std::size_t>>("sub_lens");
  const auto cands = o.get<std::vector<std::size_t>>("candidates");
  const auto trials = o.get<std::size_t>("trials");
  o.done();
  if (trials == 0) throw std::invalid_argument("trials: must be >= 1");

  auto out = run.open("bench.csv");
  out << "sub_len,candidates,accelerated_macs,recompute_macs,ratio,measured_accelerated,measured_recompute\n";
  std::ofstream timing;
  if (run.timing()) {
    timing = run.open("timing.csv");
    timing << "sub_len,candidates,accelerated_us,recompute_us\n";
  }
  std::mt19937_64 rng(ctx.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t len : lens) {
    for (std::size_t nc : cands) {
      Numerology num;
      num.fft_size = len;
      num.occupied = len;
      const SubSymbolSchedule sched(num, 1);
      CVec tx(len), rx(len + nc + 1);
      for (auto& v : tx) v = {gauss(rng), gauss(rng)};
      for (std::size_t i = 0; i < rx.size(); ++i) rx[i] = tx[(i + len - 3) % len];
      const SensingSymbol sym{rx, tx, 1.0};
      const auto cost = delay_sweep_cost(len, nc);
      OpCount acc, rec;
      DelaySearchConfig ca{nc, true}, cr{nc, false};
      solve_opt_delay(sym, sched, 0, ca, nullptr, &acc);
      solve_opt_delay(sym, sched, 0, cr, nullptr, &rec);
      out << len << ',' << nc << ',' << cost.accelerated << ',' << cost.recompute << ','
          << fmt("%.4f", static_cast<double>(cost.accelerated) / static_cast<double>(cost.recompute)) << ','
          << acc.complex_macs << ',' << rec.complex_macs << '\n';
      if (run.timing()) {
        auto time_it = [&](const DelaySearchConfig& c) {
          const auto t0 = std::chrono::steady_clock::now();
          for (std::size_t t = 0; t < trials; ++t) solve_opt_delay(sym, sched, 0, c);
          const auto t1 = std::chrono::steady_clock::now();
          return std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(trials);
        };
        timing << len << ',' << nc << ',' << fmt("%.3f", time_it(ca)) << ',' << fmt("%.3f", time_it(cr)) << '\n';
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subbeam: sub-symbol beam switching ISAC simulator"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool timing = false;

  struct Cmd {
    const char* name;
    const char* help;
    json (*defaults)();
    void (*run)(const Context&, RunDir&);
  };
  const std::vector<Cmd> cmds{
      {"codebook", "build (and optionally update) a codebook; prints the gains table", codebook_defaults, cmd_codebook},
      {"pattern", "beam patterns over an azimuth grid", pattern_defaults, cmd_pattern},
      {"tradeoff", "sensing gain vs bottleneck SNR over epsilon", tradeoff_defaults, cmd_tradeoff},
      {"simulate", "one scene end to end: EVM and sensing CSV", simulate_defaults, cmd_simulate},
      {"image", "2D imaging heatmap (CSV and PGM)", image_defaults, cmd_image},
      {"localize", "calibrate and evaluate feature-based localization", localize_defaults, cmd_localize},
      {"mobility", "online codebook updates under user motion", mobility_defaults, cmd_mobility},
      {"bench", "delay-sweep multiply-add counts (and latency with --timing)", bench_defaults, cmd_bench},
  };
  bool print_defaults = false;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", config_path, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("-s,--seed", seed, "override the config seed");
    sub->add_option("-o,--out", out_dir, "run directory (default runs/<command>)");
    sub->add_flag("--timing", timing, "also write wall-clock measurements");
    sub->add_flag("--print-defaults", print_defaults, "print the default config and exit");
  }
  CLI11_PARSE(app, argc, argv);

  for (const auto& c : cmds) {
    if (!app.got_subcommand(c.name)) continue;
    try {
      if (print_defaults) {
        std::cout << c.defaults().dump(2) << '\n';
        return 0;
      }
      const Context ctx = resolve(c.defaults(), config_path, seed);
      RunDir run(out_dir.empty() ? fs::path("runs") / c.name : fs::path(out_dir), timing);
      c.run(ctx, run);
      run.finish(c.name, ctx.seed, ctx.config);
      std::cout << "outputs in " << run.root().string() << '\n';
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 0;
}
