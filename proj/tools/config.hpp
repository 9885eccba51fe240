#pragma once

// Run configuration: a default document per subcommand, overlaid by the
// user's JSON file. Unknown keys are rejected so typos do not pass silently.

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "subbeam/subbeam.hpp"

namespace subbeam::cli {

using nlohmann::json;

/// Keys whose values are taken verbatim (validated by their own parsers).
inline const std::set<std::string>& opaque_keys() {
  static const std::set<std::string> keys{"scene"};
  return keys;
}

inline json overlay(const json& defaults, const json& user, const std::string& where) {
  if (!user.is_object()) throw std::invalid_argument(where + ": expected an object");
  json out = defaults;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!defaults.contains(it.key())) throw std::invalid_argument("unknown config key '" + path + "'");
    const json& d = defaults.at(it.key());
    if (d.is_object() && !opaque_keys().count(it.key()) && it.value().is_object())
      out[it.key()] = overlay(d, it.value(), path);
    else
      out[it.key()] = it.value();
  }
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

/// Strict view of one object: every key read must exist, and reading all
/// expected keys is checked by `done`.
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument(where_ + ": expected an object");
  }

  template <class T>
  T get(const std::string& key) const {
    seen_.insert(key);
    if (!j_.contains(key)) throw std::invalid_argument(where_ + ": missing '" + key + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  T get_or(const std::string& key, T fallback) const {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
    return get<T>(key);
  }

  bool has(const std::string& key) const {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) const {
    seen_.insert(key);
    if (!j_.contains(key)) throw std::invalid_argument(where_ + ": missing '" + key + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw std::invalid_argument("unknown config key '" + where_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  mutable std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Shared sections

inline json default_optimizer() {
  OptimizerConfig c;
  return {{"epsilon", c.epsilon},
          {"alpha", c.alpha_tradeoff},
          {"grad_tol", c.grad_tol},
          {"max_iters", c.max_iters},
          {"snr_match_tol", c.snr_match_tol},
          {"fov_deg", 60.0},
          {"random_starts", c.random_starts},
          {"temperature_start", c.temperature_start},
          {"temperature_end", c.temperature_end},
          {"temperature_stages", c.temperature_stages}};
}

inline OptimizerConfig parse_optimizer(const json& j, std::uint64_t seed) {
  Obj o(j, "optimizer");
  OptimizerConfig c;
  c.epsilon = o.get<double>("epsilon");
  c.alpha_tradeoff = o.get<double>("alpha");
  c.grad_tol = o.get<double>("grad_tol");
  c.max_iters = o.get<int>("max_iters");
  c.snr_match_tol = o.get<double>("snr_match_tol");
  c.fov = deg2rad(o.get<double>("fov_deg"));
  c.random_starts = o.get<int>("random_starts");
  c.temperature_start = o.get<double>("temperature_start");
  c.temperature_end = o.get<double>("temperature_end");
  c.temperature_stages = o.get<int>("temperature_stages");
  c.seed = seed;
  o.done();
  c.validate();
  return c;
}

inline json default_numerology() {
  Numerology n;
  return {{"fft_size", n.fft_size},
          {"occupied", n.occupied},
          {"cp_length", n.cp_length},
          {"sample_rate", n.sample_rate},
          {"symbols_per_slot", n.symbols_per_slot},
          {"dmrs_symbols", std::vector<std::size_t>(n.dmrs_symbols.begin(), n.dmrs_symbols.end())},
          {"slot_duration", n.slot_duration}};
}

inline Numerology parse_numerology(const json& j) {
  Obj o(j, "numerology");
  Numerology n;
  n.fft_size = o.get<std::size_t>("fft_size");
  n.occupied = o.get<std::size_t>("occupied");
  n.cp_length = o.get<std::size_t>("cp_length");
  n.sample_rate = o.get<double>("sample_rate");
  n.symbols_per_slot = o.get<std::size_t>("symbols_per_slot");
  const auto dmrs = o.get<std::vector<std::size_t>>("dmrs_symbols");
  n.dmrs_symbols = std::set<std::size_t>(dmrs.begin(), dmrs.end());
  n.slot_duration = o.get<double>("slot_duration");
  o.done();
  n.validate();
  return n;
}

inline json default_search() {
  DelaySearchConfig s;
  return {{"num_candidates", s.num_candidates}, {"accelerated", s.accelerated}};
}

inline DelaySearchConfig parse_search(const json& j) {
  Obj o(j, "search");
  DelaySearchConfig s;
  s.num_candidates = o.get<std::size_t>("num_candidates");
  s.accelerated = o.get<bool>("accelerated");
  o.done();
  s.validate();
  return s;
}

inline json default_array(std::size_t elements = 16) {
  return {{"layout", "ula"}, {"elements", elements}, {"rows", 4}, {"cols", 8}, {"spacing", 0.5}};
}

inline ArrayGeometry parse_array(const json& j) {
  Obj o(j, "array");
  const auto layout = o.get<std::string>("layout");
  const auto spacing = o.get<double>("spacing");
  const auto elements = o.get<std::size_t>("elements");
  const auto rows = o.get<std::size_t>("rows");
  const auto cols = o.get<std::size_t>("cols");
  o.done();
  if (layout == "ula") return ArrayGeometry::ula(elements, spacing);
  if (layout == "planar") return ArrayGeometry::planar(rows, cols, spacing);
  throw std::invalid_argument("array.layout: expected 'ula' or 'planar', got '" + layout + "'");
}

inline std::vector<UserLink> parse_users(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::invalid_argument(where + ": expected a list");
  std::vector<UserLink> users;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Obj o(j[i], where + "[" + std::to_string(i) + "]");
    UserLink u;
    u.angle = deg2rad(o.get<double>("angle_deg"));
    u.base_snr = db2lin(o.get_or<double>("base_snr_db", 0.0));
    o.done();
    users.push_back(u);
  }
  return users;
}

/// {"start_deg", "stop_deg", "count"} evenly spaced, or {"angles_deg": [...]}.
inline std::vector<double> parse_angle_list(const json& j, const std::string& where) {
  Obj o(j, where);
  std::vector<double> out;
  if (o.has("angles_deg")) {
    for (double a : o.get<std::vector<double>>("angles_deg")) out.push_back(deg2rad(a));
    o.get_or<double>("start_deg", 0.0);
    o.get_or<double>("stop_deg", 0.0);
    o.get_or<std::size_t>("count", 0);
  } else {
    const auto a = o.get<double>("start_deg");
    const auto b = o.get<double>("stop_deg");
    const auto n = o.get<std::size_t>("count");
    if (n == 0) throw std::invalid_argument(where + ".count: must be >= 1");
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(deg2rad(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)));
  }
  o.done();
  if (out.empty()) throw std::invalid_argument(where + ": no angles");
  return out;
}

inline Scene parse_scene(const Obj& o, double sample_rate) {
  const bool inline_scene = o.has("scene");
  const bool file_scene = o.has("scene_file");
  if (inline_scene == file_scene)
    throw std::invalid_argument("give exactly one of 'scene' or 'scene_file'");
  if (file_scene) return load_scene(o.get<std::string>("scene_file"), sample_rate);
  return scene_from_json(o.at("scene"), sample_rate);
}

}  // namespace subbeam::cli
