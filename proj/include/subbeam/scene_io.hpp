#pragma once

// Scene files (JSON):
//
//   {
//     "noise_power": 1e-6,
//     "self_interference_inr_db": 20,          // or null to disable
//     "users": [{"angle_deg": -30, "base_snr_db": 0,
//                "attenuation_db": 0, "phase_deg": 0, "delay_samples": 3}],
//     "reflectors": [{"label": "laptop", "azimuth_deg": 5, "elevation_deg": 0,
//                     "attenuation_db": -6, "phase_deg": 0, "distance_m": 3.0}]
//   }
//
// Each path gives either delay_samples or distance_m. Distances are converted
// at the numerology sample rate (round trip for reflectors).

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "subbeam/channel.hpp"

namespace subbeam {

namespace detail {

inline PathModel path_from_json(const nlohmann::json& j, double sample_rate, bool round_trip,
                                const std::string& where) {
  PathModel p;
  p.attenuation = db2lin(j.value("attenuation_db", 0.0) / 2.0);
  p.phase_shift = deg2rad(j.value("phase_deg", 0.0));
  const bool has_delay = j.contains("delay_samples");
  const bool has_dist = j.contains("distance_m");
  if (has_delay == has_dist)
    throw std::invalid_argument(where + ": give exactly one of delay_samples or distance_m");
  if (has_delay) {
    const long d = j.at("delay_samples").get<long>();
    if (d < 0) throw std::invalid_argument(where + ": delay_samples must be >= 0");
    p.delay_samples = static_cast<std::size_t>(d);
  } else {
    const double m = j.at("distance_m").get<double>();
    p.delay_samples = round_trip ? round_trip_delay(m, sample_rate)
                                 : delay_for_distance(m, sample_rate);
  }
  p.validate();
  return p;
}

}  // namespace detail

inline Scene scene_from_json(const nlohmann::json& j, double sample_rate) {
  Scene s;
  s.noise_power = j.value("noise_power", s.noise_power);
  if (j.contains("self_interference_inr_db")) {
    const auto& v = j.at("self_interference_inr_db");
    if (v.is_null()) s.self_interference_inr_db.reset();
    else s.self_interference_inr_db = v.get<double>();
  }
  if (j.contains("users")) {
    std::size_t i = 0;
    for (const auto& u : j.at("users")) {
      SceneUser su;
      su.link.angle = deg2rad(u.at("angle_deg").get<double>());
      su.link.base_snr = db2lin(u.value("base_snr_db", 0.0));
      su.path = detail::path_from_json(u, sample_rate, false, "user " + std::to_string(i++));
      s.users.push_back(su);
    }
  }
  if (j.contains("reflectors")) {
    std::size_t i = 0;
    for (const auto& r : j.at("reflectors")) {
      Reflector rf;
      rf.label = r.value("label", std::string{});
      rf.azimuth = deg2rad(r.at("azimuth_deg").get<double>());
      rf.elevation = deg2rad(r.value("elevation_deg", 0.0));
      rf.path = detail::path_from_json(r, sample_rate, true, "reflector " + std::to_string(i++));
      s.reflectors.push_back(rf);
    }
  }
  s.validate();
  return s;
}

/// Canonical form: delays in samples, angles in degrees.
inline nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json j;
  j["noise_power"] = s.noise_power;
  j["self_interference_inr_db"] =
      s.self_interference_inr_db ? nlohmann::json(*s.self_interference_inr_db) : nlohmann::json();
  auto path = [](nlohmann::json& o, const PathModel& p) {
    o["attenuation_db"] = 2.0 * lin2db(p.attenuation);
    o["phase_deg"] = rad2deg(p.phase_shift);
    o["delay_samples"] = p.delay_samples;
  };
  j["users"] = nlohmann::json::array();
  for (const auto& u : s.users) {
    nlohmann::json o;
    o["angle_deg"] = rad2deg(u.link.angle);
    o["base_snr_db"] = lin2db(u.link.base_snr);
    path(o, u.path);
    j["users"].push_back(o);
  }
  j["reflectors"] = nlohmann::json::array();
  for (const auto& r : s.reflectors) {
    nlohmann::json o;
    o["label"] = r.label;
    o["azimuth_deg"] = rad2deg(r.azimuth);
    o["elevation_deg"] = rad2deg(r.elevation);
    path(o, r.path);
    j["reflectors"].push_back(o);
  }
  return j;
}

inline Scene load_scene(const std::string& path, double sample_rate) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return scene_from_json(j, sample_rate);
}

}  // namespace subbeam
