#pragma once

// Single-reflector localization from per-beam sensing features. A linear
// model (one weight per feature per beam, plus a bias) maps the stacked
// features of one slot to distance and azimuth; weights are calibrated by
// least squares on simulated runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subbeam/apps/isac.hpp"

namespace subbeam {

inline constexpr std::size_t kSpFeaturesPerBeam = 4;

struct LocalizationConfig {
  Numerology numerology;
  std::size_t array_size = 16;
  std::size_t num_beams = 34;
  double sweep_half_span_deg = 30.0;
  double noise_power = 1e-4;
  std::optional<double> self_interference_inr_db = 20.0;
  std::size_t rx_rows = 4;
  std::size_t rx_cols = 4;
  DelaySearchConfig search;
};

/// Conjugate beams evenly spaced over +-sweep_half_span_deg.
inline std::vector<Beamformer> localization_beams(const LocalizationConfig& cfg) {
  if (cfg.num_beams == 0) throw std::invalid_argument("localization_beams: num_beams must be >= 1");
  const auto geom = ArrayGeometry::ula(cfg.array_size);
  std::vector<Beamformer> beams;
  const double span = cfg.sweep_half_span_deg;
  for (std::size_t m = 0; m < cfg.num_beams; ++m) {
    const double t = cfg.num_beams == 1 ? 0.5 : static_cast<double>(m) / (cfg.num_beams - 1);
    beams.push_back(conjugate_beam(geom, sensing_direction(geom, deg2rad(-span + 2.0 * span * t))));
  }
  return beams;
}

/// One reflector at `distance_m` and azimuth `angle_deg`, path amplitude 1/d^2.
inline Scene reflector_scene(double distance_m, double angle_deg, const LocalizationConfig& cfg) {
  if (!(distance_m >= 1.0)) throw std::invalid_argument("reflector_scene: distance must be >= 1 m");
  Scene s;
  s.noise_power = cfg.noise_power;
  s.self_interference_inr_db = cfg.self_interference_inr_db;
  Reflector r;
  r.azimuth = deg2rad(angle_deg);
  r.path.attenuation = 1.0 / (distance_m * distance_m);
  r.path.delay_samples = round_trip_delay(distance_m, cfg.numerology.sample_rate);
  s.reflectors.push_back(r);
  return s;
}

/// Per-beam [power dB, phase slope, linearity loss, delay estimate], each
/// averaged over the DMRS symbols of one slot; beam-major.
inline std::vector<double> sp_features(const Scene& scene, std::span<const Beamformer> beams,
                                       const LocalizationConfig& cfg, std::uint64_t seed) {
  IsacSetup setup;
  setup.numerology = cfg.numerology;
  setup.geometry = ArrayGeometry::ula(cfg.array_size);
  setup.sensing_beams.assign(1, std::vector<Beamformer>(beams.begin(), beams.end()));
  setup.data_beam = data_beam_for({}, setup.geometry);
  setup.predistort = false;
  setup.search = cfg.search;
  const auto res =
      simulate_isac_slot(setup, scene, broadside_rx_gain(cfg.rx_rows, cfg.rx_cols), seed, true);
  std::vector<double> f(beams.size() * kSpFeaturesPerBeam, 0.0);
  const double n = static_cast<double>(res.sensing.size());
  for (const auto& sym : res.sensing)
    for (std::size_t m = 0; m < sym.size(); ++m) {
      const auto feat = extract_features(sym[m]);
      double* row = &f[m * kSpFeaturesPerBeam];
      row[0] += lin2db(std::max(feat.weighted_power, 1e-30)) / n;
      row[1] += feat.phase_slope / n;
      row[2] += feat.linearity_loss / n;
      row[3] += feat.delay_estimate / n;
    }
  return f;
}

struct SpRun {
  std::vector<double> features;
  double distance = 0.0;   ///< meters
  double angle_deg = 0.0;
};

struct SpWeights {
  std::size_t num_features = 0;
  /// num_features weights followed by the bias.
  std::vector<double> distance;
  std::vector<double> angle;
  bool calibrated = false;
};

struct SpEstimate {
  double distance = 0.0;
  double angle_deg = 0.0;
};

/// Least-squares weights on standardized features with an unpenalized bias.
/// ridge > 0 adds ridge * runs to the Gram diagonal; ridge == 0 solves the
/// plain problem and rejects a numerically rank-deficient design.
inline SpWeights calibrate_sp(std::span<const SpRun> runs, double ridge = 1e-4) {
  if (runs.size() < 2) throw std::invalid_argument("calibrate_sp: need at least 2 runs");
  if (!(ridge >= 0.0)) throw std::invalid_argument("calibrate_sp: ridge must be >= 0");
  const std::size_t nf = runs.front().features.size();
  if (nf == 0) throw std::invalid_argument("calibrate_sp: empty feature vector");
  std::set<std::pair<double, double>> truths;
  for (const auto& r : runs) {
    if (r.features.size() != nf) throw std::invalid_argument("calibrate_sp: feature length differs between runs");
    truths.emplace(r.distance, r.angle_deg);
  }
  if (truths.size() < 2) throw std::invalid_argument("calibrate_sp: need at least 2 distinct truth values");

  const auto n = static_cast<Eigen::Index>(runs.size());
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(nf));
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < nf; ++j) z(i, static_cast<Eigen::Index>(j)) = runs[i].features[j];
    y(i, 0) = runs[i].distance;
    y(i, 1) = runs[i].angle_deg;
  }
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  Eigen::RowVectorXd sd = (z.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd(j) > 1e-12 * (1.0 + std::abs(mean(j)))))
      throw std::invalid_argument("calibrate_sp: rank-deficient design (feature " + std::to_string(j) +
                                  " is constant)");
  z.array().rowwise() /= sd.array();
  const Eigen::RowVectorXd ymean = y.colwise().mean();
  y.rowwise() -= ymean;

  Eigen::MatrixXd beta;
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    qr.setThreshold(1e-10);
    if (qr.rank() < z.cols())
      throw std::invalid_argument("calibrate_sp: rank-deficient design (rank " + std::to_string(qr.rank()) +
                                  " of " + std::to_string(z.cols()) + ")");
    beta = qr.solve(y);
  } else {
    Eigen::MatrixXd gram = z.transpose() * z;
    gram.diagonal().array() += ridge * static_cast<double>(n);
    beta = gram.ldlt().solve(z.transpose() * y);
  }

  SpWeights w;
  w.num_features = nf;
  w.distance.assign(nf + 1, 0.0);
  w.angle.assign(nf + 1, 0.0);
  w.distance[nf] = ymean(0);
  w.angle[nf] = ymean(1);
  for (std::size_t j = 0; j < nf; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    w.distance[j] = beta(jj, 0) / sd(jj);
    w.angle[j] = beta(jj, 1) / sd(jj);
    w.distance[nf] -= w.distance[j] * mean(jj);
    w.angle[nf] -= w.angle[j] * mean(jj);
  }
  for (std::size_t j = 0; j <= nf; ++j)
    if (!std::isfinite(w.distance[j]) || !std::isfinite(w.angle[j]))
      throw std::invalid_argument("calibrate_sp: non-finite weights");
  w.calibrated = true;
  return w;
}

inline SpEstimate sp_localize(std::span<const double> features, const SpWeights& w) {
  if (!w.calibrated) throw std::invalid_argument("sp_localize: weights are not calibrated");
  if (features.size() != w.num_features)
    throw std::invalid_argument("sp_localize: expected " + std::to_string(w.num_features) +
                                " features, got " + std::to_string(features.size()));
  SpEstimate e;
  e.distance = w.distance.back();
  e.angle_deg = w.angle.back();
  for (std::size_t j = 0; j < features.size(); ++j) {
    e.distance += w.distance[j] * features[j];
    e.angle_deg += w.angle[j] * features[j];
  }
  return e;
}

struct LocalizationExperiment {
  double dist_min = 1.0;
  double dist_max = 8.0;
  double dist_step = 0.1;
  double dist_angle_deg = 0.0;
  double angle_half_span_deg = 15.0;
  double angle_step_deg = 1.0;
  double angle_distance = 3.0;
  std::size_t slots_per_position = 25;
  double train_fraction = 0.5;
  double ridge = 1e-4;
};

enum class SpSet { Distance, Angle };

struct SpSample {
  SpRun run;
  SpSet set = SpSet::Distance;
  bool train = false;
  SpEstimate estimate;
};

struct LocalizationReport {
  SpWeights weights;
  std::vector<SpSample> samples;
  double median_distance_error = 0.0;  ///< test runs of the distance grid
  double median_angle_error = 0.0;     ///< test runs of the angle grid
  std::size_t train_runs = 0;
  std::size_t test_runs = 0;
};

inline std::vector<double> grid_points(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid_points: bad range");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + step * static_cast<double>(i));
  return out;
}

/// Simulates both grids, splits runs at random (seeded) into disjoint
/// calibration and test sets, calibrates and scores the test set.
inline LocalizationReport run_localization(const LocalizationConfig& cfg,
                                           const LocalizationExperiment& exp, std::uint64_t seed) {
  if (exp.slots_per_position == 0)
    throw std::invalid_argument("run_localization: slots_per_position must be >= 1");
  if (!(exp.train_fraction > 0.0 && exp.train_fraction < 1.0))
    throw std::invalid_argument("run_localization: train_fraction must be in (0, 1)");
  const auto beams = localization_beams(cfg);
  LocalizationReport rep;
  std::uint64_t run_id = 0;
  auto simulate = [&](double d, double ang, SpSet set) {
    const Scene scene = reflector_scene(d, ang, cfg);
    for (std::size_t s = 0; s < exp.slots_per_position; ++s) {
      SpSample smp;
      smp.run.distance = d;
      smp.run.angle_deg = ang;
      smp.run.features = sp_features(scene, beams, cfg, seed * 1000003ULL + run_id++);
      smp.set = set;
      rep.samples.push_back(std::move(smp));
    }
  };
  for (double d : grid_points(exp.dist_min, exp.dist_max, exp.dist_step))
    simulate(d, exp.dist_angle_deg, SpSet::Distance);
  for (double a : grid_points(-exp.angle_half_span_deg, exp.angle_half_span_deg, exp.angle_step_deg))
    simulate(exp.angle_distance, a, SpSet::Angle);

  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::bernoulli_distribution pick(exp.train_fraction);
  std::vector<SpRun> train;
  for (auto& s : rep.samples) {
    s.train = pick(rng);
    if (s.train) train.push_back(s.run);
  }
  rep.weights = calibrate_sp(train, exp.ridge);
  std::vector<double> de, ae;
  for (auto& s : rep.samples) {
    s.estimate = sp_localize(s.run.features, rep.weights);
    if (s.train) {
      ++rep.train_runs;
      continue;
    }
    ++rep.test_runs;
    if (s.set == SpSet::Distance) de.push_back(std::abs(s.estimate.distance - s.run.distance));
    else ae.push_back(std::abs(s.estimate.angle_deg - s.run.angle_deg));
  }
  rep.median_distance_error = median_value(de);
  rep.median_angle_error = median_value(ae);
  return rep;
}

}  // namespace subbeam
