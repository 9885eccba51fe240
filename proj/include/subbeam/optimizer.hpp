#pragma once

// ISAC beamformer optimization.
//
//  * solve_opt_base  - maximize alpha * Gamma_s + mean_u Gamma_u over |w_n| <= 1
//  * solve_opt_accel - maximize min_u Gamma_u over |w_n| <= 1 and
//                      |w_n - w_conj_n| <= eps, w_conj = conj(s(sensing angle))
//  * build_codebook / update_codebook - one OPT-Accel entry per sensing angle,
//    with verbatim reuse of entries whose bottleneck SNR is unchanged.
//
// Both solvers are projected gradient ascent with a backtracking line search.
// The max-min objective is smoothed by a softmin whose temperature is
// annealed toward zero.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "subbeam/array.hpp"

namespace subbeam {

struct UserLink {
  double angle = 0.0;     ///< azimuth, radians
  double base_snr = 1.0;  ///< linear SNR without beamforming
};

struct SensingTarget {
  Direction direction;
  double base_snr = 1.0;
};

struct OptimizerConfig {
  double epsilon = 0.5;
  double alpha_tradeoff = 1.0;
  double grad_tol = 1e-2;
  int max_iters = 1000;
  double snr_match_tol = 1e-2;
  double fov = deg2rad(60.0);
  /// Seeded random starts in addition to the structured start (OPT-Accel).
  int random_starts = 3;
  std::uint64_t seed = 1;
  /// Softmin temperature schedule, relative to the largest achievable SNR.
  double temperature_start = 5e-2;
  double temperature_end = 1e-7;
  int temperature_stages = 12;

  void validate() const {
    if (!(epsilon >= 0.0))
      throw std::invalid_argument("OptimizerConfig: epsilon must be >= 0");
    if (!(alpha_tradeoff >= 0.0))
      throw std::invalid_argument("OptimizerConfig: alpha must be >= 0");
    if (!(grad_tol > 0.0))
      throw std::invalid_argument("OptimizerConfig: grad_tol must be > 0");
    if (max_iters < 1)
      throw std::invalid_argument("OptimizerConfig: max_iters must be >= 1");
    if (random_starts < 0)
      throw std::invalid_argument("OptimizerConfig: random_starts must be >= 0");
    if (!(temperature_start >= temperature_end && temperature_end > 0.0) ||
        temperature_stages < 1)
      throw std::invalid_argument("OptimizerConfig: bad temperature schedule");
  }
};

enum class SolveStatus {
  Converged,
  MaxIterations,
  /// The perturbation radius left no room to raise any user SNR; the
  /// conjugate sensing beam was returned.
  NoImprovement,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NoImprovement: return "no-improvement";
  }
  return "?";
}

struct CodebookEntry {
  Direction sensing;
  Beamformer weights;
  /// min_u Gamma_u at the last optimization; +inf when there are no users.
  double gamma_min = std::numeric_limits<double>::infinity();
  bool converged = true;
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
};

struct Codebook {
  ArrayGeometry geometry = ArrayGeometry::ula(1);
  double epsilon = 0.5;
  /// Users as of the most recent (re-)optimization.
  std::vector<UserLink> users;
  std::vector<CodebookEntry> entries;

  std::size_t size() const { return entries.size(); }
};

struct OptBaseResult {
  Beamformer weights;
  double objective = 0.0;
  /// Objective after every accepted iteration; non-decreasing.
  std::vector<double> history;
  bool converged = false;
  int iterations = 0;
};

struct UpdateStats {
  std::size_t reused = 0;
  std::size_t reoptimized = 0;
  std::vector<bool> entry_reoptimized;
  std::vector<double> solve_seconds;
};

namespace detail {

struct UserSet {
  std::vector<CVec> steering;
  std::vector<double> base_snr;
};

inline void check_users(std::span<const UserLink> users, double fov) {
  for (const auto& u : users) {
    if (!(u.base_snr > 0.0))
      throw std::invalid_argument("UserLink: base_snr must be > 0");
    if (!(std::abs(u.angle) <= fov + 1e-12))
      throw std::invalid_argument("UserLink: angle outside the field of view");
  }
}

inline UserSet make_user_set(const ArrayGeometry& geom,
                             std::span<const UserLink> users) {
  UserSet set;
  for (const auto& u : users) {
    set.steering.push_back(steering_vector(geom, u.angle, default_elevation(geom)));
    set.base_snr.push_back(u.base_snr);
  }
  return set;
}

inline double min_user_snr(const UserSet& users, std::span<const cplx> w) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < users.steering.size(); ++u) {
    m = std::min(m, users.base_snr[u] * std::norm(array_response(users.steering[u], w)));
  }
  return m;
}

/// Euclidean projection of z onto {|z| <= 1} intersected with {|z - c| <= eps},
/// where |c| = 1.
inline cplx project_element(cplx z, cplx c, double eps) {
  const double a = std::abs(z);
  const double d = std::abs(z - c);
  const bool in_unit = a <= 1.0;
  const bool in_ball = d <= eps;
  if (in_unit && in_ball) return z;
  if (eps >= 2.0) return in_unit ? z : z / a;
  if (eps <= 0.0) return c;
  if (!in_unit) {
    const cplx p = z / a;
    if (std::abs(p - c) <= eps) return p;
  }
  if (!in_ball) {
    const cplx p = c + (z - c) * (eps / d);
    if (std::abs(p) <= 1.0) return p;
  }
  // Nearest of the two points where the circles |z| = 1 and |z - c| = eps meet.
  const double beta = 2.0 * std::asin(eps / 2.0);
  const cplx q1 = c * std::polar(1.0, beta);
  const cplx q2 = c * std::polar(1.0, -beta);
  return std::abs(q1 - z) <= std::abs(q2 - z) ? q1 : q2;
}

inline void project(std::span<cplx> w, std::span<const cplx> anchor, double eps) {
  for (std::size_t n = 0; n < w.size(); ++n) w[n] = project_element(w[n], anchor[n], eps);
}

inline void project_unit(std::span<cplx> w) {
  for (auto& v : w) {
    const double a = std::abs(v);
    if (a > 1.0) v /= a;
  }
}

/// Softmin-smoothed max-min objective over normalized user SNRs.
class SoftMinObjective {
 public:
  SoftMinObjective(const UserSet& users, double scale)
      : users_(users), scale_(scale), resp_(users.steering.size()),
        snr_(users.steering.size()), weight_(users.steering.size()) {}

  double value(std::span<const cplx> w, double temp) {
    evaluate(w);
    const double m = *std::min_element(snr_.begin(), snr_.end());
    double acc = 0.0;
    for (double s : snr_) acc += std::exp(-(s - m) / temp);
    return m - temp * std::log(acc);
  }

  /// Gradient with respect to conj(w), written into grad.
  double gradient(std::span<const cplx> w, double temp, std::span<cplx> grad) {
    const double v = value(w, temp);
    const double m = *std::min_element(snr_.begin(), snr_.end());
    double total = 0.0;
    for (std::size_t u = 0; u < snr_.size(); ++u) {
      weight_[u] = std::exp(-(snr_[u] - m) / temp);
      total += weight_[u];
    }
    std::fill(grad.begin(), grad.end(), cplx{});
    for (std::size_t u = 0; u < snr_.size(); ++u) {
      const cplx coef = resp_[u] * (weight_[u] / total * users_.base_snr[u] / scale_);
      const auto& s = users_.steering[u];
      for (std::size_t n = 0; n < grad.size(); ++n) grad[n] += std::conj(s[n]) * coef;
    }
    return v;
  }

 private:
  void evaluate(std::span<const cplx> w) {
    for (std::size_t u = 0; u < snr_.size(); ++u) {
      resp_[u] = array_response(users_.steering[u], w);
      snr_[u] = users_.base_snr[u] * std::norm(resp_[u]) / scale_;
    }
  }

  const UserSet& users_;
  double scale_;
  CVec resp_;
  std::vector<double> snr_;
  std::vector<double> weight_;
};

inline double max_abs(std::span<const cplx> v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

struct AccelRun {
  CVec w;
  double gamma_min = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Annealed projected gradient ascent on the softmin objective from one start.
///
/// Each temperature stage ends when the gradient-mapping norm falls below
/// grad_tol * 1e-3 or no improving step is found. The line search starts at
/// min(0.1, 2 x last accepted step) along the max-normalized gradient and halves.
inline AccelRun accel_from(const UserSet& users, std::span<const cplx> anchor,
                           CVec w, const OptimizerConfig& cfg, double scale) {
  SoftMinObjective obj(users, scale);
  const std::size_t n = w.size();
  const double n_el = static_cast<double>(n);
  project(w, anchor, cfg.epsilon);
  CVec grad(n), trial(n), dir(n);
  int iters = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
  const int stages = cfg.temperature_stages;
  const double ratio =
      stages > 1 ? std::pow(cfg.temperature_end / cfg.temperature_start, 1.0 / (stages - 1)) : 1.0;
  double temp = cfg.temperature_start;
  for (int stage = 0; stage < stages && iters < cfg.max_iters; ++stage, temp *= ratio) {
    temp = std::max(temp, cfg.temperature_end);
    const double stage_tol = cfg.grad_tol * 1e-3;
    double step0 = 0.1;
    while (iters < cfg.max_iters) {
      const double f0 = obj.gradient(w, temp, grad);
      // Gradient mapping at unit step, in units of normalized SNR per element.
      for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + n_el * grad[i];
      project(trial, anchor, cfg.epsilon);
      double gm = 0.0;
      for (std::size_t i = 0; i < n; ++i) gm += std::norm(trial[i] - w[i]);
      grad_norm = std::sqrt(gm / n_el);
      if (grad_norm < stage_tol) break;
      const double gmax = max_abs(grad);
      if (gmax == 0.0) break;
      for (std::size_t i = 0; i < n; ++i) dir[i] = grad[i] / gmax;
      double step = step0;
      bool accepted = false;
      while (step > 1e-10) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + step * dir[i];
        project(trial, anchor, cfg.epsilon);
        if (obj.value(trial, temp) > f0) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      ++iters;
      if (!accepted) break;
      step0 = std::min(0.1, 2.0 * step);
      w.swap(trial);
    }
  }
  AccelRun run;
  run.w = std::move(w);
  run.gamma_min = min_user_snr(users, run.w);
  run.converged = grad_norm < cfg.grad_tol;
  run.iterations = iters;
  return run;
}

inline double largest_base_snr(const UserSet& users) {
  double m = 0.0;
  for (double g : users.base_snr) m = std::max(m, g);
  return m;
}

}  // namespace detail

/// Conjugate sensing anchor conj(s(direction)).
inline CVec sensing_anchor(const ArrayGeometry& geom, const Direction& dir) {
  return conjugate_beam(geom, dir).weights();
}

inline Direction sensing_direction(const ArrayGeometry& geom, double azimuth) {
  return Direction{azimuth, default_elevation(geom)};
}

/// min_u Gamma_u for a beamformer; +inf for an empty user set.
inline double gamma_min_of(const Beamformer& w, const ArrayGeometry& geom,
                           std::span<const UserLink> users) {
  auto set = detail::make_user_set(geom, users);
  return detail::min_user_snr(set, w.weights());
}

/// Multi-user / sensing weighted-sum beamformer (OPT-Base).
inline OptBaseResult solve_opt_base(std::span<const UserLink> users,
                                    const SensingTarget& target,
                                    const ArrayGeometry& geom,
                                    const OptimizerConfig& cfg = {}) {
  cfg.validate();
  if (users.empty()) throw std::invalid_argument("solve_opt_base: need at least one user");
  detail::check_users(users, cfg.fov);
  const auto set = detail::make_user_set(geom, users);
  const CVec s_sense = steering_vector(geom, target.direction);
  const CVec anchor = sensing_anchor(geom, target.direction);
  const double alpha = cfg.alpha_tradeoff;
  const double inv_u = 1.0 / static_cast<double>(users.size());
  const double n_el = static_cast<double>(geom.num_elements());
  double scale = alpha * target.base_snr;
  for (double g : set.base_snr) scale = std::max(scale, g * inv_u);
  scale *= n_el * n_el;
  if (scale == 0.0) scale = 1.0;

  auto objective = [&](std::span<const cplx> w) {
    double f = alpha * target.base_snr * std::norm(array_response(s_sense, w));
    for (std::size_t u = 0; u < set.steering.size(); ++u)
      f += inv_u * set.base_snr[u] * std::norm(array_response(set.steering[u], w));
    return f;
  };

  // Multi-beam start: conjugate beams toward every target with quadratic
  // (Newman) phase offsets, scaled into the unit box.
  const std::size_t n = geom.num_elements();
  CVec w(anchor);
  const double num_users = static_cast<double>(users.size());
  for (std::size_t u = 0; u < set.steering.size(); ++u) {
    const double du = static_cast<double>(u + 1);
    const cplx rot = std::polar(1.0, kPi * du * du / (num_users + 1.0));
    for (std::size_t i = 0; i < n; ++i) w[i] += rot * std::conj(set.steering[u][i]);
  }
  const double peak = detail::max_abs(w);
  if (peak > 0.0) for (auto& v : w) v /= peak;

  OptBaseResult res;
  double f = objective(w);
  res.history.push_back(f);
  CVec grad(n), trial(n);
  double grad_norm = std::numeric_limits<double>::infinity();
  int iters = 0;
  while (iters < cfg.max_iters) {
    std::fill(grad.begin(), grad.end(), cplx{});
    const cplx rs = array_response(s_sense, w) * (alpha * target.base_snr / scale);
    for (std::size_t i = 0; i < n; ++i) grad[i] += std::conj(s_sense[i]) * rs;
    for (std::size_t u = 0; u < set.steering.size(); ++u) {
      const cplx ru = array_response(set.steering[u], w) * (inv_u * set.base_snr[u] / scale);
      for (std::size_t i = 0; i < n; ++i) grad[i] += std::conj(set.steering[u][i]) * ru;
    }
    for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + grad[i];
    detail::project_unit(trial);
    double gm = 0.0;
    for (std::size_t i = 0; i < n; ++i) gm += std::norm(trial[i] - w[i]);
    grad_norm = std::sqrt(gm);
    if (grad_norm < cfg.grad_tol * 1e-3) break;
    const double gmax = detail::max_abs(grad);
    if (gmax == 0.0) break;
    double step = 0.1;
    bool accepted = false;
    double f_new = f;
    while (step > 1e-9) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + step * grad[i] / gmax;
      detail::project_unit(trial);
      f_new = objective(trial);
      if (f_new > f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++iters;
    if (!accepted) break;
    w.swap(trial);
    f = f_new;
    res.history.push_back(f);
  }
  // Gauge: rotate so the first element's phase matches the conjugate anchor.
  if (std::abs(w[0]) > 0.0) {
    const cplx rot = std::polar(1.0, std::arg(anchor[0]) - std::arg(w[0]));
    for (auto& v : w) v *= rot;
    detail::project_unit(w);
  }
  res.weights = Beamformer(std::move(w));
  res.objective = objective(res.weights.weights());
  res.converged = grad_norm < cfg.grad_tol;
  res.iterations = iters;
  return res;
}

/// Max-min user SNR under the per-element perturbation bound (OPT-Accel).
///
/// `warm_start`, when given, replaces the structured and random starts.
inline CodebookEntry solve_opt_accel(std::span<const UserLink> users,
                                     const SensingTarget& target,
                                     const ArrayGeometry& geom,
                                     const OptimizerConfig& cfg = {},
                                     const Beamformer* warm_start = nullptr) {
  cfg.validate();
  detail::check_users(users, cfg.fov);
  const CVec anchor = sensing_anchor(geom, target.direction);
  CodebookEntry entry;
  entry.sensing = target.direction;
  if (users.empty() || cfg.epsilon == 0.0) {
    entry.weights = Beamformer(anchor);
    entry.gamma_min = gamma_min_of(entry.weights, geom, users);
    entry.converged = true;
    entry.status = SolveStatus::Converged;
    return entry;
  }
  const auto set = detail::make_user_set(geom, users);
  const double n_el = static_cast<double>(geom.num_elements());
  const double scale = n_el * n_el * detail::largest_base_snr(set);
  const std::size_t n = geom.num_elements();

  std::vector<CVec> starts;
  if (warm_start) {
    if (warm_start->size() != n)
      throw std::invalid_argument("solve_opt_accel: warm start length mismatch");
    starts.push_back(warm_start->weights());
  } else {
    // Structured start: anchor plus user beams with quadratic phase offsets.
    CVec v(n);
    const double num_users = static_cast<double>(users.size());
    for (std::size_t u = 0; u < set.steering.size(); ++u) {
      const double du = static_cast<double>(u);
      const cplx rot = std::polar(1.0, kPi * du * du / num_users);
      for (std::size_t i = 0; i < n; ++i) v[i] += rot * std::conj(set.steering[u][i]);
    }
    const double peak = detail::max_abs(v);
    CVec w0(anchor);
    if (peak > 0.0)
      for (std::size_t i = 0; i < n; ++i) w0[i] += cfg.epsilon * v[i] / peak;
    starts.push_back(std::move(w0));
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int r = 0; r < cfg.random_starts; ++r) {
      CVec z(anchor);
      for (std::size_t i = 0; i < n; ++i) {
        const double rad = cfg.epsilon * unit(rng);
        const double ph = 2.0 * kPi * unit(rng);
        z[i] += std::polar(rad, ph);
      }
      starts.push_back(std::move(z));
    }
  }

  detail::AccelRun best;
  best.gamma_min = -1.0;
  int total_iters = 0;
  for (auto& start : starts) {
    auto run = detail::accel_from(set, anchor, std::move(start), cfg, scale);
    total_iters += run.iterations;
    if (run.gamma_min > best.gamma_min) best = std::move(run);
  }
  const double conj_gamma = detail::min_user_snr(set, anchor);
  if (!(best.gamma_min > conj_gamma)) {
    entry.weights = Beamformer(anchor);
    entry.gamma_min = conj_gamma;
    entry.converged = false;
    entry.status = SolveStatus::NoImprovement;
    entry.iterations = total_iters;
    return entry;
  }
  entry.weights = Beamformer(std::move(best.w));
  entry.gamma_min = best.gamma_min;
  entry.converged = best.converged;
  entry.status = best.converged ? SolveStatus::Converged : SolveStatus::MaxIterations;
  entry.iterations = total_iters;
  return entry;
}

inline Codebook build_codebook(std::span<const UserLink> users,
                               std::span<const Direction> sweep,
                               double target_base_snr, const ArrayGeometry& geom,
                               const OptimizerConfig& cfg = {}) {
  if (sweep.empty()) throw std::invalid_argument("build_codebook: empty sweep");
  Codebook book;
  book.geometry = geom;
  book.epsilon = cfg.epsilon;
  book.users.assign(users.begin(), users.end());
  for (const auto& dir : sweep) {
    book.entries.push_back(
        solve_opt_accel(users, SensingTarget{dir, target_base_snr}, geom, cfg));
  }
  return book;
}

inline std::vector<Direction> azimuth_sweep(const ArrayGeometry& geom,
                                            std::span<const double> azimuths) {
  std::vector<Direction> dirs;
  for (double az : azimuths) dirs.push_back(sensing_direction(geom, az));
  return dirs;
}

/// Online update after user movement: reuse an entry verbatim when its
/// bottleneck SNR is unchanged within snr_match_tol, otherwise re-optimize it
/// warm-started from the old weights.
inline std::pair<Codebook, UpdateStats> update_codebook(
    const Codebook& book, std::span<const UserLink> moved_users,
    const OptimizerConfig& cfg = {}) {
  if (moved_users.size() != book.users.size())
    throw std::invalid_argument("update_codebook: user count differs from the codebook");
  detail::check_users(moved_users, cfg.fov);
  Codebook next = book;
  UpdateStats stats;
  const auto set = detail::make_user_set(book.geometry, moved_users);
  for (std::size_t m = 0; m < book.entries.size(); ++m) {
    const auto& old = book.entries[m];
    bool reuse = moved_users.empty() || std::isinf(old.gamma_min);
    if (!reuse) {
      const double fresh = detail::min_user_snr(set, old.weights.weights());
      reuse = std::abs(fresh - old.gamma_min) <= cfg.snr_match_tol;
    }
    if (reuse) {
      ++stats.reused;
      stats.entry_reoptimized.push_back(false);
      stats.solve_seconds.push_back(0.0);
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    OptimizerConfig entry_cfg = cfg;
    entry_cfg.epsilon = book.epsilon;
    next.entries[m] = solve_opt_accel(moved_users, SensingTarget{old.sensing, 1.0},
                                      book.geometry, entry_cfg, &old.weights);
    const auto t1 = std::chrono::steady_clock::now();
    ++stats.reoptimized;
    stats.entry_reoptimized.push_back(true);
    stats.solve_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  // The recorded users are those of the last optimization, so an all-reuse
  // update returns the codebook unchanged.
  if (stats.reoptimized > 0) next.users.assign(moved_users.begin(), moved_users.end());
  return {std::move(next), std::move(stats)};
}

}  // namespace subbeam
