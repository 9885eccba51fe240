#pragma once

// Sensing gain versus bottleneck user SNR as the perturbation radius grows.

#include <optional>
#include <span>
#include <vector>

#include "subbeam/optimizer.hpp"

namespace subbeam {

struct TradeoffPoint {
  double epsilon = 0.0;
  double sensing_gain = 0.0;  ///< linear
  double gamma_min = 0.0;     ///< linear
  std::vector<double> user_gains;
  SolveStatus status = SolveStatus::Converged;
};

inline std::vector<TradeoffPoint> tradeoff_sweep(std::span<const UserLink> users,
                                                 const Direction& sensing,
                                                 const ArrayGeometry& geom,
                                                 std::span<const double> epsilons,
                                                 const OptimizerConfig& cfg = {}) {
  std::vector<TradeoffPoint> out;
  for (double eps : epsilons) {
    OptimizerConfig c = cfg;
    c.epsilon = eps;
    const auto e = solve_opt_accel(users, SensingTarget{sensing, 1.0}, geom, c);
    TradeoffPoint p;
    p.epsilon = eps;
    p.sensing_gain = beamforming_gain(e.weights, geom, sensing);
    p.gamma_min = e.gamma_min;
    for (const auto& u : users) p.user_gains.push_back(beamforming_gain(e.weights, geom, u.angle));
    p.status = e.status;
    out.push_back(std::move(p));
  }
  return out;
}

/// First epsilon where the dB curves of sensing gain and Gamma_min cross,
/// linearly interpolated between sweep points.
inline std::optional<double> tradeoff_crossover(std::span<const TradeoffPoint> pts) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = lin2db(pts[i].sensing_gain) - lin2db(pts[i].gamma_min);
    const double b = lin2db(pts[i + 1].sensing_gain) - lin2db(pts[i + 1].gamma_min);
    if (a == 0.0) return pts[i].epsilon;
    if ((a > 0.0) != (b > 0.0) || b == 0.0) {
      const double t = a / (a - b);
      return pts[i].epsilon + t * (pts[i + 1].epsilon - pts[i].epsilon);
    }
  }
  return std::nullopt;
}

}  // namespace subbeam
