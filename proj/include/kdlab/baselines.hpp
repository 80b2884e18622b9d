#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kdlab/backtest_env.hpp"
#include "kdlab/error.hpp"
#include "kdlab/simplex.hpp"

// Online portfolio selection baselines. Every strategy trades through
// Environment::step, so it pays the same proportional costs as the agent.
namespace kdlab {

struct BaselineParams {
  double eg_eta = 0.05;
  double pamr_epsilon = 0.5;
  std::size_t olmar_window = 5;
  double olmar_epsilon = 10.0;
};

/// Buy once, never rebalance: the action is always the drifted holding.
inline PortfolioTrajectory run_bah(const Environment& env, const WeightVector& initial, std::size_t start = 0) {
  return run_policy(env, [](const EnvState& s) { return s.weights; }, start, initial);
}

inline PortfolioTrajectory run_crp(const Environment& env, const WeightVector& weights, std::size_t start = 0) {
  return run_policy(env, [weights](const EnvState&) { return weights; }, start, weights);
}

/// Hindsight log-optimal constant rebalanced portfolio over all periods of
/// the panel. Step size is 1/L with L bounding the Hessian on the simplex's
/// tangent space (moves along the all-ones direction are absorbed by the projection).
inline WeightVector solve_bcrp(const MarketPanel& panel) {
  require(panel.num_dates() >= 2, ErrorKind::Length, "BCRP needs at least 2 dates");
  const ReturnMatrix x = price_relatives(panel);
  const std::size_t n = panel.num_assets();
  double lipschitz = 0.0;
  for (const auto& row : x.values) {
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(n);
    double dev = 0.0;
    for (double v : row) dev += (v - mean) * (v - mean);
    const double lo = *std::min_element(row.begin(), row.end());
    lipschitz += dev / (lo * lo);
  }
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  WeightVector w = uniform_weights(n);
  std::vector<double> trial(n);
  for (int it = 0; it < 100000; ++it) {
    std::fill(trial.begin(), trial.end(), 0.0);
    for (const auto& row : x.values) {
      const double growth = dot(w, row);
      for (std::size_t i = 0; i < n; ++i) trial[i] += row[i] / growth;
    }
    for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + step * trial[i];
    WeightVector next = project_simplex(trial);
    const double moved = l_inf_distance(next, w);
    w = std::move(next);
    if (moved < 1e-10) break;
  }
  return w;
}

/// Exponentiated gradient: w_i <- w_i exp(eta x_i / w.x), renormalized.
inline WeightVector eg_update(const WeightVector& w, std::span<const double> x, double eta) {
  if (eta == 0.0) return w;
  const double growth = dot(w, x);
  WeightVector next(w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    next[i] = w[i] * std::exp(eta * x[i] / growth);
    total += next[i];
  }
  for (double& v : next) v /= total;
  return next;
}

/// PAMR-0 passive-aggressive step toward mean reversion.
inline WeightVector pamr_update(const WeightVector& w, std::span<const double> x, double epsilon) {
  const double loss = std::max(0.0, dot(w, x) - epsilon);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double denom = 0.0;
  for (double v : x) denom += (v - mean) * (v - mean);
  if (loss == 0.0 || denom == 0.0) return w;
  const double tau = loss / denom;
  std::vector<double> moved(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) moved[i] = w[i] - tau * (x[i] - mean);
  return project_simplex(moved);
}

/// OLMAR moving-average predictor: mean of P_{t-k} / P_t over the last
/// `window` closes (fewer when history is shorter).
inline std::vector<double> olmar_predict(const MarketPanel& panel, std::size_t t, std::size_t window) {
  const std::size_t span = std::min(window, t + 1);
  std::vector<double> xhat(panel.num_assets(), 0.0);
  for (std::size_t a = 0; a < panel.num_assets(); ++a) {
    for (std::size_t k = 0; k < span; ++k) xhat[a] += panel.close(a, t - k) / panel.close(a, t);
    xhat[a] /= static_cast<double>(span);
  }
  return xhat;
}

inline WeightVector olmar_update(const WeightVector& w, std::span<const double> xhat, double epsilon) {
  const double mean = std::accumulate(xhat.begin(), xhat.end(), 0.0) / static_cast<double>(xhat.size());
  double denom = 0.0;
  for (double v : xhat) denom += (v - mean) * (v - mean);
  if (denom == 0.0) return w;
  const double tau = std::max(0.0, (epsilon - dot(w, xhat)) / denom);
  if (tau == 0.0) return w;
  std::vector<double> moved(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) moved[i] = w[i] + tau * (xhat[i] - mean);
  return project_simplex(moved);
}

inline PortfolioTrajectory run_eg(const Environment& env, double eta, std::size_t start = 0) {
  require(eta >= 0.0, ErrorKind::Domain, "eta must be >= 0");
  WeightVector w = uniform_weights(env.num_assets());
  return run_policy(
      env,
      [&, start](const EnvState& s) {
        if (s.t > start) w = eg_update(w, env.relatives_after(s.t - 1), eta);
        return w;
      },
      start, w);
}

inline PortfolioTrajectory run_pamr(const Environment& env, double epsilon, std::size_t start = 0) {
  require(epsilon >= 0.0, ErrorKind::Domain, "epsilon must be >= 0");
  WeightVector w = uniform_weights(env.num_assets());
  return run_policy(
      env,
      [&, start](const EnvState& s) {
        if (s.t > start) w = pamr_update(w, env.relatives_after(s.t - 1), epsilon);
        return w;
      },
      start, w);
}

inline PortfolioTrajectory run_olmar(const Environment& env, std::size_t window, double epsilon,
                                     std::size_t start = 0) {
  require(window >= 2, ErrorKind::Domain, "OLMAR window must be >= 2");
  require(epsilon >= 1.0, ErrorKind::Domain, "OLMAR epsilon must be >= 1");
  WeightVector w = uniform_weights(env.num_assets());
  return run_policy(
      env,
      [&](const EnvState& s) {
        w = olmar_update(w, olmar_predict(env.panel(), s.t, window), epsilon);
        return w;
      },
      start, w);
}

}  // namespace kdlab
