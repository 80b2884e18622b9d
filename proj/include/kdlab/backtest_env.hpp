#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kdlab/error.hpp"
#include "kdlab/market_data.hpp"
#include "kdlab/metrics.hpp"
#include "kdlab/simplex.hpp"

namespace kdlab {

enum class RewardKind { ValueChange, LogReturn };
enum class FeatureSet { Relatives, RelativesWithIndicators };

struct EnvConfig {
  std::size_t lookback = 10;
  double cost_rate = 0.001;
  RewardKind reward = RewardKind::LogReturn;
  double initial_value = 1.0;
  FeatureSet features = FeatureSet::Relatives;

  void validate() const {
    require(lookback >= 1, ErrorKind::Validation, "lookback must be >= 1");
    require(cost_rate >= 0.0 && cost_rate <= 0.05, ErrorKind::Validation, "cost_rate must lie in [0, 0.05]");
    require(initial_value > 0.0, ErrorKind::Validation, "initial_value must be positive");
  }
};

/// Layout of the state vector:
///   [asset-major log price relatives, oldest first] [current weights] [SMA5/SMA20 - 1 per asset]?
struct FeatureSpec {
  std::vector<std::string> assets;
  std::size_t lookback = 1;
  bool indicators = false;

  std::size_t dim() const { return assets.size() * (lookback + 1 + (indicators ? 1 : 0)); }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& a : assets)
      for (std::size_t k = lookback; k >= 1; --k) names.push_back("lr_" + a + "_lag" + std::to_string(k - 1));
    for (const auto& a : assets) names.push_back("cw_" + a);
    if (indicators)
      for (const auto& a : assets) names.push_back("sma_" + a);
    return names;
  }

  std::string describe() const {
    return "lookback=" + std::to_string(lookback) + ";assets=" + std::to_string(assets.size()) +
           ";indicators=" + (indicators ? "1" : "0");
  }
};

inline FeatureSpec feature_spec(const MarketPanel& panel, const EnvConfig& config) {
  return {panel.assets, config.lookback, config.features == FeatureSet::RelativesWithIndicators};
}

/// State features at date index t given the weights currently held.
inline std::vector<double> make_state(const MarketPanel& panel, std::size_t t, std::span<const double> current_weights,
                                      const EnvConfig& config) {
  require(t >= config.lookback, ErrorKind::InsufficientHistory,
          "t=" + std::to_string(t) + " < lookback=" + std::to_string(config.lookback));
  require(t < panel.num_dates(), ErrorKind::Range, "t outside the panel");
  require(current_weights.size() == panel.num_assets(), ErrorKind::Shape, "weights do not match asset count");
  std::vector<double> s;
  s.reserve(feature_spec(panel, config).dim());
  for (std::size_t a = 0; a < panel.num_assets(); ++a)
    for (std::size_t k = config.lookback; k >= 1; --k) {
      const std::size_t u = t - (k - 1);
      s.push_back(std::log(panel.close(a, u) / panel.close(a, u - 1)));
    }
  s.insert(s.end(), current_weights.begin(), current_weights.end());
  if (config.features == FeatureSet::RelativesWithIndicators) {
    auto sma = [&](std::size_t a, std::size_t len) {
      const std::size_t first = t + 1 >= len ? t + 1 - len : 0;
      double sum = 0.0;
      for (std::size_t u = first; u <= t; ++u) sum += panel.close(a, u);
      return sum / static_cast<double>(t + 1 - first);
    };
    for (std::size_t a = 0; a < panel.num_assets(); ++a) s.push_back(sma(a, 5) / sma(a, 20) - 1.0);
  }
  return s;
}

struct EnvState {
  std::size_t t = 0;
  double value = 1.0;
  WeightVector weights;
  std::vector<double> features;  // empty while t < lookback
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
  double turnover = 0.0;
  double cost = 0.0;
};

/// Cost-aware rebalancing MDP over a rectangular panel. Holds its own copy
/// of the panel; `step` is a pure function of its arguments.
class Environment {
 public:
  Environment(MarketPanel panel, EnvConfig config) : panel_(std::move(panel)), config_(config) {
    config_.validate();
    require(panel_.rectangular(), ErrorKind::Validation, "environment requires a rectangular panel");
    require(panel_.num_dates() >= 2, ErrorKind::Length, "environment needs at least 2 dates");
    relatives_ = price_relatives(panel_);
  }

  const MarketPanel& panel() const { return panel_; }
  const EnvConfig& config() const { return config_; }
  std::size_t num_assets() const { return panel_.num_assets(); }
  std::size_t num_dates() const { return panel_.num_dates(); }
  FeatureSpec features() const { return feature_spec(panel_, config_); }
  std::size_t state_dim() const { return features().dim(); }

  /// Relatives from date t to t + 1.
  std::span<const double> relatives_after(std::size_t t) const { return relatives_.values.at(t); }

  EnvState reset(std::size_t start, WeightVector initial) const {
    require(start + 1 < num_dates(), ErrorKind::Range, "episode start leaves no period to trade");
    require(initial.size() == num_assets() && on_simplex(initial), ErrorKind::Validation,
            "initial weights must lie on the simplex");
    EnvState s{start, config_.initial_value, std::move(initial), {}};
    if (start >= config_.lookback) s.features = make_state(panel_, start, s.weights, config_);
    return s;
  }

  EnvState reset() const { return reset(config_.lookback, uniform_weights(num_assets())); }

  StepResult step(const EnvState& state, std::span<const double> action) const {
    require(state.t + 1 < num_dates(), ErrorKind::Range, "step past the end of the panel");
    require(action.size() == num_assets() && on_simplex(action), ErrorKind::Validation,
            "action must lie on the simplex");
    StepResult out;
    for (std::size_t i = 0; i < action.size(); ++i) out.turnover += std::abs(action[i] - state.weights[i]);
    out.cost = config_.cost_rate * out.turnover * state.value;
    auto x = relatives_after(state.t);
    const double gross = dot(action, x);
    EnvState& next = out.next;
    next.t = state.t + 1;
    next.value = (state.value - out.cost) * gross;
    next.weights.resize(action.size());
    for (std::size_t i = 0; i < action.size(); ++i) next.weights[i] = action[i] * x[i] / gross;
    out.reward = config_.reward == RewardKind::LogReturn ? std::log(next.value / state.value)
                                                         : next.value - state.value;
    out.done = next.t + 1 == num_dates();
    if (next.t >= config_.lookback) next.features = make_state(panel_, next.t, next.weights, config_);
    return out;
  }

 private:
  MarketPanel panel_;
  EnvConfig config_;
  ReturnMatrix relatives_;
};

using Policy = std::function<WeightVector(const EnvState&)>;

/// Drives `policy` from `start` to the last date and records the trajectory.
inline PortfolioTrajectory run_policy(const Environment& env, const Policy& policy, std::size_t start,
                                      WeightVector initial) {
  PortfolioTrajectory traj;
  EnvState state = env.reset(start, std::move(initial));
  traj.dates.push_back(env.panel().dates[state.t]);
  traj.values.push_back(state.value);
  while (true) {
    WeightVector action = policy(state);
    StepResult r = env.step(state, action);
    traj.weights.push_back(std::move(action));
    traj.turnover.push_back(r.turnover);
    traj.period_returns.push_back(r.next.value / state.value - 1.0);
    state = std::move(r.next);
    traj.dates.push_back(env.panel().dates[state.t]);
    traj.values.push_back(state.value);
    if (r.done) break;
  }
  traj.weights.push_back(state.weights);
  return traj;
}

inline PortfolioTrajectory run_episode(const MarketPanel& panel, const Policy& policy, const EnvConfig& config) {
  require(panel.num_dates() >= config.lookback + 2, ErrorKind::InsufficientHistory,
          "panel of " + std::to_string(panel.num_dates()) + " dates leaves no usable window after lookback " +
              std::to_string(config.lookback));
  Environment env(panel, config);
  return run_policy(env, policy, config.lookback, uniform_weights(panel.num_assets()));
}

}  // namespace kdlab
