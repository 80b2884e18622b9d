#pragma once

#include <optional>
#include <vector>

#include "kdlab/backtest_env.hpp"
#include "kdlab/kd_ddpg.hpp"
#include "kdlab/metrics.hpp"

namespace kdlab {

/// Benchmark period returns over dates [start, end) of the panel, if it carries one.
inline std::optional<std::vector<double>> benchmark_returns(const MarketPanel& panel, std::size_t start) {
  if (!panel.has_benchmark()) return std::nullopt;
  require(start < panel.benchmark.size(), ErrorKind::Range, "benchmark start outside the panel");
  return returns_from_values(std::span<const double>(panel.benchmark).subspan(start));
}

struct Evaluation {
  PortfolioTrajectory trajectory;
  MetricsReport metrics;
};

/// The deterministic actor run from the lookback date to the panel's end.
inline Evaluation evaluate(const AgentCheckpoint& agent, const MarketPanel& panel, const EnvConfig& config,
                           bool use_benchmark = true, const MetricsOptions& options = {}) {
  const FeatureSpec spec = feature_spec(panel, config);
  require(agent.actor.input_dim() == spec.dim() && agent.actor.output_dim() == spec.assets.size(), ErrorKind::Shape,
          "checkpoint expects " + std::to_string(agent.actor.input_dim()) + " features, config gives " +
              std::to_string(spec.dim()));
  Evaluation out;
  out.trajectory = run_episode(
      panel, [&](const EnvState& s) { return act(agent.actor, s.features); }, config);
  auto bench = use_benchmark ? benchmark_returns(panel, config.lookback) : std::nullopt;
  out.metrics = bench ? report(out.trajectory, std::span<const double>(*bench), options)
                      : report(out.trajectory, std::nullopt, options);
  return out;
}

}  // namespace kdlab
