#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kdlab/date.hpp"
#include "kdlab/error.hpp"
#include "kdlab/simplex.hpp"

namespace kdlab {

/// Output of any strategy run. `values` and `weights` have one entry per
/// date; `period_returns` and `turnover` one entry per period between dates.
/// weights[k] is the allocation rebalanced into at dates[k] (the final entry
/// is the drifted holding at the last date).
struct PortfolioTrajectory {
  std::vector<Date> dates;
  std::vector<double> values;
  std::vector<WeightVector> weights;
  std::vector<double> period_returns;
  std::vector<double> turnover;

  std::size_t periods() const { return period_returns.size(); }
};

inline std::vector<double> returns_from_values(std::span<const double> values) {
  std::vector<double> r;
  for (std::size_t t = 1; t < values.size(); ++t) r.push_back(values[t] / values[t - 1] - 1.0);
  return r;
}

inline void validate(const PortfolioTrajectory& traj) {
  const std::size_t n = traj.values.size();
  require(n >= 1, ErrorKind::Length, "trajectory has no values");
  require(traj.dates.size() == n && traj.weights.size() == n, ErrorKind::Shape,
          "trajectory dates/weights must match values");
  require(traj.period_returns.size() + 1 == n && traj.turnover.size() + 1 == n, ErrorKind::Shape,
          "trajectory needs one return and one turnover per period");
  for (double v : traj.values) require(v > 0.0 && std::isfinite(v), ErrorKind::Validation, "non-positive value");
  for (const auto& w : traj.weights) require(on_simplex(w), ErrorKind::Validation, "weights off the simplex");
}

namespace stats {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample (n-1) covariance.
inline double covariance(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

inline double sample_std(std::span<const double> x) { return std::sqrt(covariance(x, x)); }

inline double population_std(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// A spread this small relative to the data is rounding noise, not risk.
inline bool negligible_spread(double spread, std::span<const double> x) {
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  return spread <= 1e-12 * scale || spread == 0.0;
}

}  // namespace stats

inline double total_return(std::span<const double> values) {
  require(values.size() >= 2, ErrorKind::Length, "total_return needs at least 2 values");
  require(values.front() > 0.0 && values.back() > 0.0, ErrorKind::Domain, "values must be positive");
  return (values.back() - values.front()) / values.front();
}

inline double annualized_return(double total, double years) {
  require(years > 0.0, ErrorKind::Domain, "years must be positive");
  require(total > -1.0, ErrorKind::Domain, "total return must exceed -1");
  return std::pow(1.0 + total, 1.0 / years) - 1.0;
}

/// Annualized: mean excess / sample std of excess, times sqrt(periods_per_year).
inline double sharpe(std::span<const double> returns, double risk_free, double periods_per_year) {
  require(returns.size() >= 2, ErrorKind::Length, "sharpe needs at least 2 returns");
  std::vector<double> excess(returns.begin(), returns.end());
  for (double& r : excess) r -= risk_free;
  const double sd = stats::sample_std(excess);
  require(!stats::negligible_spread(sd, excess), ErrorKind::Degenerate, "zero std of excess returns");
  return stats::mean(excess) / sd * std::sqrt(periods_per_year);
}

enum class DrawdownMode { Relative, Absolute };

/// Largest decline from the running peak; relative mode divides by that peak.
inline double max_drawdown(std::span<const double> values, DrawdownMode mode = DrawdownMode::Relative) {
  require(!values.empty(), ErrorKind::Length, "max_drawdown needs at least 1 value");
  double peak = values.front();
  double worst = 0.0;
  for (double v : values) {
    require(v > 0.0, ErrorKind::Domain, "values must be positive");
    peak = std::max(peak, v);
    const double decline = mode == DrawdownMode::Relative ? (peak - v) / peak : peak - v;
    worst = std::max(worst, decline);
  }
  return worst;
}

/// Per-period ratio; downside deviation is the population std of the strictly
/// negative excess returns.
inline double sortino(std::span<const double> returns, double risk_free) {
  require(returns.size() >= 2, ErrorKind::Length, "sortino needs at least 2 returns");
  std::vector<double> excess(returns.begin(), returns.end());
  std::vector<double> downside;
  for (double& r : excess) {
    r -= risk_free;
    if (r < 0.0) downside.push_back(r);
  }
  require(!downside.empty(), ErrorKind::Degenerate, "no negative excess returns");
  const double m = stats::mean(excess);
  if (m == 0.0) return 0.0;
  const double sd = stats::population_std(downside);
  require(!stats::negligible_spread(sd, downside), ErrorKind::Degenerate, "zero downside deviation");
  return m / sd;
}

namespace detail {
inline void require_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  require(a.size() == b.size(), ErrorKind::Length,
          std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  require(a.size() >= 2, ErrorKind::Length, std::string(what) + " needs at least 2 returns");
}
}  // namespace detail

inline double beta(std::span<const double> portfolio, std::span<const double> market) {
  detail::require_pair(portfolio, market, "beta");
  const double var = stats::covariance(market, market);
  require(!stats::negligible_spread(std::sqrt(var), market), ErrorKind::Degenerate, "zero market variance");
  return stats::covariance(portfolio, market) / var;
}

/// Jensen's alpha per period, annualized by multiplying with periods_per_year.
inline double alpha(std::span<const double> portfolio, std::span<const double> market, double risk_free,
                    double periods_per_year) {
  const double b = beta(portfolio, market);
  return (stats::mean(portfolio) - (risk_free + b * (stats::mean(market) - risk_free))) * periods_per_year;
}

inline double information_ratio(std::span<const double> portfolio, std::span<const double> benchmark) {
  detail::require_pair(portfolio, benchmark, "information_ratio");
  std::vector<double> diff(portfolio.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = portfolio[i] - benchmark[i];
  const double te = stats::sample_std(diff);
  require(!stats::negligible_spread(te, diff), ErrorKind::Degenerate, "zero tracking error");
  return stats::mean(diff) / te;
}

inline double calmar(double annualized, double max_dd) {
  require(max_dd > 0.0, ErrorKind::Degenerate, "zero max drawdown");
  return annualized / max_dd;
}

inline double win_rate(std::span<const double> returns) {
  require(!returns.empty(), ErrorKind::Length, "win_rate needs at least 1 return");
  auto wins = std::count_if(returns.begin(), returns.end(), [](double r) { return r > 0.0; });
  return static_cast<double>(wins) / static_cast<double>(returns.size());
}

inline double profit_loss_ratio(std::span<const double> returns) {
  double gain = 0.0;
  double loss = 0.0;
  std::size_t winners = 0;
  std::size_t losers = 0;
  for (double r : returns) {
    if (r > 0.0) {
      gain += r;
      ++winners;
    } else if (r < 0.0) {
      loss += r;
      ++losers;
    }
  }
  require(winners > 0 && losers > 0, ErrorKind::Degenerate, "profit/loss ratio needs winners and losers");
  return (gain / static_cast<double>(winners)) / std::abs(loss / static_cast<double>(losers));
}

/// Per-period sample std, not annualized.
inline double volatility(std::span<const double> returns) {
  require(returns.size() >= 2, ErrorKind::Length, "volatility needs at least 2 returns");
  return stats::sample_std(returns);
}

/// The twelve indicators. Fields that can be undefined for a given input
/// (degenerate spread, missing benchmark) are nullopt and render as "-".
struct MetricsReport {
  double total_return = 0.0;
  double annualized_return = 0.0;
  std::optional<double> sharpe;
  double max_drawdown = 0.0;  // reported negative, in [-1, 0]
  std::optional<double> sortino;
  std::optional<double> beta;
  std::optional<double> alpha;
  std::optional<double> information_ratio;
  std::optional<double> calmar;
  double win_rate = 0.0;
  std::optional<double> profit_loss_ratio;
  std::optional<double> volatility;

  static constexpr std::array<const char*, 12> kColumns = {"TR", "AR",  "Sharpe", "MD", "SR",  "Beta",
                                                            "Alpha", "IR", "CR", "WR", "PLR", "Volatility"};

  std::array<std::optional<double>, 12> row() const {
    return {total_return, annualized_return, sharpe, max_drawdown, sortino, beta, alpha,
            information_ratio, calmar, win_rate, profit_loss_ratio, volatility};
  }
};

struct MetricsOptions {
  double risk_free = 0.0;
  double periods_per_year = 252.0;
};

namespace detail {
template <class F>
std::optional<double> unless_degenerate(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Degenerate || e.kind() == ErrorKind::Length) return std::nullopt;
    throw;
  }
}
}  // namespace detail

/// `benchmark_returns`, when given, must hold one return per trajectory period.
inline MetricsReport report(const PortfolioTrajectory& traj, std::optional<std::span<const double>> benchmark_returns,
                            const MetricsOptions& options = {}) {
  validate(traj);
  require(traj.periods() >= 1, ErrorKind::Length, "trajectory needs at least one period");
  const auto& r = traj.period_returns;
  if (benchmark_returns)
    require(benchmark_returns->size() == r.size(), ErrorKind::Validation,
            "benchmark has " + std::to_string(benchmark_returns->size()) + " returns, trajectory has " +
                std::to_string(r.size()));

  MetricsReport m;
  m.total_return = total_return(traj.values);
  m.annualized_return =
      annualized_return(m.total_return, static_cast<double>(traj.periods()) / options.periods_per_year);
  m.sharpe = detail::unless_degenerate([&] { return sharpe(r, options.risk_free, options.periods_per_year); });
  const double mdd = max_drawdown(traj.values);
  m.max_drawdown = -mdd;
  m.sortino = detail::unless_degenerate([&] { return sortino(r, options.risk_free); });
  if (benchmark_returns) {
    auto b = *benchmark_returns;
    m.beta = detail::unless_degenerate([&] { return beta(r, b); });
    m.alpha = detail::unless_degenerate([&] { return alpha(r, b, options.risk_free, options.periods_per_year); });
    m.information_ratio = detail::unless_degenerate([&] { return information_ratio(r, b); });
  }
  m.calmar = detail::unless_degenerate([&] { return calmar(m.annualized_return, mdd); });
  m.win_rate = win_rate(r);
  m.profit_loss_ratio = detail::unless_degenerate([&] { return profit_loss_ratio(r); });
  m.volatility = detail::unless_degenerate([&] { return volatility(r); });
  return m;
}

/// Builds a weightless trajectory from a value series, e.g. for a benchmark.
inline PortfolioTrajectory trajectory_from_values(std::vector<Date> dates, std::vector<double> values) {
  PortfolioTrajectory traj;
  traj.dates = std::move(dates);
  traj.values = std::move(values);
  traj.weights.assign(traj.values.size(), WeightVector{1.0});
  traj.period_returns = returns_from_values(traj.values);
  traj.turnover.assign(traj.period_returns.size(), 0.0);
  return traj;
}

inline std::string format_fixed(std::optional<double> v, int decimals) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, *v);
  return buf;
}

/// One `metric,value` row per indicator, 9 decimals; undefined values are NA.
inline void write_metrics_fixture(const MetricsReport& m, std::ostream& out) {
  out << "metric,value\n";
  auto row = m.row();
  for (std::size_t i = 0; i < row.size(); ++i) out << MetricsReport::kColumns[i] << ',' << format_fixed(row[i], 9) << '\n';
}

}  // namespace kdlab
