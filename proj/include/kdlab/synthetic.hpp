#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kdlab/error.hpp"
#include "kdlab/market_data.hpp"

// Seeded synthetic markets for experiments and the bundled dataset.
namespace kdlab::synthetic {

/// `count` weekdays starting at `first` (or the next weekday after it).
inline std::vector<Date> business_days(Date first, std::size_t count) {
  std::vector<Date> out;
  std::chrono::sys_days day{first};
  while (out.size() < count) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(day);
    day += std::chrono::days{1};
  }
  return out;
}

inline Bar flat_bar(double close) { return {close, close, close, close, 1.0e6}; }

inline MarketPanel from_closes(std::vector<std::string> assets, std::vector<std::vector<double>> closes, Date first) {
  require(!assets.empty() && assets.size() == closes.size(), ErrorKind::Shape, "one close series per asset");
  MarketPanel panel;
  panel.assets = std::move(assets);
  panel.dates = business_days(first, closes.front().size());
  for (const auto& series : closes) {
    require(series.size() == panel.dates.size(), ErrorKind::Shape, "close series differ in length");
    std::vector<std::optional<Bar>> bars;
    for (double c : series) bars.emplace_back(flat_bar(c));
    panel.bars.push_back(std::move(bars));
  }
  return panel;
}

/// Deterministic geometric drift: asset i grows by (1 + rates[i]) every day.
inline MarketPanel drift_market(const std::vector<double>& rates, std::size_t dates) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> closes;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    names.push_back("D" + std::to_string(i));
    std::vector<double> series{100.0};
    for (std::size_t t = 1; t < dates; ++t) series.push_back(series.back() * (1.0 + rates[i]));
    closes.push_back(std::move(series));
  }
  return from_closes(std::move(names), std::move(closes), std::chrono::year{2020} / 1 / 1);
}

struct RegimeParams {
  std::size_t assets = 5;
  std::size_t dates = 750;
  double switch_probability = 0.02;  // per day
  double drift_spread = 0.0015;      // daily mean gap between favoured and unfavoured assets
  double volatility = 0.01;          // daily
  double common_factor = 0.5;        // loading on a shared market shock
  std::uint64_t seed = 7;
  bool with_benchmark = true;
};

/// Two-regime market: in regime 0 the first half of the assets drifts up and
/// the rest down, regime 1 swaps the roles. Daily log returns are Gaussian
/// with a shared market factor. The benchmark is the equal-weight index.
inline MarketPanel regime_market(const RegimeParams& p) {
  require(p.assets >= 1 && p.dates >= 2, ErrorKind::Validation, "regime market needs assets and dates");
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::vector<double>> closes(p.assets, std::vector<double>{100.0});
  std::vector<double> index{100.0};
  int regime = 0;
  const double idio = p.volatility * std::sqrt(1.0 - p.common_factor * p.common_factor);
  for (std::size_t t = 1; t < p.dates; ++t) {
    if (uniform(rng) < p.switch_probability) regime = 1 - regime;
    const double market = normal(rng);
    double index_growth = 0.0;
    for (std::size_t a = 0; a < p.assets; ++a) {
      const bool favoured = (a < (p.assets + 1) / 2) == (regime == 0);
      const double mu = favoured ? 0.5 * p.drift_spread : -0.5 * p.drift_spread;
      const double r = mu + p.volatility * p.common_factor * market + idio * normal(rng);
      const double growth = std::exp(r);
      index_growth += growth / static_cast<double>(p.assets);
      closes[a].push_back(closes[a].back() * growth);
    }
    index.push_back(index.back() * index_growth);
  }
  std::vector<std::string> names;
  for (std::size_t a = 0; a < p.assets; ++a) names.push_back("SYN" + std::to_string(a + 1));
  MarketPanel panel = from_closes(std::move(names), std::move(closes), std::chrono::year{2015} / 1 / 2);
  if (p.with_benchmark) panel.benchmark = std::move(index);
  panel.benchmark_name = p.with_benchmark ? "SYNIDX" : "";
  return panel;
}

}  // namespace kdlab::synthetic
