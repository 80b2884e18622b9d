#pragma once

#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kdlab/kdlab.hpp"
#include "kdlab/synthetic.hpp"

namespace kdtest {

inline kdlab::MarketPanel panel_from_closes(std::vector<std::vector<double>> closes) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < closes.size(); ++i) names.push_back(std::string(1, static_cast<char>('A' + i)));
  return kdlab::synthetic::from_closes(std::move(names), std::move(closes), std::chrono::year{2021} / 3 / 1);
}

/// Closes from per-period relatives, starting at 1.
inline std::vector<double> closes_from_relatives(const std::vector<double>& x) {
  std::vector<double> c{1.0};
  for (double r : x) c.push_back(c.back() * r);
  return c;
}

inline kdlab::MarketPanel random_panel(std::mt19937_64& rng, std::size_t assets, std::size_t dates,
                                       double vol = 0.02) {
  std::normal_distribution<double> n(0.0, vol);
  std::vector<std::vector<double>> closes(assets, std::vector<double>{100.0});
  for (std::size_t t = 1; t < dates; ++t)
    for (auto& c : closes) c.push_back(c.back() * std::exp(n(rng)));
  return panel_from_closes(std::move(closes));
}

inline kdlab::WeightVector random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  kdlab::WeightVector w(n);
  double s = 0.0;
  for (double& v : w) s += (v = e(rng));
  for (double& v : w) v /= s;
  return w;
}

inline kdlab::MarketPanel parse(const std::string& csv) {
  std::istringstream in(csv);
  return kdlab::parse_ohlcv_csv(in);
}

template <class F>
kdlab::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const kdlab::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a kdlab::Error";
  return kdlab::ErrorKind::Io;
}

/// Every point of the simplex grid with spacing 1/steps, for n <= 3.
inline std::vector<kdlab::WeightVector> simplex_grid(std::size_t n, int steps) {
  std::vector<kdlab::WeightVector> out;
  const double h = 1.0 / steps;
  if (n == 1) return {{1.0}};
  if (n == 2) {
    for (int i = 0; i <= steps; ++i) out.push_back({i * h, (steps - i) * h});
    return out;
  }
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) out.push_back({i * h, j * h, (steps - i - j) * h});
  return out;
}

}  // namespace kdtest
