#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "kdlab/error.hpp"

namespace kdlab {

/// Long-only, fully invested allocation: non-negative entries summing to one.
using WeightVector = std::vector<double>;

inline WeightVector uniform_weights(std::size_t n) {
  return WeightVector(n, 1.0 / static_cast<double>(n));
}

inline bool on_simplex(std::span<const double> w, double tol = 1e-9) {
  if (w.empty()) return false;
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < -tol) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

/// Euclidean projection onto the probability simplex (sort and threshold).
inline WeightVector project_simplex(std::span<const double> v) {
  require(!v.empty(), ErrorKind::Shape, "cannot project an empty vector onto the simplex");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) theta = candidate;
  }
  WeightVector w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  return w;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double l_inf_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace kdlab
