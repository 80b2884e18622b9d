#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "kdlab/backtest_env.hpp"
#include "kdlab/error.hpp"
#include "kdlab/market_data.hpp"
#include "kdlab/simplex.hpp"

namespace kdlab {

struct MomentEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t window = 0;

  std::size_t assets() const { return static_cast<std::size_t>(mean.size()); }
};

/// Sample mean and covariance over rows [end_row - window, end_row), then the
/// covariance is lifted by eps*I so its smallest eigenvalue is at least 1e-8.
inline MomentEstimate estimate_moments(const ReturnMatrix& returns, std::size_t window, std::size_t end_row) {
  require(window >= 2, ErrorKind::Validation, "window must be >= 2");
  require(end_row <= returns.rows() && end_row >= window, ErrorKind::InsufficientHistory,
          "need " + std::to_string(window) + " return rows, have " + std::to_string(std::min(end_row, returns.rows())));
  const auto n = static_cast<Eigen::Index>(returns.cols());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(window), n);
  for (std::size_t r = 0; r < window; ++r)
    for (Eigen::Index a = 0; a < n; ++a) x(static_cast<Eigen::Index>(r), a) = returns.values[end_row - window + r][a];

  MomentEstimate m;
  m.window = window;
  m.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  m.covariance = (centered.transpose() * centered) / static_cast<double>(window - 1);
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose());

  const double lambda_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.covariance, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .minCoeff();
  const double eps = std::max(0.0, 1e-8 - lambda_min);
  m.covariance.diagonal().array() += eps;
  return m;
}

inline MomentEstimate estimate_moments(const ReturnMatrix& returns, std::size_t window) {
  return estimate_moments(returns, window, returns.rows());
}

namespace detail {

inline void require_finite(const MomentEstimate& m) {
  require(m.assets() > 0 && m.covariance.rows() == m.mean.size() && m.covariance.cols() == m.mean.size(),
          ErrorKind::Shape, "moment shapes disagree");
  require(m.mean.allFinite() && m.covariance.allFinite(), ErrorKind::Numeric, "non-finite moments");
}

inline double largest_eigenvalue(const Eigen::MatrixXd& sym) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

inline Eigen::VectorXd as_eigen(const WeightVector& w) {
  return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

inline WeightVector as_weights(const Eigen::VectorXd& v) { return WeightVector(v.data(), v.data() + v.size()); }

inline constexpr int kMaxIterations = 100000;
inline constexpr double kStepTolerance = 1e-10;

/// w <- P(w + step * direction(w)) from `w` until the update is below tolerance.
template <class Direction>
Eigen::VectorXd projected_ascent(Eigen::VectorXd w, double step, Direction&& direction) {
  for (int it = 0; it < kMaxIterations; ++it) {
    Eigen::VectorXd trial = w + step * direction(w);
    Eigen::VectorXd next = as_eigen(project_simplex(std::span<const double>(trial.data(), trial.size())));
    const double moved = (next - w).cwiseAbs().maxCoeff();
    w = std::move(next);
    if (moved < kStepTolerance) break;
  }
  return w;
}

}  // namespace detail

inline double tradeoff_objective(const MomentEstimate& m, const WeightVector& w, double lambda_risk) {
  Eigen::VectorXd v = detail::as_eigen(w);
  return v.dot(m.mean) - lambda_risk * v.dot(m.covariance * v);
}

inline double portfolio_variance(const MomentEstimate& m, const WeightVector& w) {
  Eigen::VectorXd v = detail::as_eigen(w);
  return v.dot(m.covariance * v);
}

inline double portfolio_return(const MomentEstimate& m, const WeightVector& w) {
  return detail::as_eigen(w).dot(m.mean);
}

/// Maximizes w'mu - lambda w'Sigma w over the simplex.
inline WeightVector solve_tradeoff(const MomentEstimate& m, double lambda_risk) {
  detail::require_finite(m);
  require(lambda_risk >= 0.0 && std::isfinite(lambda_risk), ErrorKind::Domain, "lambda_risk must be >= 0");
  const auto n = m.assets();
  if (lambda_risk == 0.0) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < m.mean.size(); ++i)
      if (m.mean[i] > m.mean[best]) best = i;
    WeightVector w(n, 0.0);
    w[static_cast<std::size_t>(best)] = 1.0;
    return w;
  }
  const double step = 0.01 / (lambda_risk * detail::largest_eigenvalue(m.covariance) +
                              m.mean.cwiseAbs().maxCoeff() + 1e-12);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  w = detail::projected_ascent(std::move(w), step, [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return m.mean - 2.0 * lambda_risk * (m.covariance * v);
  });
  return detail::as_weights(w);
}

/// Minimizes w'Sigma w subject to w'mu >= target via a quadratic penalty whose
/// weight grows tenfold from 1e2 until the constraint holds to 1e-6.
inline WeightVector solve_min_variance(const MomentEstimate& m, double target_return) {
  detail::require_finite(m);
  const double lo = m.mean.minCoeff();
  const double hi = m.mean.maxCoeff();
  const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  require(target_return >= lo - slack && target_return <= hi + slack, ErrorKind::Feasibility,
          "target return outside [min mu, max mu]");
  const auto n = m.assets();
  if (n == 1) return {1.0};

  const double sigma_max = detail::largest_eigenvalue(m.covariance);
  // Only the mean's component orthogonal to the all-ones direction survives projection.
  const double mu_sq = (m.mean.array() - m.mean.mean()).matrix().squaredNorm();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  double rho = 1e2;
  for (int escalation = 0; escalation <= 6; ++escalation, rho *= 10.0) {
    const double step = 1.0 / (2.0 * (sigma_max + rho * mu_sq) + 1e-300);
    w = detail::projected_ascent(std::move(w), step, [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      const double shortfall = std::max(0.0, target_return - v.dot(m.mean));
      return -2.0 * (m.covariance * v) + 2.0 * rho * shortfall * m.mean;
    });
    if (w.dot(m.mean) >= target_return - 1e-6) return detail::as_weights(w);
  }
  fail(ErrorKind::Feasibility, "return constraint not met after penalty escalation");
}

struct FrontierPoint {
  double risk = 0.0;
  double expected_return = 0.0;
  WeightVector weights;
};

/// `points` targets evenly spaced over [min mu, max mu], sorted by risk.
inline std::vector<FrontierPoint> efficient_frontier(const MomentEstimate& m, std::size_t points) {
  require(m.assets() >= 2, ErrorKind::Validation, "frontier needs at least 2 assets");
  require(points >= 2, ErrorKind::Validation, "frontier needs at least 2 points");
  const double lo = m.mean.minCoeff();
  const double hi = m.mean.maxCoeff();
  std::vector<FrontierPoint> out;
  for (std::size_t k = 0; k < points; ++k) {
    const double target = k + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    FrontierPoint p;
    p.weights = solve_min_variance(m, target);
    p.risk = std::sqrt(std::max(0.0, portfolio_variance(m, p.weights)));
    p.expected_return = portfolio_return(m, p.weights);
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    if (a.risk != b.risk) return a.risk < b.risk;
    return a.expected_return < b.expected_return;
  });
  return out;
}

struct TeacherRecord {
  Date date;
  std::vector<double> features;
  WeightVector target;
};

struct TeacherDataset {
  FeatureSpec spec;
  std::vector<TeacherRecord> records;
};

struct TeacherConfig {
  std::size_t window = 60;
  std::size_t rebalance_every = 5;
  double lambda_risk = 10.0;
};

/// Markowitz allocations at every rebalance date, each paired with the state
/// the agent would observe there. The weights-held block of each state is the
/// previous record's target (uniform for the first).
inline TeacherDataset teacher_allocations(const MarketPanel& panel, const TeacherConfig& teacher,
                                          const EnvConfig& env) {
  env.validate();
  require(teacher.rebalance_every >= 1, ErrorKind::Validation, "rebalance_every must be >= 1");
  require(teacher.window >= 2, ErrorKind::Validation, "window must be >= 2");
  require(panel.num_dates() >= teacher.window + 1, ErrorKind::InsufficientHistory,
          "panel has " + std::to_string(panel.num_dates()) + " dates, window needs " +
              std::to_string(teacher.window + 1));
  const ReturnMatrix returns = compute_returns(panel, ReturnKind::Simple);
  TeacherDataset data;
  data.spec = feature_spec(panel, env);
  WeightVector held = uniform_weights(panel.num_assets());
  for (std::size_t t = std::max(teacher.window, env.lookback); t < panel.num_dates(); t += teacher.rebalance_every) {
    MomentEstimate m = estimate_moments(returns, teacher.window, t);
    WeightVector target = solve_tradeoff(m, teacher.lambda_risk);
    data.records.push_back({panel.dates[t], make_state(panel, t, held, env), target});
    held = std::move(target);
  }
  return data;
}

inline void write_teacher_csv(const TeacherDataset& data, std::ostream& out) {
  out << "date";
  for (const auto& name : data.spec.column_names()) out << ',' << name;
  for (const auto& a : data.spec.assets) out << ",w_" << a;
  out << '\n';
  for (const auto& rec : data.records) {
    out << format_date(rec.date);
    for (double f : rec.features) out << ',' << detail::format_number(f);
    for (double w : rec.target) out << ',' << detail::format_number(w);
    out << '\n';
  }
}

}  // namespace kdlab
