// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   kdlab_acceptance --kdlab <path to kdlab binary> --work <scratch dir> [--only N]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grid_oracle.hpp"
#include "kdlab/cli_report.hpp"
#include "kdlab/kdlab.hpp"
#include "kdlab/synthetic.hpp"
#include "metrics_oracle.hpp"

using namespace kdlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Args {
  fs::path kdlab_bin;
  fs::path work = "acceptance_work";
  int only = 0;
};

Args g_args;

// ---------------------------------------------------------------- AC1

PortfolioTrajectory trajectory(std::vector<double> values) {
  auto dates = synthetic::business_days(std::chrono::year{2020} / 1 / 1, values.size());
  return trajectory_from_values(std::move(dates), std::move(values));
}

Outcome metrics_golden() {
  Outcome out;
  auto bench = returns_from_values(std::vector<double>{100, 105, 101, 110});
  auto m = report(trajectory({100, 110, 99, 121}), std::span<const double>(bench), {});
  std::ifstream in(std::string(KDLAB_TEST_DATA) + "/metrics_golden.csv");
  out.check(in.good(), "golden file missing");
  std::string line;
  std::getline(in, line);
  const auto row = m.row();
  std::size_t i = 0;
  double worst = 0.0;
  while (std::getline(in, line) && i < row.size()) {
    const auto comma = line.find(',');
    const std::string name = line.substr(0, comma), cell = line.substr(comma + 1);
    out.check(name == MetricsReport::kColumns[i], "column order differs at " + name);
    if (cell == "NA") {
      out.check(!row[i].has_value(), name + " should be undefined");
    } else if (!row[i]) {
      out.check(false, name + " undefined but golden has " + cell);
    } else {
      const double err = std::abs(*row[i] - std::stod(cell));
      worst = std::max(worst, err);
      out.check(err <= 1e-9, name + " off by " + fmt("%.3g", err));
    }
    ++i;
  }
  out.check(i == 12, "golden file does not hold 12 metrics");
  out.note("12 metrics, max abs error " + fmt("%.2g", worst));
  return out;
}

// ---------------------------------------------------------------- AC2

Outcome metrics_oracle() {
  Outcome out;
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> len(3, 120);
  std::normal_distribution<double> n(0.0004, 0.012);
  std::uniform_real_distribution<double> rf(-0.0002, 0.0004);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int periods = len(rng);
    std::vector<double> values{1000.0}, bench{10.0};
    for (int t = 0; t < periods; ++t) {
      values.push_back(values.back() * (1 + n(rng)));
      bench.push_back(bench.back() * (1 + n(rng)));
    }
    const MetricsOptions opt{trial % 2 ? rf(rng) : 0.0, 252.0};
    auto b = returns_from_values(bench);
    auto got = report(trajectory(values), std::span<const double>(b), opt).row();
    auto want = oracle::row(oracle::compute(values, &bench, opt.risk_free, opt.periods_per_year));
    for (std::size_t i = 0; i < 12; ++i) {
      if (got[i].has_value() != want[i].has_value()) {
        out.check(false, std::string(MetricsReport::kColumns[i]) + " definedness differs in trial " +
                             std::to_string(trial));
        continue;
      }
      if (!got[i]) continue;
      const double err = std::abs(*got[i] - *want[i]);
      worst = std::max(worst, err);
      if (err > 1e-9)
        out.check(false, std::string(MetricsReport::kColumns[i]) + " off by " + fmt("%.3g", err) + " in trial " +
                             std::to_string(trial));
    }
  }
  out.note("100 trajectories, max abs error " + fmt("%.2g", worst));
  return out;
}

// ---------------------------------------------------------------- AC3

MomentEstimate moments(std::vector<double> mean, std::vector<std::vector<double>> cov) {
  MomentEstimate m;
  const auto n = static_cast<Eigen::Index>(mean.size());
  m.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), n);
  m.covariance.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m.covariance(i, j) = cov[i][j];
  m.window = 60;
  return m;
}

Outcome markowitz_grid() {
  Outcome out;
  std::vector<std::pair<std::string, MomentEstimate>> fixtures = {
      {"diag3", moments({0.01, 0.02, 0.03}, {{1e-4, 0, 0}, {0, 4e-4, 0}, {0, 0, 9e-4}})},
      {"corr3", moments({0.004, 0.006, 0.005},
                        {{4e-4, 1e-4, -5e-5}, {1e-4, 9e-4, 2e-4}, {-5e-5, 2e-4, 2.5e-4}})},
      {"pair", moments({0.001, 0.003}, {{1e-4, 3e-5}, {3e-5, 4e-4}})},
      {"anti", moments({0.002, 0.002}, {{1e-4, -1e-4}, {-1e-4, 1e-4 + 1e-8}})},
      {"single", moments({0.002}, {{2e-4}})},
  };
  // a fixture estimated from a seeded market
  {
    synthetic::RegimeParams p;
    p.assets = 3;
    p.dates = 200;
    p.seed = 5;
    auto r = compute_returns(synthetic::regime_market(p), ReturnKind::Simple);
    fixtures.emplace_back("estimated", estimate_moments(r, 120));
  }

  double worst_w = 0.0, worst_obj = 0.0, worst_fine = 0.0;
  std::size_t problems = 0;
  // diagnostic only: how far the solver sits from a 0.0025-step grid
  auto fine_gap = [&](const WeightVector& w, const grid::Best& b) { worst_fine = std::max(worst_fine, b.distance(w)); };
  for (const auto& [name, m] : fixtures) {
    for (double lambda : {0.0, 1.0, 10.0, 100.0}) {
      auto w = solve_tradeoff(m, lambda);
      auto best = grid::tradeoff(m, lambda);
      fine_gap(w, grid::tradeoff(m, lambda, 400));
      const double dw = best.distance(w);
      const double dobj = std::abs(tradeoff_objective(m, w, lambda) - best.value);
      worst_w = std::max(worst_w, dw);
      worst_obj = std::max(worst_obj, dobj);
      out.check(on_simplex(w), name + " tradeoff off simplex");
      out.check(dw <= 0.02, name + " tradeoff lambda " + fmt("%g", lambda) + " weights off by " + fmt("%.3g", dw));
      out.check(dobj <= 1e-6, name + " tradeoff lambda " + fmt("%g", lambda) + " objective off by " + fmt("%.3g", dobj));
      ++problems;
    }
    const double lo = m.mean.minCoeff(), hi = m.mean.maxCoeff();
    for (int k = 0; k <= 4; ++k) {
      const double target = lo + (hi - lo) * k / 4.0;
      auto w = solve_min_variance(m, target);
      auto best = grid::min_variance(m, target);
      if (!best) continue;
      if (auto fine = grid::min_variance(m, target, 400)) fine_gap(w, *fine);
      const double dw = best->distance(w);
      const double dvar = std::abs(portfolio_variance(m, w) - best->value);
      worst_w = std::max(worst_w, dw);
      worst_obj = std::max(worst_obj, dvar);
      out.check(portfolio_return(m, w) >= target - 1e-6, name + " min-variance misses its target");
      out.check(dw <= 0.02, name + " min-variance target " + fmt("%g", target) + " weights off by " + fmt("%.3g", dw));
      out.check(dvar <= 1e-6, name + " min-variance variance off by " + fmt("%.3g", dvar));
      ++problems;
    }
    if (m.assets() >= 2) {
      auto frontier = efficient_frontier(m, 12);
      for (std::size_t i = 1; i < frontier.size(); ++i)
        out.check(frontier[i].expected_return >= frontier[i - 1].expected_return - 1e-9,
                  name + " frontier return decreases with risk");
    }
  }
  out.note(std::to_string(problems) + " problems over " + std::to_string(fixtures.size()) +
           " fixtures, max weight gap " + fmt("%.3g", worst_w) + ", max objective gap " + fmt("%.2g", worst_obj) +
           ", max weight gap to a 0.0025 grid " + fmt("%.3g", worst_fine));
  return out;
}

// ---------------------------------------------------------------- AC4

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

template <class F>
double worst_param_error(const nn::Mlp& net, const nn::Vector& analytic, F&& f) {
  const nn::Vector params = nn::flatten(net);
  nn::Mlp probe = net;
  double worst = 0.0;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    nn::Vector p = params;
    p[i] += h;
    nn::unflatten(probe, p);
    const double up = f(probe);
    p[i] -= 2 * h;
    nn::unflatten(probe, p);
    const double down = f(probe);
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2 * h)));
  }
  return worst;
}

template <class F>
double worst_vector_error(const std::vector<double>& x, const std::vector<double>& analytic, F&& f) {
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto up = x, down = x;
    up[i] += h;
    down[i] -= h;
    worst = std::max(worst, rel_error(analytic[i], (f(up) - f(down)) / (2 * h)));
  }
  return worst;
}

std::vector<Transition> random_batch(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t assets) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::exponential_distribution<double> e(1.0);
  std::vector<Transition> batch;
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    for (std::size_t k = 0; k < dim; ++k) t.state.push_back(g(rng)), t.next_state.push_back(g(rng));
    double s = 0.0;
    for (std::size_t a = 0; a < assets; ++a) s += t.action.emplace_back(e(rng));
    for (double& a : t.action) a /= s;
    t.reward = 0.01 * g(rng);
    batch.push_back(std::move(t));
  }
  return batch;
}

Outcome gradient_checks() {
  Outcome out;
  std::map<std::string, double> worst;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed * 1000 + 7);
    std::normal_distribution<double> g(0.0, 1.0);

    for (auto head : {nn::OutputHead::Linear, nn::OutputHead::SimplexSoftmax}) {
      nn::Mlp net = nn::mlp_init({5, 7, 6, 3}, nn::Activation::Tanh, head, seed);
      for (auto& b : net.biases)
        for (auto& v : b) v = 0.1 * g(rng);
      nn::Matrix x(5, 4), c(3, 4);
      for (auto& v : x.reshaped()) v = g(rng);
      for (auto& v : c.reshaped()) v = g(rng);
      auto probe = [&](const nn::Mlp& n, const nn::Matrix& in) { return nn::forward(n, in).output.cwiseProduct(c).sum(); };
      auto grads = nn::backward(net, nn::forward(net, x), c);
      double e = worst_param_error(net, nn::flatten(grads), [&](const nn::Mlp& n) { return probe(n, x); });
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        nn::Matrix xp = x, xm = x;
        xp.reshaped()[k] += 1e-5;
        xm.reshaped()[k] -= 1e-5;
        e = std::max(e, rel_error(grads.input.reshaped()[k], (probe(net, xp) - probe(net, xm)) / 2e-5));
      }
      worst["backward"] = std::max(worst["backward"], e);
    }

    std::vector<double> pred(6), target(6);
    for (auto& v : pred) v = g(rng);
    for (auto& v : target) v = g(rng);
    worst["mse"] = std::max(worst["mse"], worst_vector_error(pred, nn::mse_loss(pred, target).gradient, [&](const auto& p) {
                              return nn::mse_loss(p, target).loss;
                            }));

    std::vector<double> zs(4), zt(4), hard(4);
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) zs[i] = g(rng), zt[i] = g(rng), s += (hard[i] = std::exp(g(rng)));
    for (double& v : hard) v /= s;
    const double T = 1.0 + static_cast<double>(seed) * 0.5, lambda = 0.5;
    worst["kd"] = std::max(worst["kd"], worst_vector_error(zs, nn::kd_loss(zs, zt, hard, T, lambda).gradient,
                                                           [&](const auto& z) { return nn::kd_loss(z, zt, hard, T, lambda).loss; }));

    auto batch = random_batch(rng, 6, 4, 3);
    nn::Mlp critic = nn::mlp_init({7, 8, 1}, nn::Activation::Tanh, nn::OutputHead::Linear, seed + 10);
    nn::Vector y(6);
    for (auto& v : y) v = 0.1 * g(rng);
    worst["critic"] = std::max(worst["critic"], worst_param_error(critic, nn::flatten(critic_loss(critic, batch, y).grads),
                                                                  [&](const nn::Mlp& c) { return critic_loss(c, batch, y).value; }));

    nn::Mlp actor = nn::mlp_init({4, 8, 3}, nn::Activation::Tanh, nn::OutputHead::SimplexSoftmax, seed + 20);
    nn::Matrix states(4, 6);
    for (auto& v : states.reshaped()) v = g(rng);
    worst["actor"] = std::max(worst["actor"], worst_param_error(actor, nn::flatten(actor_objective(actor, critic, states).grads),
                                                                [&](const nn::Mlp& a) { return actor_objective(a, critic, states).value; }));
  }
  std::string summary;
  for (const auto& [name, e] : worst) {
    out.check(e < 1e-4, name + " relative error " + fmt("%.3g", e));
    summary += (summary.empty() ? "" : ", ") + name + " " + fmt("%.1e", e);
  }
  out.note("5 seeds, max relative error: " + summary);
  return out;
}

// ---------------------------------------------------------------- AC5

Outcome distillation_convergence() {
  Outcome out;
  synthetic::RegimeParams p;
  p.dates = 560;
  p.seed = 21;
  const MarketPanel panel = synthetic::regime_market(p);
  EnvConfig env;
  const TeacherDataset data = teacher_allocations(panel, TeacherConfig{60, 1, 10.0}, env);
  out.check(data.records.size() == 500, "dataset has " + std::to_string(data.records.size()) + " records");
  const std::size_t cut = data.records.size() * 4 / 5;
  const std::vector<TeacherRecord> fit(data.records.begin(), data.records.begin() + static_cast<std::ptrdiff_t>(cut));
  const std::vector<TeacherRecord> held(data.records.begin() + static_cast<std::ptrdiff_t>(cut), data.records.end());

  TrainConfig tc;
  tc.seed = 5;
  tc.distill.epochs = 2000;
  AgentCheckpoint agent = init_agent(data.spec, env, tc);
  const double fit_before = teacher_mse(agent.actor, fit);
  const double held_before = teacher_mse(agent.actor, held);
  const auto curve = distill_pretrain(agent.actor, fit, tc.distill, tc.seed);
  const double fit_after = teacher_mse(agent.actor, fit);
  const double held_after = teacher_mse(agent.actor, held);
  std::size_t first = 0;
  while (first < curve.size() && curve[first] > 1e-3) ++first;

  out.check(fit_after <= 1e-3, "training MSE " + fmt("%.3g", fit_after) + " after 2000 epochs");
  out.check(held_after < held_before, "held-out MSE did not fall: " + fmt("%.3g", held_before) + " -> " +
                                          fmt("%.3g", held_after));
  out.note("train MSE " + fmt("%.2e", fit_before) + " -> " + fmt("%.2e", fit_after) + " (epoch curve below 1e-3 from " +
           (first < curve.size() ? std::to_string(first + 1) : std::string("never")) + "), held-out " +
           fmt("%.2e", held_before) + " -> " + fmt("%.2e", held_after));
  return out;
}

// ---------------------------------------------------------------- AC6

Outcome ddpg_drift() {
  Outcome out;
  const MarketPanel panel = synthetic::drift_market({0.002, -0.002}, 300);
  EnvConfig env;
  env.cost_rate = 0.0;
  const MarketPanel train_panel = slice(panel, 0, 200);
  const MarketPanel test_panel = slice(panel, 200 - env.lookback, 300);
  const TeacherDataset teacher = teacher_allocations(train_panel, TeacherConfig{60, 5, 10.0}, env);
  TrainConfig tc;
  tc.seed = 11;
  tc.episodes = 10;
  const Environment train_env(train_panel, env);
  const TrainResult result = train(train_env, tc, &teacher);

  const Evaluation eval = evaluate(result.agent, test_panel, env, false);
  double mean_a = 0.0;
  const std::size_t periods = eval.trajectory.periods();
  for (std::size_t t = 0; t < periods; ++t) mean_a += eval.trajectory.weights[t][0] / static_cast<double>(periods);
  const Environment test_env(test_panel, env);
  const auto crp = run_crp(test_env, uniform_weights(2), env.lookback);
  const double crp_tr = crp.values.back() / crp.values.front() - 1.0;
  out.check(mean_a >= 0.9, "mean weight on the rising asset " + fmt("%.4f", mean_a));
  out.check(eval.metrics.total_return > crp_tr,
            "total return " + fmt("%.5f", eval.metrics.total_return) + " does not beat CRP " + fmt("%.5f", crp_tr));
  out.note("mean weight on rising asset " + fmt("%.4f", mean_a) + ", TR " + fmt("%.4f", eval.metrics.total_return) +
           " vs uniform CRP " + fmt("%.4f", crp_tr) + " over " + std::to_string(periods) + " test periods");
  return out;
}

// ---------------------------------------------------------------- AC7

constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

std::size_t episodes_to_reach(const std::vector<EpisodeLog>& log, double threshold) {
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i].cumulative_reward >= threshold) return i + 1;
  return kNever;
}

std::string show(std::size_t e) { return e == kNever ? "never" : std::to_string(e); }

Outcome distillation_speedup() {
  Outcome out;
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    synthetic::RegimeParams p;
    p.dates = 400;
    p.seed = 100 + seed;
    p.switch_probability = 0.01;
    p.drift_spread = 0.003;
    p.with_benchmark = false;
    const MarketPanel panel = synthetic::regime_market(p);
    EnvConfig env;
    const Environment environment(panel, env);
    const TeacherDataset teacher = teacher_allocations(panel, TeacherConfig{30, 5, 10.0}, env);

    // the bar: the equal-weight portfolio's log growth over one episode
    const auto crp = run_crp(environment, uniform_weights(panel.num_assets()), env.lookback);
    const double threshold = std::log(crp.values.back() / crp.values.front());

    TrainConfig tc;
    tc.seed = seed;
    tc.episodes = 15;
    const auto distilled = train(environment, tc, &teacher).episodes;
    tc.distill.enabled = false;
    const auto fresh = train(environment, tc, nullptr).episodes;
    const std::size_t d = episodes_to_reach(distilled, threshold);
    const std::size_t r = episodes_to_reach(fresh, threshold);
    const bool win = d != kNever && d <= r;
    wins += win ? 1 : 0;
    per_seed += (per_seed.empty() ? "" : " ") + std::to_string(seed) + ":" + show(d) + "/" + show(r);
  }
  out.check(wins >= 4, "distilled agent no slower in only " + std::to_string(wins) + " of 5 seeds (" + per_seed + ")");
  out.note(std::to_string(wins) + "/5 seeds, episodes to threshold distilled/random " + per_seed);
  return out;
}

// ---------------------------------------------------------------- AC8

Outcome baseline_identities() {
  Outcome out;
  std::mt19937_64 rng(88);
  std::normal_distribution<double> g(0.0, 0.02);
  double worst_crp = 0.0, worst_gap = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t assets = 2 + static_cast<std::size_t>(trial % 4);
    std::vector<std::vector<double>> closes(assets, std::vector<double>{100.0});
    for (int t = 1; t < 80; ++t)
      for (auto& c : closes) c.push_back(c.back() * std::exp(g(rng)));
    std::vector<std::string> names;
    for (std::size_t a = 0; a < assets; ++a) names.push_back("S" + std::to_string(a));
    const MarketPanel panel = synthetic::from_closes(names, closes, std::chrono::year{2022} / 1 / 3);
    EnvConfig cfg;
    cfg.cost_rate = trial % 2 ? 0.001 : 0.0;
    const Environment env(panel, cfg);

    const auto eg = run_eg(env, 0.0, 0);
    const auto crp = run_crp(env, uniform_weights(assets), 0);
    out.check(eg.values == crp.values && eg.weights == crp.weights, "EG(0) differs from uniform CRP");

    EnvConfig free = cfg;
    free.cost_rate = 0.0;
    const Environment free_env(panel, free);
    const WeightVector b = solve_bcrp(panel);
    const double bcrp = run_crp(free_env, b, 0).values.back();
    for (std::size_t a = 0; a < assets; ++a) {
      WeightVector e(assets, 0.0);
      e[a] = 1.0;
      const double bah = run_bah(free_env, e, 0).values.back();
      worst_gap = std::min(worst_gap, bcrp - bah);
      out.check(bcrp >= bah - 1e-6, "BCRP below single-asset B&H by " + fmt("%.3g", bah - bcrp));
    }

    const WeightVector w = kdtest::random_simplex(rng, assets);
    free.lookback = 1 + static_cast<std::size_t>(trial % 5);
    const auto traj = run_episode(panel, [&](const EnvState&) { return w; }, free);
    const auto x = price_relatives(panel);
    double closed = free.initial_value;
    for (std::size_t t = free.lookback; t + 1 < panel.num_dates(); ++t) closed *= dot(w, x.values[t]);
    const double rel = std::abs(traj.values.back() / closed - 1.0);
    worst_crp = std::max(worst_crp, rel);
    out.check(rel <= 1e-10, "constant policy differs from closed-form CRP by " + fmt("%.3g", rel));
  }
  out.note("20 panels, EG(0) bitwise equal, min BCRP - B&H " + fmt("%.3g", worst_gap) + ", CRP closed-form rel error " +
           fmt("%.2g", worst_crp));
  return out;
}

// ---------------------------------------------------------------- AC9

Outcome environment_properties() {
  Outcome out;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> n_assets(1, 6), n_dates(2, 60), look(1, 3);
  std::uniform_real_distribution<double> cost(0.0, 0.05), vol(0.001, 0.08);
  double worst_sum = 0.0;
  for (int episode = 0; episode < 1000; ++episode) {
    const std::size_t assets = n_assets(rng);
    EnvConfig cfg;
    cfg.lookback = look(rng);
    // at least one tradable period after the lookback
    const MarketPanel panel = kdtest::random_panel(rng, assets, cfg.lookback + n_dates(rng), vol(rng));
    cfg.cost_rate = cost(rng);
    cfg.reward = RewardKind::LogReturn;
    std::vector<WeightVector> actions;
    for (std::size_t t = 0; t < panel.num_dates(); ++t) actions.push_back(kdtest::random_simplex(rng, assets));
    auto policy = [&](const EnvState& s) { return actions[s.t]; };

    const Environment env(panel, cfg);
    EnvState s = env.reset();
    double reward_sum = 0.0;
    bool simplex_ok = true, positive = true;
    while (true) {
      StepResult r = env.step(s, actions[s.t]);
      reward_sum += r.reward;
      positive = positive && r.next.value > 0.0;
      double total = 0.0;
      for (double w : r.next.weights) total += w;
      simplex_ok = simplex_ok && on_simplex(r.next.weights) && std::abs(total - 1.0) <= 1e-12;
      s = std::move(r.next);
      if (r.done) break;
    }
    const double identity = std::abs(reward_sum - std::log(s.value / cfg.initial_value));
    worst_sum = std::max(worst_sum, identity);
    out.check(identity <= 1e-9, "log-reward sum identity off by " + fmt("%.3g", identity));
    out.check(positive, "non-positive portfolio value");
    out.check(simplex_ok, "drifted weights left the simplex");

    const double with_cost = run_episode(panel, policy, cfg).values.back();
    EnvConfig cheaper = cfg;
    cheaper.cost_rate = cfg.cost_rate / 2;
    const double half_cost = run_episode(panel, policy, cheaper).values.back();
    cheaper.cost_rate = 0.0;
    const double no_cost = run_episode(panel, policy, cheaper).values.back();
    out.check(with_cost <= half_cost && half_cost <= no_cost, "raising the cost rate increased final value");
  }
  out.note("1000 episodes, max log-reward identity error " + fmt("%.2g", worst_sum));
  return out;
}

// ---------------------------------------------------------------- AC10

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
  Outcome out;
  const fs::path conf = fs::path(KDLAB_SOURCE_DIR) / "data" / "synthetic5.conf";
  out.check(fs::exists(conf), "bundled config missing");
  out.check(!g_args.kdlab_bin.empty() && fs::exists(g_args.kdlab_bin), "kdlab binary not given or missing");
  if (!out.pass) return out;
  const cli::RunConfig config = cli::load_run_config(conf);
  out.check(config.train.episodes == 5, "bundled config does not train for 5 episodes");

  std::vector<fs::path> dirs = {g_args.work / "e2e_run1", g_args.work / "e2e_run2"};
  for (const auto& dir : dirs) {
    // console logs echo the output path, so they live beside the run rather than in it
    const fs::path logs = dir.string() + "_logs";
    fs::remove_all(dir);
    fs::remove_all(logs);
    fs::create_directories(dir);
    fs::create_directories(logs);
    for (const char* cmd : {"ingest", "distill", "train", "backtest", "report"}) {
      const int code = run(g_args.kdlab_bin.string() + " " + cmd + " --config " + conf.string() + " --out " +
                           dir.string() + " > " + (logs / (std::string(cmd) + ".log")).string() + " 2>&1");
      out.check(code == 0, std::string(cmd) + " exited with " + std::to_string(code));
      if (code != 0) return out;
    }
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto name = entry.path().filename();
    const fs::path twin = dirs[1] / name;
    out.check(fs::exists(twin), name.string() + " missing from the second run");
    if (!fs::exists(twin)) continue;
    out.check(cli::read_file(entry.path()) == cli::read_file(twin), name.string() + " differs between runs");
    ++compared;
  }
  for (const char* must : {"distilled.json", "kdd.json", "metrics.csv", "table.csv", "values.svg"})
    out.check(fs::exists(dirs[0] / must), std::string(must) + " not produced");

  std::istringstream table(cli::read_file(dirs[0] / "table.csv"));
  std::string header;
  std::getline(table, header);
  out.check(header == "strategy,TR,AR,Sharpe,MD,SR,Beta,Alpha,IR,CR,WR,PLR,Volatility",
            "table header is '" + header + "'");
  std::size_t rows = 0;
  for (std::string line; std::getline(table, line);) {
    ++rows;
    out.check(kdlab::detail::split_csv_line(line).size() == 13, "table row with the wrong cell count");
  }
  out.note(std::to_string(compared) + " files byte-identical across two runs, table has 12 metric columns and " +
           std::to_string(rows) + " rows");
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // <= 0: no limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--kdlab" && i + 1 < argc) g_args.kdlab_bin = argv[++i];
    else if (a == "--work" && i + 1 < argc) g_args.work = argv[++i];
    else if (a == "--only" && i + 1 < argc) g_args.only = std::atoi(argv[++i]);
    else {
      std::cerr << "usage: kdlab_acceptance --kdlab <bin> --work <dir> [--only N]\n";
      return 2;
    }
  }
  fs::create_directories(g_args.work);

  const std::vector<Criterion> criteria = {
      {1, "metrics golden fixture", 1, metrics_golden},
      {2, "metrics oracle equivalence", 5, metrics_oracle},
      {3, "Markowitz vs simplex-grid brute force", 30, markowitz_grid},
      {4, "gradient checks", 30, gradient_checks},
      {5, "distillation convergence", 120, distillation_convergence},
      {6, "DDPG sanity on a drift market", 300, ddpg_drift},
      {7, "distillation speed-up", 900, distillation_speedup},
      {8, "baseline identities", 0, baseline_identities},
      {9, "environment properties", 60, environment_properties},
      {10, "end-to-end determinism", 180, end_to_end},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (g_args.only != 0 && c.id != g_args.only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0 && secs > c.limit_seconds)
      o.check(false, "took " + fmt("%.1f", secs) + " s, limit " + fmt("%.0f", c.limit_seconds) + " s");
    std::cout << "AC" << c.id << (c.id < 10 ? "  " : " ") << (o.pass ? "PASS" : "FAIL") << "  " << c.name << " ("
              << fmt("%.2f", secs) << " s): " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
