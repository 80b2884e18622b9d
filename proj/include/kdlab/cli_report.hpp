#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdlab/kdlab.hpp"

namespace kdlab::cli {

namespace fs = std::filesystem;

// ---- run configuration ----

struct RunConfig {
  fs::path data;
  std::string benchmark;
  MissingPolicy missing = MissingPolicy::DropAsset;
  Date train_end{};
  Date valid_end{};
  EnvConfig env;
  TeacherConfig teacher;
  TrainConfig train;
  BaselineParams baselines;
  MetricsOptions metrics;
  std::size_t frontier_points = 20;
  fs::path out = "out";
  std::vector<std::string> strategies = {"bah", "crp", "bcrp", "eg", "pamr", "olmar", "markowitz", "mkd", "kdd"};
};

inline const std::vector<std::string>& known_strategies() {
  static const std::vector<std::string> names = {"bah",   "crp",       "bcrp", "eg",  "pamr",
                                                 "olmar", "markowitz", "mkd",  "kdd", "ddpg"};
  return names;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Reader {
  std::map<std::string, std::string> values;
  std::string origin;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  double real(const std::string& key) const {
    auto v = kdlab::detail::parse_double(values.at(key));
    require(v.has_value() && std::isfinite(*v), ErrorKind::Validation,
            origin + ": '" + key + "' is not a number: " + values.at(key));
    return *v;
  }

  std::size_t count(const std::string& key) const {
    const double v = real(key);
    require(v >= 0.0 && v == std::floor(v), ErrorKind::Validation, origin + ": '" + key + "' must be a count");
    return static_cast<std::size_t>(v);
  }

  Date date(const std::string& key) const {
    auto d = parse_date(values.at(key));
    require(d.has_value(), ErrorKind::Validation, origin + ": '" + key + "' is not a YYYY-MM-DD date");
    return *d;
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> allowed) const {
    const std::string& v = values.at(key);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : "|") + a;
    fail(ErrorKind::Validation, origin + ": '" + key + "' must be one of " + list);
  }
};

}  // namespace detail

/// Parses the flat `key = value` format; '#' starts a comment. Relative paths
/// are resolved against the config file's directory.
inline RunConfig parse_run_config(std::istream& in, const fs::path& base_dir, const std::string& origin) {
  detail::Reader r;
  r.origin = origin;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Parse, origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    require(!r.has(key), ErrorKind::Duplicate, origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    r.values[key] = detail::trim(line.substr(eq + 1));
  }

  RunConfig c;
  using Setter = std::function<void()>;
  const std::map<std::string, Setter> setters = {
      {"data", [&] { c.data = base_dir / r.values.at("data"); }},
      {"benchmark", [&] { c.benchmark = r.values.at("benchmark"); }},
      {"missing",
       [&] {
         c.missing = r.choice("missing", {"drop-asset", "forward-fill"}) == "drop-asset" ? MissingPolicy::DropAsset
                                                                                       : MissingPolicy::ForwardFill;
       }},
      {"train_end", [&] { c.train_end = r.date("train_end"); }},
      {"valid_end", [&] { c.valid_end = r.date("valid_end"); }},
      {"out", [&] { c.out = base_dir / r.values.at("out"); }},
      {"strategies", [&] { c.strategies = detail::split_list(r.values.at("strategies")); }},
      {"seed", [&] { c.train.seed = r.count("seed"); }},
      {"env.lookback", [&] { c.env.lookback = r.count("env.lookback"); }},
      {"env.cost_rate", [&] { c.env.cost_rate = r.real("env.cost_rate"); }},
      {"env.reward",
       [&] {
         c.env.reward = r.choice("env.reward", {"log-return", "value-change"}) == "log-return" ? RewardKind::LogReturn
                                                                                             : RewardKind::ValueChange;
       }},
      {"env.initial_value", [&] { c.env.initial_value = r.real("env.initial_value"); }},
      {"env.features",
       [&] {
         c.env.features = r.choice("env.features", {"relatives", "relatives+indicators"}) == "relatives"
                              ? FeatureSet::Relatives
                              : FeatureSet::RelativesWithIndicators;
       }},
      {"teacher.window", [&] { c.teacher.window = r.count("teacher.window"); }},
      {"teacher.rebalance_every", [&] { c.teacher.rebalance_every = r.count("teacher.rebalance_every"); }},
      {"teacher.lambda", [&] { c.teacher.lambda_risk = r.real("teacher.lambda"); }},
      {"frontier.points", [&] { c.frontier_points = r.count("frontier.points"); }},
      {"train.gamma", [&] { c.train.gamma = r.real("train.gamma"); }},
      {"train.tau", [&] { c.train.tau = r.real("train.tau"); }},
      {"train.batch_size", [&] { c.train.batch_size = r.count("train.batch_size"); }},
      {"train.episodes", [&] { c.train.episodes = r.count("train.episodes"); }},
      {"train.buffer_capacity", [&] { c.train.buffer_capacity = r.count("train.buffer_capacity"); }},
      {"train.actor_lr", [&] { c.train.actor_lr = r.real("train.actor_lr"); }},
      {"train.critic_lr", [&] { c.train.critic_lr = r.real("train.critic_lr"); }},
      {"train.hidden",
       [&] {
         c.train.hidden.clear();
         for (const auto& h : detail::split_list(r.values.at("train.hidden"))) {
           auto v = kdlab::detail::parse_double(h);
           require(v && *v >= 1 && *v == std::floor(*v), ErrorKind::Validation, origin + ": bad train.hidden entry");
           c.train.hidden.push_back(static_cast<std::size_t>(*v));
         }
       }},
      {"noise.kind",
       [&] {
         c.train.noise.kind = r.choice("noise.kind", {"ou", "gaussian"}) == "ou" ? NoiseKind::OrnsteinUhlenbeck
                                                                              : NoiseKind::Gaussian;
       }},
      {"noise.theta", [&] { c.train.noise.theta = r.real("noise.theta"); }},
      {"noise.sigma", [&] { c.train.noise.sigma = r.real("noise.sigma"); }},
      {"noise.dt", [&] { c.train.noise.dt = r.real("noise.dt"); }},
      {"distill.loss",
       [&] {
         c.train.distill.loss = r.choice("distill.loss", {"mse", "kd"}) == "mse" ? DistillLoss::Mse : DistillLoss::Kd;
       }},
      {"distill.temperature", [&] { c.train.distill.temperature = r.real("distill.temperature"); }},
      {"distill.lambda", [&] { c.train.distill.lambda = r.real("distill.lambda"); }},
      {"distill.epochs", [&] { c.train.distill.epochs = r.count("distill.epochs"); }},
      {"distill.batch_size", [&] { c.train.distill.batch_size = r.count("distill.batch_size"); }},
      {"distill.lr", [&] { c.train.distill.lr = r.real("distill.lr"); }},
      {"eg.eta", [&] { c.baselines.eg_eta = r.real("eg.eta"); }},
      {"pamr.epsilon", [&] { c.baselines.pamr_epsilon = r.real("pamr.epsilon"); }},
      {"olmar.window", [&] { c.baselines.olmar_window = r.count("olmar.window"); }},
      {"olmar.epsilon", [&] { c.baselines.olmar_epsilon = r.real("olmar.epsilon"); }},
      {"metrics.risk_free", [&] { c.metrics.risk_free = r.real("metrics.risk_free"); }},
      {"metrics.periods_per_year", [&] { c.metrics.periods_per_year = r.real("metrics.periods_per_year"); }},
  };
  for (const auto& [key, value] : r.values) {
    auto it = setters.find(key);
    require(it != setters.end(), ErrorKind::Validation, origin + ": unknown key '" + key + "'");
    it->second();
  }
  for (const char* key : {"data", "train_end", "valid_end"})
    require(r.has(key), ErrorKind::Validation, origin + ": missing required key '" + std::string(key) + "'");
  require(c.train_end < c.valid_end, ErrorKind::Validation, origin + ": train_end must precede valid_end");
  for (const auto& s : c.strategies)
    require(std::find(known_strategies().begin(), known_strategies().end(), s) != known_strategies().end(),
            ErrorKind::Validation, origin + ": unknown strategy '" + s + "'");
  c.env.validate();
  c.train.validate();
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open config '" + path.string() + "'");
  return parse_run_config(in, path.parent_path(), path.string());
}

/// --seed beats KDLAB_SEED, which beats the file.
inline void apply_seed_override(RunConfig& c, std::optional<std::uint64_t> flag) {
  if (flag) {
    c.train.seed = *flag;
    return;
  }
  if (const char* env = std::getenv("KDLAB_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    require(end != nullptr && *end == '\0', ErrorKind::Validation, "KDLAB_SEED is not an unsigned integer");
    c.train.seed = v;
  }
}

// ---- files ----

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << content;
  require(out.good(), ErrorKind::Io, "write failed for '" + path.string() + "'");
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// date,value,w_<asset>...,turnover. Row t holds the weights chosen at t
/// (the drifted holding on the last row) and that rebalance's turnover.
inline void write_trajectory_csv(const PortfolioTrajectory& traj, const std::vector<std::string>& assets,
                                 std::ostream& out) {
  validate(traj);
  require(traj.weights.front().size() == assets.size(), ErrorKind::Shape, "asset names do not match the weights");
  out << "date,value";
  for (const auto& a : assets) out << ",w_" << a;
  out << ",turnover\n";
  for (std::size_t t = 0; t < traj.values.size(); ++t) {
    out << format_date(traj.dates[t]) << ',' << kdlab::detail::format_number(traj.values[t]);
    for (double w : traj.weights[t]) out << ',' << kdlab::detail::format_number(w);
    out << ',' << kdlab::detail::format_number(t < traj.turnover.size() ? traj.turnover[t] : 0.0) << '\n';
  }
}

inline PortfolioTrajectory read_trajectory_csv(std::istream& in, const std::string& origin) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, origin + ": empty trajectory file");
  auto header = kdlab::detail::split_csv_line(line);
  require(header.size() >= 4 && header[0] == "date" && header[1] == "value" && header.back() == "turnover",
          ErrorKind::Parse, origin + ": bad trajectory header");
  const std::size_t n_assets = header.size() - 3;
  PortfolioTrajectory traj;
  std::size_t line_no = 1;
  std::vector<double> turnover;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = kdlab::detail::split_csv_line(line);
    const std::string where = origin + ":" + std::to_string(line_no);
    require(cells.size() == header.size(), ErrorKind::Parse, where + ": wrong field count");
    auto date = parse_date(cells[0]);
    require(date.has_value(), ErrorKind::Parse, where + ": bad date");
    std::vector<double> nums;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      auto v = kdlab::detail::parse_double(cells[i]);
      require(v.has_value(), ErrorKind::Parse, where + ": bad number");
      nums.push_back(*v);
    }
    traj.dates.push_back(*date);
    traj.values.push_back(nums[0]);
    traj.weights.emplace_back(nums.begin() + 1, nums.begin() + 1 + static_cast<std::ptrdiff_t>(n_assets));
    turnover.push_back(nums.back());
  }
  require(traj.values.size() >= 2, ErrorKind::Validation, origin + ": trajectory needs at least 2 rows");
  traj.period_returns = returns_from_values(traj.values);
  traj.turnover.assign(turnover.begin(), turnover.end() - 1);
  validate(traj);
  return traj;
}

// ---- tables ----

/// Fields rendered as percentages in the consolidated table.
inline bool is_percent_column(std::size_t column) {
  const std::string_view name = MetricsReport::kColumns[column];
  return name == "TR" || name == "AR" || name == "MD" || name == "WR" || name == "Volatility";
}

/// Table-1 presentation: percentages for return-like fields, alpha scaled by
/// 100, two decimals everywhere, "-" when a metric is undefined.
inline std::string format_table_cell(const MetricsReport& m, std::size_t column) {
  auto v = m.row()[column];
  if (!v) return "-";
  const std::string_view name = MetricsReport::kColumns[column];
  double x = *v;
  if (is_percent_column(column) || name == "Alpha") x *= 100.0;
  if (name == "MD") x = std::abs(x);
  if (x == 0.0) x = 0.0;  // no "-0.00"
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%s", x, is_percent_column(column) ? "%" : "");
  std::string s = buf;
  if (s == "-0.00" || s == "-0.00%") s.erase(0, 1);
  return s;
}

struct NamedReport {
  std::string name;
  MetricsReport metrics;
};

inline void write_table_csv(const std::vector<NamedReport>& rows, std::ostream& out) {
  out << "strategy";
  for (const char* c : MetricsReport::kColumns) out << ',' << c;
  out << '\n';
  for (const auto& r : rows) {
    out << r.name;
    for (std::size_t i = 0; i < MetricsReport::kColumns.size(); ++i) out << ',' << format_table_cell(r.metrics, i);
    out << '\n';
  }
}

inline void write_metrics_csv(const std::vector<NamedReport>& rows, std::ostream& out) {
  out << "strategy";
  for (const char* c : MetricsReport::kColumns) out << ',' << c;
  out << '\n';
  for (const auto& r : rows) {
    out << r.name;
    for (const auto& v : r.metrics.row()) out << ',' << format_fixed(v, 9);
    out << '\n';
  }
}

// ---- SVG ----

namespace svg {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

constexpr double kWidth = 800, kHeight = 500, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;

struct Axes {
  double x0, x1, y0, y1;

  static Axes fit(double x0, double x1, double y0, double y1) {
    auto widen = [](double& lo, double& hi) {
      if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
        const double pad = std::max(1e-6, std::abs(hi) * 0.05);
        lo -= pad;
        hi += pad;
      }
    };
    widen(x0, x1);
    widen(y0, y1);
    return {x0, x1, y0, y1};
  }
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void open(std::ostream& out, const std::string& title, const std::string& x_label, const std::string& y_label,
                 const Axes& ax, const std::string& x_lo, const std::string& x_hi) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
      << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  const double bx = kLeft, by = kHeight - kBottom, ex = kWidth - kRight, ey = kTop;
  out << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\"" << num(ex) << "\" y2=\"" << num(by)
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\"" << num(bx) << "\" y2=\"" << num(ey)
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << num((bx + ex) / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << num((by + ey) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((by + ey) / 2) << ")\">" << escape(y_label) << "</text>\n"
      << "<text x=\"" << num(bx) << "\" y=\"" << num(by + 16) << "\" text-anchor=\"start\">" << escape(x_lo)
      << "</text>\n"
      << "<text x=\"" << num(ex) << "\" y=\"" << num(by + 16) << "\" text-anchor=\"end\">" << escape(x_hi)
      << "</text>\n";
  char lo[32], hi[32];
  std::snprintf(lo, sizeof(lo), "%.4g", ax.y0);
  std::snprintf(hi, sizeof(hi), "%.4g", ax.y1);
  out << "<text x=\"" << num(bx - 6) << "\" y=\"" << num(by) << "\" text-anchor=\"end\">" << lo << "</text>\n"
      << "<text x=\"" << num(bx - 6) << "\" y=\"" << num(ey + 4) << "\" text-anchor=\"end\">" << hi << "</text>\n";
}

inline void legend(std::ostream& out, std::size_t i, const std::string& name) {
  const double y = kTop + 10 + 18.0 * static_cast<double>(i);
  const double x = kWidth - kRight + 15;
  out << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\"" << color(i)
      << "\"/>\n"
      << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 1) << "\">" << escape(name) << "</text>\n";
}

struct Series {
  std::string name;
  std::vector<double> y;
};

/// One polyline per series over a shared date axis.
inline void line_chart(const std::string& title, const std::vector<Date>& dates, const std::vector<Series>& series,
                       std::ostream& out) {
  require(!series.empty() && dates.size() >= 2, ErrorKind::Validation, "line chart needs data");
  double lo = series.front().y.front(), hi = lo;
  for (const auto& s : series) {
    require(s.y.size() == dates.size(), ErrorKind::Validation, "series '" + s.name + "' is not aligned with the dates");
    for (double v : s.y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  Axes ax = Axes::fit(0.0, static_cast<double>(dates.size() - 1), lo, hi);
  open(out, title, "Date", "Portfolio value", ax, format_date(dates.front()), format_date(dates.back()));
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << "<polyline fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < dates.size(); ++t)
      out << (t ? " " : "") << num(ax.px(static_cast<double>(t))) << ',' << num(ax.py(series[i].y[t]));
    out << "\"/>\n";
    legend(out, i, series[i].name);
  }
  out << "</svg>\n";
}

struct Point {
  std::string name;
  double x = 0.0;
  double y = 0.0;
};

inline void scatter(const std::string& title, const std::string& x_label, const std::string& y_label,
                    const std::vector<Point>& points, bool legend_per_point, std::ostream& out) {
  require(!points.empty(), ErrorKind::Validation, "scatter needs points");
  double x0 = points.front().x, x1 = x0, y0 = points.front().y, y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  Axes ax = Axes::fit(x0, x1, y0, y1);
  char lo[32], hi[32];
  std::snprintf(lo, sizeof(lo), "%.4g", ax.x0);
  std::snprintf(hi, sizeof(hi), "%.4g", ax.x1);
  open(out, title, x_label, y_label, ax, lo, hi);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << "<circle cx=\"" << num(ax.px(points[i].x)) << "\" cy=\"" << num(ax.py(points[i].y)) << "\" r=\"4\" fill=\""
        << (legend_per_point ? color(i) : color(0)) << "\"/>\n";
    if (legend_per_point) legend(out, i, points[i].name);
  }
  out << "</svg>\n";
}

}  // namespace svg

// ---- pipeline ----

struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  bool no_distill = false;
};

struct Context {
  RunConfig config;
  fs::path out;
  std::ostream& log;
};

inline Context make_context(const Options& opts, std::ostream& log) {
  RunConfig c = load_run_config(opts.config);
  apply_seed_override(c, opts.seed);
  fs::path out = opts.out ? *opts.out : c.out;
  return {std::move(c), std::move(out), log};
}

inline MarketPanel load_panel(const Context& ctx) {
  const fs::path path = ctx.out / "panel.csv";
  require(fs::exists(path), ErrorKind::Io, "'" + path.string() + "' not found; run ingest first");
  MarketPanel panel = load_ohlcv_csv(path.string());
  require(panel.rectangular(), ErrorKind::Validation, "panel.csv is not rectangular");
  if (!ctx.config.benchmark.empty()) panel = extract_benchmark(panel, ctx.config.benchmark);
  return panel;
}

inline PanelSplit load_split(const Context& ctx) {
  return split(load_panel(ctx), ctx.config.train_end, ctx.config.valid_end);
}

inline std::string to_string(const std::function<void(std::ostream&)>& emit) {
  std::ostringstream ss;
  emit(ss);
  return ss.str();
}

inline void cmd_ingest(const Context& ctx) {
  const auto& c = ctx.config;
  MarketPanel raw = load_ohlcv_csv(c.data.string());
  std::size_t missing_cells = 0;
  for (const auto& series : raw.bars) missing_cells += static_cast<std::size_t>(std::count(series.begin(), series.end(), std::nullopt));
  MarketPanel clean = align_and_clean(raw, c.missing);
  if (!c.benchmark.empty()) clean = extract_benchmark(clean, c.benchmark);
  MarketPanel norm = normalize_prices(clean);
  write_file(ctx.out / "panel.csv", to_string([&](std::ostream& o) { write_ohlcv_csv(norm, o); }));
  const std::size_t dropped = raw.num_assets() - clean.num_assets() - (c.benchmark.empty() ? 0 : 1);
  ctx.log << "ingest: " << norm.num_assets() << " assets, " << norm.num_dates() << " dates ("
          << format_date(norm.dates.front()) << " to " << format_date(norm.dates.back()) << ")";
  if (norm.has_benchmark()) ctx.log << ", benchmark " << norm.benchmark_name;
  ctx.log << "\n  assets: ";
  for (std::size_t a = 0; a < norm.num_assets(); ++a) ctx.log << (a ? "," : "") << norm.assets[a];
  ctx.log << "\n  dropped assets: " << dropped << ", missing cells before cleaning: " << missing_cells << '\n';
}

inline void write_frontier_csv(const std::vector<FrontierPoint>& points, const std::vector<std::string>& assets,
                               std::ostream& out) {
  out << "risk,return";
  for (const auto& a : assets) out << ",w_" << a;
  out << '\n';
  for (const auto& p : points) {
    out << kdlab::detail::format_number(p.risk) << ',' << kdlab::detail::format_number(p.expected_return);
    for (double w : p.weights) out << ',' << kdlab::detail::format_number(w);
    out << '\n';
  }
}

inline void cmd_frontier(const Context& ctx) {
  const PanelSplit parts = load_split(ctx);
  const ReturnMatrix returns = compute_returns(parts.train, ReturnKind::Simple);
  const MomentEstimate m = estimate_moments(returns, returns.rows());
  const auto points = efficient_frontier(m, ctx.config.frontier_points);
  write_file(ctx.out / "frontier.csv",
             to_string([&](std::ostream& o) { write_frontier_csv(points, parts.train.assets, o); }));
  std::vector<svg::Point> pts;
  for (const auto& p : points) pts.push_back({"", p.risk, p.expected_return});
  write_file(ctx.out / "frontier.svg", to_string([&](std::ostream& o) {
               svg::scatter("Efficient frontier (training split)", "Risk (daily std)", "Expected daily return", pts,
                            false, o);
             }));
  ctx.log << "frontier: " << points.size() << " points over " << returns.rows() << " training returns\n";
}

inline void write_agent(const fs::path& path, const AgentCheckpoint& agent) {
  write_file(path, to_json(agent).dump(1) + "\n");
}

inline AgentCheckpoint read_agent(const fs::path& path) {
  require(fs::exists(path), ErrorKind::Io, "'" + path.string() + "' not found");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return agent_from_json(j);
}

inline void cmd_distill(const Context& ctx) {
  const auto& c = ctx.config;
  const PanelSplit parts = load_split(ctx);
  const TeacherDataset teacher = teacher_allocations(parts.train, c.teacher, c.env);
  require(!teacher.records.empty(), ErrorKind::InsufficientHistory, "training split yields no teacher records");
  write_file(ctx.out / "teacher.csv", to_string([&](std::ostream& o) { write_teacher_csv(teacher, o); }));

  TrainConfig tc = c.train;
  tc.episodes = 0;
  AgentCheckpoint agent = init_agent(teacher.spec, c.env, tc);
  const double before = teacher_mse(agent.actor, teacher.records);
  const auto curve = distill_pretrain(agent.actor, teacher.records, tc.distill, tc.seed);
  const double after = teacher_mse(agent.actor, teacher.records);
  write_agent(ctx.out / "distilled.json", agent);
  write_file(ctx.out / "distill_loss.csv", to_string([&](std::ostream& o) {
               o << "epoch,loss\n";
               for (std::size_t e = 0; e < curve.size(); ++e)
                 o << e + 1 << ',' << kdlab::detail::format_number(curve[e]) << '\n';
             }));
  ctx.log << "distill: " << teacher.records.size() << " teacher records, " << curve.size()
          << " epochs, teacher MSE " << before << " -> " << after << '\n';
}

inline void cmd_train(const Context& ctx, bool no_distill) {
  const auto& c = ctx.config;
  const PanelSplit parts = load_split(ctx);
  Environment env(parts.train, c.env);
  TrainConfig tc = c.train;
  if (no_distill) tc.distill.enabled = false;
  AgentCheckpoint agent;
  if (no_distill) {
    agent = init_agent(env.features(), c.env, tc);
  } else {
    agent = read_agent(ctx.out / "distilled.json");
    require(agent.seed == c.train.seed, ErrorKind::Validation,
            "distilled.json was made with seed " + std::to_string(agent.seed) + "; rerun distill with this seed");
    require(agent.actor.input_dim() == env.state_dim() && agent.assets == env.panel().assets, ErrorKind::Shape,
            "distilled.json does not match the configured features");
  }
  const auto log = reinforce(agent, env, tc);
  const std::string name = no_distill ? "ddpg" : "kdd";
  write_agent(ctx.out / (name + ".json"), agent);
  write_file(ctx.out / ("episodes_" + name + ".csv"), to_string([&](std::ostream& o) {
               o << "episode,cumulative_reward,critic_loss_mean,actor_objective_mean\n";
               for (const auto& e : log)
                 o << e.episode << ',' << kdlab::detail::format_number(e.cumulative_reward) << ','
                   << kdlab::detail::format_number(e.critic_loss_mean) << ','
                   << kdlab::detail::format_number(e.actor_objective_mean) << '\n';
             }));
  ctx.log << "train: " << name << ", " << log.size() << " episodes";
  if (!log.empty()) ctx.log << ", last cumulative reward " << log.back().cumulative_reward;
  ctx.log << '\n';
}

/// Markowitz teacher traded online: every `rebalance_every` days it moves to
/// the trade-off optimum over the trailing window of the full history, and
/// holds the drifted position in between.
inline PortfolioTrajectory run_markowitz(const Environment& env, const ReturnMatrix& history, std::size_t offset,
                                         const TeacherConfig& teacher, std::size_t start) {
  WeightVector w = uniform_weights(env.num_assets());
  return run_policy(
      env,
      [&](const EnvState& s) {
        if ((s.t - start) % teacher.rebalance_every != 0) return s.weights;
        const std::size_t end_row = offset + s.t;
        const std::size_t window = std::min(teacher.window, end_row);
        if (window < 2) return s.weights;
        return solve_tradeoff(estimate_moments(history, window, end_row), teacher.lambda_risk);
      },
      start, w);
}

inline PortfolioTrajectory benchmark_trajectory(const MarketPanel& panel, std::size_t start, double initial) {
  require(panel.has_benchmark(), ErrorKind::Validation, "panel has no benchmark");
  std::vector<Date> dates(panel.dates.begin() + static_cast<std::ptrdiff_t>(start), panel.dates.end());
  std::vector<double> values;
  for (std::size_t t = start; t < panel.num_dates(); ++t)
    values.push_back(initial * panel.benchmark[t] / panel.benchmark[start]);
  return trajectory_from_values(std::move(dates), std::move(values));
}

inline void cmd_backtest(const Context& ctx) {
  const auto& c = ctx.config;
  const MarketPanel full = load_panel(ctx);
  const PanelSplit parts = split(full, c.train_end, c.valid_end);
  const MarketPanel& trade = parts.trading;
  require(trade.num_dates() >= c.env.lookback + 2, ErrorKind::InsufficientHistory,
          "trading split of " + std::to_string(trade.num_dates()) + " dates is too short for lookback " +
              std::to_string(c.env.lookback));
  const Environment env(trade, c.env);
  const std::size_t start = c.env.lookback;
  const WeightVector uniform = uniform_weights(trade.num_assets());
  const auto bench = benchmark_returns(trade, start);
  auto score = [&](const PortfolioTrajectory& traj) {
    return bench ? report(traj, std::span<const double>(*bench), c.metrics) : report(traj, std::nullopt, c.metrics);
  };

  std::vector<NamedReport> rows;
  for (const auto& name : c.strategies) {
    PortfolioTrajectory traj;
    if (name == "bah") {
      traj = run_bah(env, uniform, start);
    } else if (name == "crp") {
      traj = run_crp(env, uniform, start);
    } else if (name == "bcrp") {
      traj = run_crp(env, solve_bcrp(slice(trade, start, trade.num_dates())), start);
    } else if (name == "eg") {
      traj = run_eg(env, c.baselines.eg_eta, start);
    } else if (name == "pamr") {
      traj = run_pamr(env, c.baselines.pamr_epsilon, start);
    } else if (name == "olmar") {
      traj = run_olmar(env, c.baselines.olmar_window, c.baselines.olmar_epsilon, start);
    } else if (name == "markowitz") {
      const std::size_t offset = parts.train.num_dates() + parts.validation.num_dates();
      traj = run_markowitz(env, compute_returns(full, ReturnKind::Simple), offset, c.teacher, start);
    } else {
      const fs::path ckpt = ctx.out / ((name == "mkd" ? std::string("distilled") : name) + ".json");
      const AgentCheckpoint agent = read_agent(ckpt);
      traj = evaluate(agent, trade, c.env, false, c.metrics).trajectory;
    }
    write_file(ctx.out / ("traj_" + name + ".csv"),
               to_string([&](std::ostream& o) { write_trajectory_csv(traj, trade.assets, o); }));
    rows.push_back({name, score(traj)});
  }
  if (trade.has_benchmark()) {
    const PortfolioTrajectory traj = benchmark_trajectory(trade, start, c.env.initial_value);
    write_file(ctx.out / "traj_benchmark.csv",
               to_string([&](std::ostream& o) { write_trajectory_csv(traj, {trade.benchmark_name}, o); }));
    MetricsReport m = score(traj);
    m.information_ratio.reset();
    rows.push_back({"benchmark", m});
  }
  write_file(ctx.out / "metrics.csv", to_string([&](std::ostream& o) { write_metrics_csv(rows, o); }));
  ctx.log << "backtest: " << rows.size() << " strategies over " << trade.num_dates() - start - 1 << " trading periods\n";
}

inline void cmd_report(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<std::string> names = c.strategies;
  names.push_back("benchmark");
  std::vector<std::pair<std::string, PortfolioTrajectory>> trajectories;
  for (const auto& name : names) {
    const fs::path path = ctx.out / ("traj_" + name + ".csv");
    if (!fs::exists(path)) {
      require(name == "benchmark", ErrorKind::Io, "'" + path.string() + "' not found; run backtest first");
      continue;
    }
    std::ifstream in(path);
    trajectories.emplace_back(name, read_trajectory_csv(in, path.string()));
  }
  require(!trajectories.empty(), ErrorKind::Validation, "no trajectories to report");
  const auto& dates = trajectories.front().second.dates;
  for (const auto& [name, traj] : trajectories)
    require(traj.dates == dates, ErrorKind::Validation, "trajectory '" + name + "' is not aligned with the others");

  std::optional<std::vector<double>> bench;
  if (trajectories.back().first == "benchmark") bench = trajectories.back().second.period_returns;
  std::vector<NamedReport> rows;
  for (const auto& [name, traj] : trajectories) {
    MetricsReport m =
        bench ? report(traj, std::span<const double>(*bench), c.metrics) : report(traj, std::nullopt, c.metrics);
    if (name == "benchmark") m.information_ratio.reset();
    rows.push_back({name, m});
  }
  write_file(ctx.out / "table.csv", to_string([&](std::ostream& o) { write_table_csv(rows, o); }));

  std::vector<svg::Series> series;
  for (const auto& [name, traj] : trajectories) series.push_back({name, traj.values});
  write_file(ctx.out / "values.svg", to_string([&](std::ostream& o) {
               svg::line_chart("Portfolio value over the trading period", dates, series, o);
             }));
  std::vector<svg::Point> points;
  for (const auto& r : rows)
    if (r.metrics.volatility) points.push_back({r.name, *r.metrics.volatility, r.metrics.annualized_return});
  if (!points.empty())
    write_file(ctx.out / "risk_return.svg", to_string([&](std::ostream& o) {
                 svg::scatter("Risk vs return", "Volatility (daily std)", "Annualized return", points, true, o);
               }));
  ctx.log << "report: " << rows.size() << " rows written to " << (ctx.out / "table.csv").string() << '\n';
}

/// Exit code for an error: 3 for numerical failure, 2 for everything else.
inline int exit_code(const Error& e) { return e.kind() == ErrorKind::Numeric ? 3 : 2; }

inline int run_command(const std::string& command, const Options& opts, std::ostream& log, std::ostream& err) {
  try {
    Context ctx = make_context(opts, log);
    if (command == "ingest") cmd_ingest(ctx);
    else if (command == "frontier") cmd_frontier(ctx);
    else if (command == "distill") cmd_distill(ctx);
    else if (command == "train") cmd_train(ctx, opts.no_distill);
    else if (command == "backtest") cmd_backtest(ctx);
    else if (command == "report") cmd_report(ctx);
    else fail(ErrorKind::Validation, "unknown command '" + command + "'");
    return 0;
  } catch (const Error& e) {
    err << "kdlab " << command << ": " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    err << "kdlab " << command << ": io error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace kdlab::cli
