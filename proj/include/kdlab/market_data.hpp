#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kdlab/date.hpp"
#include "kdlab/error.hpp"

namespace kdlab {

struct Bar {
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
};

/// Date x asset OHLCV table. Cells are optional until `align_and_clean`
/// has made the panel rectangular; every other operation requires that.
struct MarketPanel {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  std::vector<std::vector<std::optional<Bar>>> bars;  // [asset][date]
  std::string benchmark_name;
  std::vector<double> benchmark;  // empty or aligned with dates

  std::size_t num_assets() const { return assets.size(); }
  std::size_t num_dates() const { return dates.size(); }
  bool has_benchmark() const { return !benchmark.empty(); }

  bool rectangular() const {
    for (const auto& series : bars)
      for (const auto& cell : series)
        if (!cell) return false;
    return true;
  }

  const Bar& bar(std::size_t asset, std::size_t t) const { return *bars[asset][t]; }
  double close(std::size_t asset, std::size_t t) const { return bars[asset][t]->close; }
};

enum class ReturnKind { Simple, Log };
enum class MissingPolicy { DropAsset, ForwardFill };

/// values[t][asset] is the return from dates[t] - 1 to dates[t] of the
/// source panel; `dates` starts at the panel's second date.
struct ReturnMatrix {
  std::vector<Date> dates;
  std::vector<std::vector<double>> values;
  ReturnKind kind = ReturnKind::Simple;

  std::size_t rows() const { return values.size(); }
  std::size_t cols() const { return values.empty() ? 0 : values.front().size(); }
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline void require_rectangular(const MarketPanel& panel, const char* what) {
  require(panel.rectangular(), ErrorKind::Validation,
          std::string(what) + " requires a rectangular panel; run align_and_clean first");
}

}  // namespace detail

inline constexpr std::string_view kOhlcvHeader = "date,ticker,open,high,low,close,volume";

/// Reads long-form `date,ticker,open,high,low,close,volume` rows. Assets keep
/// their order of first appearance; the date axis is the sorted union.
inline MarketPanel parse_ohlcv_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    require(line == kOhlcvHeader, ErrorKind::Parse,
            "line " + std::to_string(line_no) + ": expected header '" + std::string(kOhlcvHeader) + "'");
    have_header = true;
    break;
  }
  require(have_header, ErrorKind::Parse, "empty file: missing header row");

  std::vector<std::string> assets;
  std::map<std::string, std::size_t> asset_index;
  std::map<std::pair<std::size_t, Date>, Bar> cells;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    auto fields = detail::split_csv_line(line);
    require(fields.size() == 7, ErrorKind::Parse,
            where + ": expected 7 fields, got " + std::to_string(fields.size()));
    auto date = parse_date(fields[0]);
    require(date.has_value(), ErrorKind::Parse, where + ": bad date '" + std::string(fields[0]) + "'");
    std::string ticker(fields[1]);
    require(!ticker.empty(), ErrorKind::Parse, where + ": empty ticker");
    double values[5];
    for (int k = 0; k < 5; ++k) {
      auto v = detail::parse_double(fields[2 + k]);
      require(v.has_value() && std::isfinite(*v), ErrorKind::Parse,
              where + ": bad number '" + std::string(fields[2 + k]) + "'");
      values[k] = *v;
    }
    Bar bar{values[0], values[1], values[2], values[3], values[4]};
    require(bar.close > 0.0, ErrorKind::Validation, where + ": non-positive close for " + ticker);
    require(bar.open > 0.0 && bar.high > 0.0 && bar.low > 0.0, ErrorKind::Validation,
            where + ": non-positive price for " + ticker);
    require(bar.volume >= 0.0, ErrorKind::Validation, where + ": negative volume for " + ticker);

    auto [it, inserted] = asset_index.try_emplace(ticker, assets.size());
    if (inserted) assets.push_back(ticker);
    bool fresh = cells.emplace(std::pair{it->second, *date}, bar).second;
    require(fresh, ErrorKind::Duplicate,
            where + ": duplicate row for (" + std::string(fields[0]) + ", " + ticker + ")");
  }

  MarketPanel panel;
  panel.assets = assets;
  for (const auto& [key, bar] : cells) panel.dates.push_back(key.second);
  std::sort(panel.dates.begin(), panel.dates.end());
  panel.dates.erase(std::unique(panel.dates.begin(), panel.dates.end()), panel.dates.end());

  std::map<Date, std::size_t> date_index;
  for (std::size_t t = 0; t < panel.dates.size(); ++t) date_index[panel.dates[t]] = t;
  panel.bars.assign(assets.size(), std::vector<std::optional<Bar>>(panel.dates.size()));
  for (const auto& [key, bar] : cells) panel.bars[key.first][date_index[key.second]] = bar;
  return panel;
}

inline MarketPanel load_ohlcv_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open '" + path + "'");
  return parse_ohlcv_csv(in);
}

/// Makes the panel rectangular. Forward-fill never fills backward, so an
/// asset missing the first date is dropped under either policy.
inline MarketPanel align_and_clean(const MarketPanel& panel, MissingPolicy policy) {
  require(panel.num_assets() > 0 && panel.num_dates() > 0, ErrorKind::EmptyPanel, "input panel is empty");
  MarketPanel out;
  out.dates = panel.dates;
  out.benchmark_name = panel.benchmark_name;
  out.benchmark = panel.benchmark;
  for (std::size_t a = 0; a < panel.num_assets(); ++a) {
    auto series = panel.bars[a];
    bool complete = std::all_of(series.begin(), series.end(), [](const auto& c) { return c.has_value(); });
    if (!complete) {
      if (policy == MissingPolicy::DropAsset || !series.front()) continue;
      for (std::size_t t = 1; t < series.size(); ++t)
        if (!series[t]) series[t] = series[t - 1];
    }
    out.assets.push_back(panel.assets[a]);
    out.bars.push_back(std::move(series));
  }
  require(out.num_assets() > 0 && out.num_dates() >= 2, ErrorKind::EmptyPanel,
          "cleaning left " + std::to_string(out.num_assets()) + " assets and " +
              std::to_string(out.num_dates()) + " dates");
  return out;
}

/// Moves one ticker's close series into the benchmark slot.
inline MarketPanel extract_benchmark(const MarketPanel& panel, const std::string& ticker) {
  detail::require_rectangular(panel, "extract_benchmark");
  auto it = std::find(panel.assets.begin(), panel.assets.end(), ticker);
  require(it != panel.assets.end(), ErrorKind::Validation, "benchmark ticker '" + ticker + "' not in panel");
  auto index = static_cast<std::size_t>(it - panel.assets.begin());
  MarketPanel out;
  out.dates = panel.dates;
  out.benchmark_name = ticker;
  for (std::size_t a = 0; a < panel.num_assets(); ++a) {
    if (a == index) continue;
    out.assets.push_back(panel.assets[a]);
    out.bars.push_back(panel.bars[a]);
  }
  require(out.num_assets() > 0, ErrorKind::EmptyPanel, "no tradable assets besides the benchmark");
  for (std::size_t t = 0; t < panel.num_dates(); ++t) out.benchmark.push_back(panel.close(index, t));
  return out;
}

/// Divides each asset's O/H/L/C by its first close; the benchmark by its first value.
inline MarketPanel normalize_prices(const MarketPanel& panel) {
  detail::require_rectangular(panel, "normalize_prices");
  MarketPanel out = panel;
  for (auto& series : out.bars) {
    if (series.empty()) continue;
    const double anchor = series.front()->close;
    for (auto& cell : series) {
      cell->open /= anchor;
      cell->high /= anchor;
      cell->low /= anchor;
      cell->close /= anchor;
    }
  }
  if (!out.benchmark.empty()) {
    const double anchor = out.benchmark.front();
    for (double& v : out.benchmark) v /= anchor;
  }
  return out;
}

inline ReturnMatrix compute_returns(const MarketPanel& panel, ReturnKind kind) {
  detail::require_rectangular(panel, "compute_returns");
  require(panel.num_dates() >= 2, ErrorKind::Length, "returns need at least 2 dates");
  ReturnMatrix r;
  r.kind = kind;
  r.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  r.values.assign(panel.num_dates() - 1, std::vector<double>(panel.num_assets()));
  for (std::size_t t = 1; t < panel.num_dates(); ++t) {
    for (std::size_t a = 0; a < panel.num_assets(); ++a) {
      const double ratio = panel.close(a, t) / panel.close(a, t - 1);
      r.values[t - 1][a] = kind == ReturnKind::Simple ? ratio - 1.0 : std::log(ratio);
    }
  }
  return r;
}

/// x_t = P_t / P_{t-1}, computed as simple return + 1 so both routes agree exactly.
inline ReturnMatrix price_relatives(const MarketPanel& panel) {
  ReturnMatrix r = compute_returns(panel, ReturnKind::Simple);
  for (auto& row : r.values)
    for (double& v : row) v += 1.0;
  return r;
}

/// Dates [begin, end) of the panel, benchmark included.
inline MarketPanel slice(const MarketPanel& panel, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= panel.num_dates(), ErrorKind::Range, "slice bounds outside the panel");
  MarketPanel out;
  out.assets = panel.assets;
  out.benchmark_name = panel.benchmark_name;
  out.dates.assign(panel.dates.begin() + begin, panel.dates.begin() + end);
  for (const auto& series : panel.bars) out.bars.emplace_back(series.begin() + begin, series.begin() + end);
  if (panel.has_benchmark()) out.benchmark.assign(panel.benchmark.begin() + begin, panel.benchmark.begin() + end);
  return out;
}

struct PanelSplit {
  MarketPanel train;
  MarketPanel validation;
  MarketPanel trading;
};

/// Splits into (start, train_end], (train_end, valid_end], (valid_end, end].
/// A boundary that falls between trading days snaps to the latest date <= boundary.
inline PanelSplit split(const MarketPanel& panel, const Date& train_end, const Date& valid_end) {
  require(panel.num_dates() > 0, ErrorKind::EmptyPanel, "cannot split an empty panel");
  require(train_end < valid_end, ErrorKind::Range, "train_end must precede valid_end");
  auto snap = [&](const Date& boundary) {
    require(boundary >= panel.dates.front() && boundary <= panel.dates.back(), ErrorKind::Range,
            "boundary " + format_date(boundary) + " outside [" + format_date(panel.dates.front()) + ", " +
                format_date(panel.dates.back()) + "]");
    auto it = std::upper_bound(panel.dates.begin(), panel.dates.end(), boundary);
    return static_cast<std::size_t>(it - panel.dates.begin());  // one past the snapped date
  };
  const std::size_t train_stop = snap(train_end);
  const std::size_t valid_stop = snap(valid_end);
  const std::size_t n = panel.num_dates();
  require(train_stop > 0 && valid_stop > train_stop && n > valid_stop, ErrorKind::EmptySplit,
          "split sizes " + std::to_string(train_stop) + "/" + std::to_string(valid_stop - train_stop) + "/" +
              std::to_string(n - valid_stop));
  return {slice(panel, 0, train_stop), slice(panel, train_stop, valid_stop), slice(panel, valid_stop, n)};
}

namespace detail {
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

/// Canonical long-form CSV: tickers in panel order, dates ascending, the
/// benchmark last as an extra ticker (O=H=L=C, volume 0).
inline void write_ohlcv_csv(const MarketPanel& panel, std::ostream& out) {
  detail::require_rectangular(panel, "write_ohlcv_csv");
  out << kOhlcvHeader << '\n';
  using detail::format_number;
  for (std::size_t a = 0; a < panel.num_assets(); ++a) {
    for (std::size_t t = 0; t < panel.num_dates(); ++t) {
      const Bar& b = panel.bar(a, t);
      out << format_date(panel.dates[t]) << ',' << panel.assets[a] << ',' << format_number(b.open) << ','
          << format_number(b.high) << ',' << format_number(b.low) << ',' << format_number(b.close) << ','
          << format_number(b.volume) << '\n';
    }
  }
  if (panel.has_benchmark()) {
    for (std::size_t t = 0; t < panel.num_dates(); ++t) {
      const std::string v = format_number(panel.benchmark[t]);
      out << format_date(panel.dates[t]) << ',' << panel.benchmark_name << ',' << v << ',' << v << ',' << v << ','
          << v << ",0\n";
    }
  }
}

}  // namespace kdlab
