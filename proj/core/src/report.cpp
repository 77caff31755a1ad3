#include "srlp/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srlp/error.hpp"

namespace srlp {
namespace {

std::string num(double v) { return fmt::format("{}", v); }

constexpr std::array<std::string_view, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                      "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<SeriesMetrics>& rows) {
  out << "series,annualized_return,max_drawdown,sharpe\n";
  for (const auto& r : rows) {
    out << r.series << ',' << num(r.annualized_return) << ',' << num(r.max_drawdown) << ','
        << (r.sharpe ? num(*r.sharpe) : "nan") << '\n';
  }
}

void write_report_jsonl(std::ostream& out, const std::vector<SeriesMetrics>& rows) {
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["series"] = r.series;
    j["annualized_return"] = r.annualized_return;
    j["max_drawdown"] = r.max_drawdown;
    j["sharpe"] = r.sharpe ? nlohmann::ordered_json(*r.sharpe) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
}

void write_equity_csv(std::ostream& out, const EquityCurve& curve) {
  out << "date,equity\n";
  for (const auto& p : curve) out << p.date.to_string() << ',' << num(p.equity) << '\n';
}

DatedSeries read_equity_csv(std::istream& in, std::string name, std::string_view source) {
  DatedSeries s;
  s.name = std::move(name);
  std::string line;
  if (!std::getline(in, line) || (line != "date,equity" && line != "date,equity\r")) {
    fail(ErrorCode::Parse, fmt::format("{}: expected header 'date,equity'", source));
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorCode::Parse, fmt::format("{}:{}: expected 2 columns", source, line_no));
    try {
      const Date d = Date::parse(std::string_view(line).substr(0, comma));
      double v = 0.0;
      const char* first = line.data() + comma + 1;
      const char* last = line.data() + line.size();
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || ptr != last) fail(ErrorCode::Parse, "bad equity value");
      if (!s.dates.empty() && !(s.dates.back() < d)) fail(ErrorCode::Validation, "dates must be increasing");
      s.dates.push_back(d);
      s.values.push_back(v);
    } catch (const Error& e) {
      fail(e.code(), fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return s;
}

DatedSeries read_equity_csv(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return read_equity_csv(in, std::move(name), path.string());
}

void write_trades_csv(std::ostream& out, const std::vector<Trade>& trades) {
  out << "event_id,stock_id,direction,signal_at,entry_at,entry_price,exit_at,exit_price,quantity,capital,net_return\n";
  for (const auto& t : trades) {
    out << t.event_id << ',' << t.stock_id << ',' << to_string(t.direction) << ',' << t.signal_at.to_string() << ','
        << t.entry_at.to_string() << ',' << num(t.entry_price) << ',' << t.exit_at.to_string() << ','
        << num(t.exit_price) << ',' << num(t.quantity) << ',' << num(t.capital) << ',' << num(t.net_return) << '\n';
  }
}

void write_skipped_signals_csv(std::ostream& out, const std::vector<SkippedSignal>& skipped) {
  out << "event_id,reason\n";
  for (const auto& s : skipped) out << s.event_id << ',' << s.reason << '\n';
}

std::string render_svg(const std::vector<DatedSeries>& series, const ChartOptions& options) {
  if (series.empty()) fail(ErrorCode::InvalidArgument, "render_svg: no series");
  for (const auto& s : series) {
    if (s.values.empty() || s.values.size() != s.dates.size()) {
      fail(ErrorCode::InvalidArgument, fmt::format("render_svg: series '{}' is empty or ragged", s.name));
    }
  }
  const double w = options.width;
  const double h = options.height;
  const double left = 60.0, right = 20.0, top = 30.0, gap = 40.0, bottom = 30.0;
  const double panel_h = (h - top - gap - bottom) / 2.0;
  const double plot_w = w - left - right;

  std::vector<std::vector<double>> rates;
  double rmin = 0.0, rmax = 0.0;
  std::size_t max_len = 1;
  for (const auto& s : series) {
    std::vector<double> r;
    for (const double v : s.values) r.push_back(v / s.values.front() - 1.0);
    rmin = std::min(rmin, *std::min_element(r.begin(), r.end()));
    rmax = std::max(rmax, *std::max_element(r.begin(), r.end()));
    max_len = std::max(max_len, r.size());
    rates.push_back(std::move(r));
  }
  if (rmax - rmin < 1e-12) {
    rmax += 0.01;
    rmin -= 0.01;
  }
  std::vector<double> dd;
  double peak = series.front().values.front();
  for (const double v : series.front().values) {
    peak = std::max(peak, v);
    dd.push_back(v / peak - 1.0);
  }
  double dmin = std::min(-0.01, *std::min_element(dd.begin(), dd.end()));

  auto x_of = [&](std::size_t i) {
    return left + (max_len > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(max_len - 1) : 0.0);
  };
  auto polyline = [&](const std::vector<double>& ys, double lo, double hi, double y0, std::string_view color) {
    std::string pts;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double y = y0 + panel_h * (hi - ys[i]) / (hi - lo);
      pts += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", x_of(i), y);
    }
    return fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
  };
  auto frame = [&](double y0, double lo, double hi, std::string_view title) {
    std::string s = fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#888\"/>\n", left,
        y0, plot_w, panel_h);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"13\">{}</text>\n", left, y0 - 8.0, title);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"end\">{:.1f}%</text>\n",
                     left - 4.0, y0 + 10.0, hi * 100.0);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"end\">{:.1f}%</text>\n",
                     left - 4.0, y0 + panel_h, lo * 100.0);
    if (lo < 0.0 && hi > 0.0) {
      const double zy = y0 + panel_h * hi / (hi - lo);
      s += fmt::format(
          "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ccc\" stroke-dasharray=\"4 3\"/>\n",
          left, zy, left + plot_w, zy);
    }
    return s;
  };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      options.width, options.height, options.width, options.height);
  const double y_ret = top;
  const double y_dd = top + panel_h + gap;
  svg += frame(y_ret, rmin, rmax, "Return rate");
  for (std::size_t k = 0; k < rates.size(); ++k) {
    const auto color = kPalette[k % kPalette.size()];
    svg += polyline(rates[k], rmin, rmax, y_ret, color);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" fill=\"{}\">{}</text>\n",
                       left + 8.0, y_ret + 16.0 + 13.0 * static_cast<double>(k), color, series[k].name);
  }
  svg += frame(y_dd, dmin, 0.0, "Drawdown (" + series.front().name + ")");
  svg += polyline(dd, dmin, 0.0, y_dd, kPalette[0]);
  const auto& dates = series.front().dates;
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\">{}</text>\n", left, h - 8.0,
                     dates.front().to_string());
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                     left + plot_w, h - 8.0, dates.back().to_string());
  svg += "</svg>\n";
  return svg;
}

}  // namespace srlp
