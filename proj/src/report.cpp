#include "wsi/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "wsi/csv.hpp"
#include "wsi/error.hpp"
#include "wsi/format.hpp"

namespace wsi {

namespace {

std::string p_cell(const GrangerResult& r) {
  return format_fixed(r.p_value, 3) + std::string(to_string(r.stars));
}

struct Row {
  int lag;
  const GrangerResult* result;
};

std::vector<Row> rows_of(const GrangerSweep& sweep) {
  std::vector<Row> rows;
  for (const auto& r : sweep.results) rows.push_back({r.lag, &r});
  for (const auto& s : sweep.skipped) rows.push_back({s.lag, nullptr});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.lag < b.lag; });
  return rows;
}

std::string latex_subtable(const GrangerSweep& sweep) {
  std::string out = "\\begin{tabular}{rrl}\n\\toprule\nLag & F-stat & p-value \\\\\n\\midrule\n";
  for (const auto& row : rows_of(sweep)) {
    out += row.result ? latex_row(*row.result) : fmt::format("{} & NA & NA", row.lag);
    out += " \\\\\n";
  }
  out += "\\bottomrule\n\\end{tabular}\n";
  return out;
}

std::string markdown_subtable(const GrangerSweep& sweep) {
  std::string out = "| Lag | F-stat | p-value |\n|---:|---:|:---|\n";
  for (const auto& row : rows_of(sweep)) {
    if (row.result) {
      out += fmt::format("| {} | {} | {} |\n", row.lag, format_fixed(row.result->f_stat, 3),
                         p_cell(*row.result));
    } else {
      out += fmt::format("| {} | NA | NA |\n", row.lag);
    }
  }
  return out;
}

}  // namespace

std::string latex_row(const GrangerResult& r) {
  return fmt::format("{} & {} & {}", r.lag, format_fixed(r.f_stat, 3), p_cell(r));
}

std::string render_granger_table(const GrangerSweep& sweep, TableFormat format,
                                 const SweepLabel& label) {
  switch (format) {
    case TableFormat::Latex:
      return latex_subtable(sweep);
    case TableFormat::Markdown:
      return markdown_subtable(sweep);
    case TableFormat::Csv: {
      std::ostringstream out;
      out << "backend,index_kind,lag,f_stat,p_value,stars\n";
      for (const auto& row : rows_of(sweep)) {
        if (row.result) {
          csv::write_row(out, {label.backend, label.index_kind, std::to_string(row.lag),
                               format_fixed(row.result->f_stat, 3),
                               format_fixed(row.result->p_value, 3),
                               std::string(to_string(row.result->stars))});
        } else {
          csv::write_row(out, {label.backend, label.index_kind, std::to_string(row.lag), "NA", "NA", ""});
        }
      }
      return out.str();
    }
  }
  return {};
}

std::string render_comparison_latex(const std::vector<NamedSweep>& sweeps,
                                    const std::string& caption) {
  std::string out = "\\begin{table*}[t]\n\t\\centering\n";
  out += fmt::format("\t\\caption{{{}}}\n", caption);
  out += "\t\\caption*{\\justifying\\normalfont *, **, and *** denote significance at the 10\\%, "
         "5\\%, and 1\\% levels, respectively.}\n";
  out += "\t\\resizebox{\\textwidth}{!}{%\n";
  out += fmt::format("\t\t\\begin{{tabular}}{{{}}}\n", std::string(sweeps.size(), 'c'));
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    out += fmt::format("\t\t\t\\textbf{{{}}}{}\n", sweeps[i].label.backend,
                       i + 1 < sweeps.size() ? " &" : " \\\\");
  }
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    out += latex_subtable(sweeps[i].sweep);
    out += i + 1 < sweeps.size() ? " &\n" : "\n";
  }
  out += "\t\t\\end{tabular}\n\t}\n\\end{table*}\n";
  return out;
}

std::string render_comparison_markdown(const std::vector<NamedSweep>& sweeps,
                                       const std::string& title) {
  std::string out = fmt::format("# {}\n\n", title);
  for (const auto& s : sweeps) {
    out += fmt::format("## {} ({})\n\n", s.label.backend, s.label.index_kind);
    out += markdown_subtable(s.sweep);
    out += "\n";
  }
  out += "*, **, and *** denote significance at the 10%, 5%, and 1% levels.\n";
  return out;
}

void write_granger_csv(std::ostream& out, const SweepLabel& label, const GrangerSweep& sweep) {
  out << "backend,index_kind,lag,f_stat,p_value,stars\n";
  for (const auto& row : rows_of(sweep)) {
    if (row.result) {
      csv::write_row(out, {label.backend, label.index_kind, std::to_string(row.lag),
                           format_shortest(row.result->f_stat), format_shortest(row.result->p_value),
                           std::string(to_string(row.result->stars))});
    } else {
      csv::write_row(out, {label.backend, label.index_kind, std::to_string(row.lag), "NA", "NA", ""});
    }
  }
}

namespace {

constexpr double kWidth = 960, kHeight = 480;
constexpr double kLeft = 80, kRight = 80, kTop = 50, kBottom = 70;

std::string num(double v) { return format_fixed(v, 2); }

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

int month_tick_step(std::size_t n) {
  for (int step : {1, 3, 6, 12, 24, 60, 120}) {
    if (n / static_cast<std::size_t>(step) <= 14) return step;
  }
  return 240;
}

}  // namespace

std::string render_series_chart(const IndexSeries& series, const WageSeries& wages,
                                const std::string& title) {
  struct Pt {
    MonthKey month;
    double standard, weighted, yoy;
  };
  std::vector<Pt> pts;
  for (const auto& p : series.points) {
    auto y = wages.yoy().find(p.month);
    if (y != wages.yoy().end()) pts.push_back({p.month, p.wsi_standard, p.wsi_weighted, y->second});
  }
  if (pts.size() < 2) {
    throw Error(fmt::format("chart needs at least two months where the index and yoy overlap, got {}",
                            pts.size()));
  }

  double wsi_lim = 100.0;
  for (const auto& p : pts) wsi_lim = std::max({wsi_lim, std::abs(p.standard), std::abs(p.weighted)});
  wsi_lim = std::ceil(wsi_lim / 100.0) * 100.0;

  auto [ymin_it, ymax_it] =
      std::minmax_element(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.yoy < b.yoy; });
  double ylo = ymin_it->yoy, yhi = ymax_it->yoy;
  double pad = (yhi - ylo) * 0.1;
  if (pad == 0.0) pad = 1.0;
  ylo -= pad;
  yhi += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto n = pts.size();
  auto x_of = [&](std::size_t i) { return kLeft + plot_w * static_cast<double>(i) / static_cast<double>(n - 1); };
  auto left_y = [&](double v) { return kTop + plot_h * (wsi_lim - v) / (2.0 * wsi_lim); };
  auto right_y = [&](double v) { return kTop + plot_h * (yhi - v) / (yhi - ylo); };

  std::string s;
  s += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      num(kWidth), num(kHeight));
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", num(kWidth),
                   num(kHeight));
  s += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
                   num(kWidth / 2), escape_xml(title));

  // frame and zero line
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
                   num(kLeft), num(kTop), num(plot_w), num(plot_h));
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
                   num(kLeft), num(left_y(0.0)), num(kLeft + plot_w));

  // left axis: WSI
  s += "<g class=\"axis-left\">\n";
  for (int i = 0; i <= 4; ++i) {
    double v = -wsi_lim + wsi_lim * 0.5 * i;
    double y = left_y(v);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444\"/>\n", num(kLeft - 5),
                     num(y), num(kLeft), num(y));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kLeft - 8),
                     num(y + 4), format_fixed(v, 0));
  }
  s += fmt::format(
      "<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">WSI</text>\n",
      num(kTop + plot_h / 2));
  s += "</g>\n";

  // right axis: yoy
  s += "<g class=\"axis-right\">\n";
  for (int i = 0; i <= 4; ++i) {
    double v = ylo + (yhi - ylo) * 0.25 * i;
    double y = right_y(v);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444\"/>\n",
                     num(kLeft + plot_w), num(y), num(kLeft + plot_w + 5), num(y));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{}</text>\n",
                     num(kLeft + plot_w + 8), num(y + 4), format_fixed(v, 2));
  }
  s += fmt::format(
      "<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(90 {0} {1})\">yoy wage growth (%)</text>\n",
      num(kWidth - 20), num(kTop + plot_h / 2));
  s += "</g>\n";

  // x axis: month ticks
  s += "<g class=\"axis-bottom\">\n";
  const int step = month_tick_step(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = pts[i].month;
    bool tick = step >= 12 ? (m.month() == 1 && (m.year() % (step / 12)) == 0)
                           : ((m.month() - 1) % step) == 0;
    if (!tick) continue;
    double x = x_of(i);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n", num(x),
                     num(kTop + plot_h), num(kTop + plot_h + 5));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(x),
                     num(kTop + plot_h + 20), m.to_iso());
  }
  s += "</g>\n";

  auto polyline = [&](const char* id, const char* color, auto value, auto y_of) {
    std::string pts_attr;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) pts_attr += ' ';
      pts_attr += num(x_of(i)) + "," + num(y_of(value(pts[i])));
    }
    return fmt::format(
        "<polyline id=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", id,
        color, pts_attr);
  };
  s += polyline("wsi-standard", "#1f77b4", [](const Pt& p) { return p.standard; }, left_y);
  s += polyline("wsi-weighted", "#ff7f0e", [](const Pt& p) { return p.weighted; }, left_y);
  s += polyline("yoy", "#2ca02c", [](const Pt& p) { return p.yoy; }, right_y);

  // legend
  const std::pair<const char*, const char*> legend[] = {
      {"#1f77b4", "Standard WSI (left)"}, {"#ff7f0e", "Weighted WSI (left)"}, {"#2ca02c", "YoY wage growth (right)"}};
  double lx = kLeft;
  const double ly = kHeight - 20;
  s += "<g class=\"legend\">\n";
  for (const auto& [color, text] : legend) {
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n",
                     num(lx), num(ly - 4), num(lx + 24), num(ly - 4), color);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 30), num(ly), text);
    lx += 230;
  }
  s += "</g>\n</svg>\n";
  return s;
}

void write_series_chart(const std::string& path, const IndexSeries& series, const WageSeries& wages,
                        const std::string& title) {
  auto svg = render_series_chart(series, wages, title);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write chart {}", path));
  out << svg;
}

CorpusSummary summarize_corpus(const std::vector<SurveyRecord>& records) {
  CorpusSummary s;
  for (const auto& r : records) {
    ++s.by_judgment[r.judgment];
    ++s.by_region[r.region];
    ++s.by_month[r.month];
  }
  return s;
}

void write_corpus_summary(std::ostream& out, const CorpusSummary& summary) {
  out << "table,key,count\n";
  for (const auto& [j, n] : summary.by_judgment) {
    csv::write_row(out, {"judgment", std::string(to_string(j)), std::to_string(n)});
  }
  for (const auto& [region, n] : summary.by_region) {
    csv::write_row(out, {"region", region, std::to_string(n)});
  }
  for (const auto& [m, n] : summary.by_month) {
    csv::write_row(out, {"month", m.to_string(), std::to_string(n)});
  }
}

}  // namespace wsi
