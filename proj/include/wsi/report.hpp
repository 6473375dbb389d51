#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "wsi/corpus.hpp"
#include "wsi/econometrics.hpp"
#include "wsi/index.hpp"

namespace wsi {

enum class TableFormat { Csv, Markdown, Latex };

/// Identifies one sweep in rendered output.
struct SweepLabel {
  std::string backend;
  std::string index_kind;  // "standard" or "weighted"
};

/// "1 & 18.390 & 0.000***": lag, F and p to three decimals (half-up), stars
/// from the unrounded p-value.
std::string latex_row(const GrangerResult& r);

/// One sweep as a table with rows in ascending lag order; lags the sweep
/// skipped appear with "NA" values. CSV columns are
/// `backend,index_kind,lag,f_stat,p_value,stars`.
std::string render_granger_table(const GrangerSweep& sweep, TableFormat format,
                                 const SweepLabel& label = {});

struct NamedSweep {
  SweepLabel label;
  GrangerSweep sweep;
};

/// Side-by-side comparison, one sub-table per backend, for one index kind.
std::string render_comparison_latex(const std::vector<NamedSweep>& sweeps, const std::string& caption);
std::string render_comparison_markdown(const std::vector<NamedSweep>& sweeps, const std::string& title);

/// Full-precision export: `backend,index_kind,lag,f_stat,p_value,stars`.
void write_granger_csv(std::ostream& out, const SweepLabel& label, const GrangerSweep& sweep);

/// Dual-axis SVG: standard and weighted indices on the left axis (fixed to
/// [-100, 100] unless the data leaves it), yoy on the right axis scaled to
/// data with 10% padding. Needs at least two months where both exist;
/// throws wsi::Error otherwise.
std::string render_series_chart(const IndexSeries& series, const WageSeries& wages,
                                const std::string& title = "Wage Sentiment Index");
void write_series_chart(const std::string& path, const IndexSeries& series, const WageSeries& wages,
                        const std::string& title = "Wage Sentiment Index");

struct CorpusSummary {
  std::map<Judgment, std::size_t> by_judgment;
  std::map<std::string, std::size_t> by_region;
  std::map<MonthKey, std::size_t> by_month;
};

CorpusSummary summarize_corpus(const std::vector<SurveyRecord>& records);
/// `table,key,count` with table in {judgment, region, month}.
void write_corpus_summary(std::ostream& out, const CorpusSummary& summary);

}  // namespace wsi
