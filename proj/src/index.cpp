#include "wsi/index.hpp"

#include <charconv>

#include <fmt/format.h>

#include "wsi/csv.hpp"
#include "wsi/error.hpp"
#include "wsi/format.hpp"
#include "wsi/kernels.hpp"

namespace wsi {

std::string_view to_string(Normalization n) {
  return n == Normalization::PaperLiteral ? "paper_literal" : "per_comment";
}

std::optional<Normalization> parse_normalization(std::string_view text) {
  if (text == "paper_literal") return Normalization::PaperLiteral;
  if (text == "per_comment") return Normalization::PerComment;
  return std::nullopt;
}

std::optional<double> standard_wsi(const MonthlyCounts& c) {
  if (c.n() <= 0) return std::nullopt;
  return static_cast<double>(c.alpha - c.beta) / static_cast<double>(c.n()) * 100.0;
}

std::optional<double> weighted_wsi(std::span<const ClassProbabilities> triples,
                                   Normalization normalization) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& p : triples) {
    if (p.is_unrelated()) continue;
    sum += (p.u - p.v) / p.sum();
    ++n;
  }
  if (n == 0) return std::nullopt;
  if (normalization == Normalization::PaperLiteral) return sum * 100.0;
  return sum / static_cast<double>(n) * 100.0;
}

MonthlyCounts count_labels(MonthKey month, std::span<const ClassifiedComment> comments) {
  MonthlyCounts c;
  c.month = month;
  for (const auto& cc : comments) {
    switch (cc.failed ? HardLabel::Unrelated : cc.label) {
      case HardLabel::Increase: ++c.alpha; break;
      case HardLabel::Decrease: ++c.beta; break;
      case HardLabel::Neutral: ++c.gamma; break;
      case HardLabel::Unrelated: ++c.excluded; break;
    }
  }
  return c;
}

std::map<MonthKey, double> IndexSeries::standard() const {
  std::map<MonthKey, double> m;
  for (const auto& p : points) m.emplace(p.month, p.wsi_standard);
  return m;
}

std::map<MonthKey, double> IndexSeries::weighted() const {
  std::map<MonthKey, double> m;
  for (const auto& p : points) m.emplace(p.month, p.wsi_weighted);
  return m;
}

IndexSeries build_series(const ClassifiedByMonth& classified, Normalization normalization,
                         int threads) {
  return threads > 1 ? kernels::build_series_omp(classified, normalization, threads)
                     : kernels::build_series_serial(classified, normalization);
}

void write_series_csv(std::ostream& out, const IndexSeries& series) {
  out << "yyyymm,wsi_standard,wsi_weighted,alpha,beta,gamma,excluded,n\n";
  for (const auto& p : series.points) {
    out << p.month.to_string() << ',' << format_shortest(p.wsi_standard) << ','
        << format_shortest(p.wsi_weighted) << ',' << p.counts.alpha << ',' << p.counts.beta << ','
        << p.counts.gamma << ',' << p.counts.excluded << ',' << p.counts.n() << '\n';
  }
}

namespace {

template <typename T>
T parse_number(const std::string& s, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw LoadError(fmt::format("series line {}: bad number '{}'", line, s));
  }
  return value;
}

}  // namespace

IndexSeries read_series_csv(std::istream& in, Normalization normalization) {
  IndexSeries series;
  auto rows = csv::read_all(in);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() < 8) throw LoadError(fmt::format("series line {}: expected 8 fields", rows[i].line));
    auto month = MonthKey::parse(f[0]);
    if (!month) throw LoadError(fmt::format("series line {}: bad month", rows[i].line));
    IndexPoint p;
    p.month = *month;
    p.normalization = normalization;
    p.wsi_standard = parse_number<double>(f[1], rows[i].line);
    p.wsi_weighted = parse_number<double>(f[2], rows[i].line);
    p.counts.month = *month;
    p.counts.alpha = parse_number<std::int64_t>(f[3], rows[i].line);
    p.counts.beta = parse_number<std::int64_t>(f[4], rows[i].line);
    p.counts.gamma = parse_number<std::int64_t>(f[5], rows[i].line);
    p.counts.excluded = parse_number<std::int64_t>(f[6], rows[i].line);
    series.points.push_back(p);
  }
  return series;
}

}  // namespace wsi
