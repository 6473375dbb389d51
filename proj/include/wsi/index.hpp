#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "wsi/classify.hpp"
#include "wsi/month.hpp"

namespace wsi {

/// How the weighted index is scaled. PaperLiteral is the plain sum over
/// comments times 100; PerComment divides that sum by n_t so it lives on
/// the same [-100, 100] scale as the standard index.
enum class Normalization { PaperLiteral, PerComment };

std::string_view to_string(Normalization n);
std::optional<Normalization> parse_normalization(std::string_view text);

struct MonthlyCounts {
  MonthKey month;
  std::int64_t alpha = 0;     // increase
  std::int64_t beta = 0;      // decrease
  std::int64_t gamma = 0;     // neutral
  std::int64_t excluded = 0;  // unrelated or failed

  std::int64_t n() const { return alpha + beta + gamma; }
  friend bool operator==(const MonthlyCounts&, const MonthlyCounts&) = default;
};

struct IndexPoint {
  MonthKey month;
  double wsi_standard = 0.0;
  double wsi_weighted = 0.0;
  MonthlyCounts counts;
  Normalization normalization = Normalization::PerComment;
};

/// (alpha - beta) / (alpha + beta + gamma) * 100; nullopt when n_t = 0.
std::optional<double> standard_wsi(const MonthlyCounts& counts);

/// Sum over comments of (u - v) / (u + v + w) * 100, divided by the number
/// of comments under PerComment. Unrelated triples contribute nothing and
/// are not counted. nullopt when no related triple remains.
std::optional<double> weighted_wsi(std::span<const ClassProbabilities> triples,
                                   Normalization normalization);

MonthlyCounts count_labels(MonthKey month, std::span<const ClassifiedComment> comments);

using ClassifiedByMonth = std::map<MonthKey, std::vector<ClassifiedComment>>;

struct IndexSeries {
  std::vector<IndexPoint> points;    // ascending month, n_t > 0 only
  std::vector<MonthKey> skipped;     // months whose comments were all excluded

  std::map<MonthKey, double> standard() const;
  std::map<MonthKey, double> weighted() const;
};

/// One IndexPoint per month with at least one related comment. `threads`
/// > 1 aggregates months concurrently with identical output.
IndexSeries build_series(const ClassifiedByMonth& classified, Normalization normalization,
                         int threads = 1);

/// `yyyymm,wsi_standard,wsi_weighted,alpha,beta,gamma,excluded,n`
void write_series_csv(std::ostream& out, const IndexSeries& series);
IndexSeries read_series_csv(std::istream& in, Normalization normalization);

}  // namespace wsi
