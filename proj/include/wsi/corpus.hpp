#pragma once

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wsi/month.hpp"

namespace wsi {

enum class Judgment { Excellent, Good, Unchanged, SlightlyBad, Bad };

inline constexpr std::array<Judgment, 5> kAllJudgments = {
    Judgment::Excellent, Judgment::Good, Judgment::Unchanged, Judgment::SlightlyBad, Judgment::Bad};

/// Canonical English label ("Excellent", "Good", "Unchanged", "Slightly Bad", "Bad").
std::string_view to_string(Judgment j);

struct SurveyRecord {
  MonthKey month;
  std::string region;
  std::string industry;
  Judgment judgment = Judgment::Unchanged;
  std::string comment;
  std::optional<std::string> comment_translated;

  /// Text fed to classifiers: the translation when present, else the source comment.
  const std::string& analysis_text() const {
    return comment_translated ? *comment_translated : comment;
  }

  friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

/// Column mapping and judgment label aliases for survey CSV files.
struct SurveySchema {
  std::string month_column = "yyyymm";
  std::string region_column = "region";
  std::string industry_column = "industry";
  std::string judgment_column = "judgment";
  std::string comment_column = "comment";
  std::string translated_column = "comment_translated";  // optional in input

  /// Normalized label (lowercase, no spaces/hyphens/underscores) -> judgment.
  std::unordered_map<std::string, Judgment> judgment_aliases = default_aliases();

  static std::unordered_map<std::string, Judgment> default_aliases();
  static std::string normalize_label(std::string_view label);

  std::optional<Judgment> judgment_for(std::string_view label) const;
  void add_alias(std::string_view label, Judgment judgment);
};

struct RowError {
  std::string source;
  std::size_t line = 0;
  std::string reason;
};

struct SurveyLoadResult {
  std::vector<SurveyRecord> records;
  std::vector<RowError> errors;
  std::size_t skipped_empty = 0;
};

/// Parses one survey CSV. Bad rows are collected in `errors` rather than
/// thrown; a missing file or missing required column throws wsi::LoadError.
/// Records come back sorted by month, stable in input order.
SurveyLoadResult load_survey(const std::string& path, const SurveySchema& schema = {});
SurveyLoadResult parse_survey(std::istream& in, const SurveySchema& schema = {},
                              const std::string& source = "<stream>");

/// Loads several files; same contract as load_survey over their concatenation.
SurveyLoadResult load_surveys(const std::vector<std::string>& paths,
                              const SurveySchema& schema = {});

/// Canonical format: `yyyymm,region,industry,judgment,comment,comment_translated`.
void write_survey(std::ostream& out, const std::vector<SurveyRecord>& records);

/// Nominal wage index levels over a contiguous span of months plus the
/// derived year-on-year growth in percent.
class WageSeries {
 public:
  WageSeries() = default;
  /// Throws wsi::LoadError on a gap or on a non-positive level.
  static WageSeries from_levels(std::map<MonthKey, double> levels);

  const std::map<MonthKey, double>& levels() const noexcept { return levels_; }
  const std::map<MonthKey, double>& yoy() const noexcept { return yoy_; }
  std::optional<double> level(MonthKey m) const;
  bool empty() const noexcept { return levels_.empty(); }

 private:
  std::map<MonthKey, double> levels_;
  std::map<MonthKey, double> yoy_;
};

/// Two-column `yyyymm,level` CSV. Gaps, duplicates and non-positive levels
/// are load errors.
WageSeries load_wages(const std::string& path);
WageSeries parse_wages(std::istream& in, const std::string& source = "<stream>");
void write_wages(std::ostream& out, const WageSeries& series);

/// (level(t) / level(t-12) - 1) * 100, or nullopt if either month is missing.
std::optional<double> yoy(const WageSeries& series, MonthKey t);

using MonthGroups = std::map<MonthKey, std::vector<SurveyRecord>>;

MonthGroups group_by_month(const std::vector<SurveyRecord>& records);

}  // namespace wsi
