#include "wsi/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "wsi/csv.hpp"
#include "wsi/error.hpp"
#include "wsi/format.hpp"

namespace wsi {

std::string_view to_string(Judgment j) {
  switch (j) {
    case Judgment::Excellent: return "Excellent";
    case Judgment::Good: return "Good";
    case Judgment::Unchanged: return "Unchanged";
    case Judgment::SlightlyBad: return "Slightly Bad";
    case Judgment::Bad: return "Bad";
  }
  return "Unchanged";
}

std::string SurveySchema::normalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  for (char c : label) {
    if (c == ' ' || c == '-' || c == '_' || c == '\t') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::unordered_map<std::string, Judgment> SurveySchema::default_aliases() {
  std::unordered_map<std::string, Judgment> m;
  auto add = [&m](std::initializer_list<std::string_view> labels, Judgment j) {
    for (auto l : labels) m.emplace(normalize_label(l), j);
  };
  // English, romanized Japanese, and the survey's own symbols.
  add({"Excellent", "yoi", "\xe8\x89\xaf"}, Judgment::Excellent);
  add({"Good", "yaya yoi", "\xe3\x82\x84\xe3\x82\x84\xe8\x89\xaf"}, Judgment::Good);
  add({"Unchanged", "fuhen", "kawaranai", "\xe4\xb8\x8d\xe5\xa4\x89"}, Judgment::Unchanged);
  add({"Slightly Bad", "yaya warui", "\xe3\x82\x84\xe3\x82\x84\xe6\x82\xaa"}, Judgment::SlightlyBad);
  add({"Bad", "warui", "\xe6\x82\xaa"}, Judgment::Bad);
  return m;
}

std::optional<Judgment> SurveySchema::judgment_for(std::string_view label) const {
  auto it = judgment_aliases.find(normalize_label(label));
  if (it == judgment_aliases.end()) return std::nullopt;
  return it->second;
}

void SurveySchema::add_alias(std::string_view label, Judgment judgment) {
  judgment_aliases[normalize_label(label)] = judgment;
}

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::ptrdiff_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

}  // namespace

SurveyLoadResult parse_survey(std::istream& in, const SurveySchema& schema,
                              const std::string& source) {
  csv::Reader reader(in);
  auto header = reader.next();
  SurveyLoadResult result;
  if (!header) return result;

  // strip a UTF-8 BOM if present
  if (!header->fields.empty() && header->fields[0].rfind("\xef\xbb\xbf", 0) == 0) {
    header->fields[0].erase(0, 3);
  }
  auto require = [&](const std::string& name) {
    auto idx = column_index(header->fields, name);
    if (idx < 0) throw LoadError(fmt::format("{}: missing required column '{}'", source, name));
    return static_cast<std::size_t>(idx);
  };
  const auto month_col = require(schema.month_column);
  const auto region_col = require(schema.region_column);
  const auto industry_col = require(schema.industry_column);
  const auto judgment_col = require(schema.judgment_column);
  const auto comment_col = require(schema.comment_column);
  const auto translated_col = column_index(header->fields, schema.translated_column);

  const std::size_t needed =
      std::max({month_col, region_col, industry_col, judgment_col, comment_col}) + 1;

  while (auto row = reader.next()) {
    auto& f = row->fields;
    if (f.size() < needed) {
      result.errors.push_back({source, row->line,
                               fmt::format("expected at least {} fields, got {}", needed, f.size())});
      continue;
    }
    auto month = MonthKey::parse(f[month_col]);
    if (!month) {
      result.errors.push_back({source, row->line, fmt::format("invalid month '{}'", f[month_col])});
      continue;
    }
    auto judgment = schema.judgment_for(f[judgment_col]);
    if (!judgment) {
      result.errors.push_back(
          {source, row->line, fmt::format("unknown judgment label '{}'", f[judgment_col])});
      continue;
    }
    if (is_blank(f[comment_col])) {
      ++result.skipped_empty;
      continue;
    }
    SurveyRecord rec;
    rec.month = *month;
    rec.region = trim(f[region_col]);
    rec.industry = trim(f[industry_col]);
    rec.judgment = *judgment;
    rec.comment = std::move(f[comment_col]);
    if (translated_col >= 0 && static_cast<std::size_t>(translated_col) < f.size() &&
        !f[static_cast<std::size_t>(translated_col)].empty()) {
      rec.comment_translated = std::move(f[static_cast<std::size_t>(translated_col)]);
    }
    result.records.push_back(std::move(rec));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const SurveyRecord& a, const SurveyRecord& b) { return a.month < b.month; });
  return result;
}

SurveyLoadResult load_survey(const std::string& path, const SurveySchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot open survey file {}", path));
  return parse_survey(in, schema, path);
}

SurveyLoadResult load_surveys(const std::vector<std::string>& paths, const SurveySchema& schema) {
  SurveyLoadResult all;
  for (const auto& p : paths) {
    auto part = load_survey(p, schema);
    all.records.insert(all.records.end(), std::make_move_iterator(part.records.begin()),
                       std::make_move_iterator(part.records.end()));
    all.errors.insert(all.errors.end(), part.errors.begin(), part.errors.end());
    all.skipped_empty += part.skipped_empty;
  }
  std::stable_sort(all.records.begin(), all.records.end(),
                   [](const SurveyRecord& a, const SurveyRecord& b) { return a.month < b.month; });
  return all;
}

void write_survey(std::ostream& out, const std::vector<SurveyRecord>& records) {
  out << "yyyymm,region,industry,judgment,comment,comment_translated\n";
  for (const auto& r : records) {
    csv::write_row(out, {r.month.to_string(), r.region, r.industry, std::string(to_string(r.judgment)),
                         r.comment, r.comment_translated.value_or("")});
  }
}

WageSeries WageSeries::from_levels(std::map<MonthKey, double> levels) {
  WageSeries s;
  std::optional<MonthKey> prev;
  for (const auto& [m, level] : levels) {
    if (!(level > 0.0) || !std::isfinite(level)) {
      throw LoadError(fmt::format("non-positive wage level {} at {}", level, m.to_string()));
    }
    if (prev && m != prev->next()) {
      throw LoadError(fmt::format("gap in wage series: missing month {}", prev->next().to_string()));
    }
    prev = m;
  }
  s.levels_ = std::move(levels);
  for (const auto& [m, level] : s.levels_) {
    auto base = s.levels_.find(m.minus(12));
    if (base != s.levels_.end()) s.yoy_.emplace(m, (level / base->second - 1.0) * 100.0);
  }
  return s;
}

std::optional<double> WageSeries::level(MonthKey m) const {
  auto it = levels_.find(m);
  if (it == levels_.end()) return std::nullopt;
  return it->second;
}

WageSeries parse_wages(std::istream& in, const std::string& source) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw LoadError(fmt::format("{}: empty wage file", source));
  std::map<MonthKey, double> levels;
  while (auto row = reader.next()) {
    if (row->fields.size() < 2) {
      throw LoadError(fmt::format("{}:{}: expected yyyymm,level", source, row->line));
    }
    auto month = MonthKey::parse(row->fields[0]);
    if (!month) {
      throw LoadError(fmt::format("{}:{}: invalid month '{}'", source, row->line, row->fields[0]));
    }
    auto text = trim(row->fields[1]);
    double level = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), level);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw LoadError(fmt::format("{}:{}: invalid level '{}'", source, row->line, row->fields[1]));
    }
    if (!levels.emplace(*month, level).second) {
      throw LoadError(fmt::format("{}:{}: duplicate month {}", source, row->line, month->to_string()));
    }
  }
  try {
    return WageSeries::from_levels(std::move(levels));
  } catch (const LoadError& e) {
    throw LoadError(fmt::format("{}: {}", source, e.what()));
  }
}

WageSeries load_wages(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot open wage file {}", path));
  return parse_wages(in, path);
}

void write_wages(std::ostream& out, const WageSeries& series) {
  out << "yyyymm,level\n";
  for (const auto& [m, level] : series.levels()) {
    out << m.to_string() << ',' << format_shortest(level) << '\n';
  }
}

std::optional<double> yoy(const WageSeries& series, MonthKey t) {
  auto now = series.level(t);
  auto base = series.level(t.minus(12));
  if (!now || !base) return std::nullopt;
  return (*now / *base - 1.0) * 100.0;
}

MonthGroups group_by_month(const std::vector<SurveyRecord>& records) {
  MonthGroups groups;
  for (const auto& r : records) groups[r.month].push_back(r);
  return groups;
}

}  // namespace wsi
