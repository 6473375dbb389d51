#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "wsi/classify.hpp"
#include "wsi/corpus.hpp"
#include "wsi/month.hpp"

namespace wsi {

class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// The shipped English list (assets/stopwords_en_v1.txt).
  static const StopWords& english();
  /// One word per line; blank lines and '#' comments ignored.
  static StopWords parse(std::istream& in);

  bool contains(std::string_view word) const { return words_.count(std::string(word)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Lowercased runs of ASCII alphanumerics (bytes >= 0x80 count as word
/// characters so UTF-8 words stay whole). No stop-word removal.
std::vector<std::string> tokenize_all(std::string_view text);

/// tokenize_all minus stop words.
std::vector<std::string> tokenize(std::string_view text,
                                  const StopWords& stop_words = StopWords::english());

/// Per-term monthly occurrence counts over a contiguous month span. Months
/// inside the span without any comment count as zero.
struct TermFrequencyTable {
  MonthRange span;
  std::vector<std::string> terms;             // sorted ascending
  std::vector<std::vector<double>> counts;    // [term][month - span.first]

  std::optional<std::size_t> find(std::string_view term) const;
  std::size_t months() const { return static_cast<std::size_t>(span.size()); }
};

/// Month -> the analysis texts of that month.
using MonthTexts = std::map<MonthKey, std::vector<std::string>>;

MonthTexts texts_by_month(const MonthGroups& groups);

/// Counts stop-word-filtered tokens per month. Terms whose total count over
/// the whole span is below `min_total` are dropped up front.
TermFrequencyTable count_terms(const MonthTexts& texts, const StopWords& stop_words = StopWords::english(),
                               double min_total = 0.0, int threads = 1);

struct TermStats {
  std::string term;
  MonthRange window;
  std::vector<std::int64_t> monthly;  // counts for window.first .. window.last
  double mean_frequency = 0.0;
  /// Pearson correlation with yoy over the window; absent when either
  /// series has zero variance.
  std::optional<double> correlation;
};

/// Terms with mean monthly frequency >= min_mean_frequency over `window`,
/// with their correlation against yoy for the same months. Throws
/// wsi::LengthError for windows under two months and wsi::Error when yoy
/// is missing for a window month.
std::vector<TermStats> build_term_stats(const TermFrequencyTable& table,
                                        const std::map<MonthKey, double>& yoy, MonthRange window,
                                        double min_mean_frequency = 5.0);

/// Convenience overload that tokenizes and counts `groups` first.
std::vector<TermStats> build_term_stats(const MonthGroups& groups, const WageSeries& wages,
                                        MonthRange window, double min_mean_frequency = 5.0);

enum class Polarity { Positive, Negative };

struct LexiconTerm {
  std::string term;
  double correlation = 0.0;
};

class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(MonthKey as_of, std::vector<LexiconTerm> positive, std::vector<LexiconTerm> negative,
          std::size_t top_k = 10);

  MonthKey as_of() const { return as_of_; }
  /// Always as_of - 2 months.
  MonthKey window_end() const { return as_of_.minus(2); }
  const std::vector<LexiconTerm>& positive() const { return positive_; }
  const std::vector<LexiconTerm>& negative() const { return negative_; }
  /// Fewer than top_k terms available in at least one polarity.
  bool degenerate() const { return degenerate_; }
  std::optional<Polarity> polarity(std::string_view term) const;

 private:
  MonthKey as_of_;
  std::vector<LexiconTerm> positive_;
  std::vector<LexiconTerm> negative_;
  bool degenerate_ = false;
  std::unordered_map<std::string, Polarity> lookup_;
};

/// Top `top_k` terms by descending correlation (> 0) and by ascending
/// correlation (< 0). Ties resolve alphabetically. Stats must come from the
/// window ending at as_of - 2 months.
Lexicon select_lexicon(const std::vector<TermStats>& stats, MonthKey as_of, std::size_t top_k = 10);

enum class Smoothing {
  /// u = P/(P+N+1), v = N/(P+N+1), w = 1/(P+N+1)
  Laplace,
  /// u = P/(P+N), v = N/(P+N), w = 0
  None,
};

enum class WindowKind { Expanding, Rolling };

struct LexiconPolicy {
  WindowKind window = WindowKind::Expanding;
  int rolling_months = 60;
  Smoothing smoothing = Smoothing::Laplace;
  double min_mean_frequency = 5.0;
  std::size_t top_k = 10;
};

struct LexiconHits {
  std::int64_t positive = 0;
  std::int64_t negative = 0;
};

LexiconHits count_hits(const std::vector<std::string>& tokens, const Lexicon& lexicon);

/// P+N = 0 -> unrelated, else the smoothing rule above.
ClassProbabilities lexicon_classify(const std::vector<std::string>& tokens, const Lexicon& lexicon,
                                    Smoothing smoothing = Smoothing::Laplace);

/// Correlation window for a target month: ends at as_of - 2 and starts at
/// the first month with both counts and yoy (expanding) or at most
/// rolling_months earlier. nullopt when fewer than two months qualify.
std::optional<MonthRange> lexicon_window(MonthKey as_of, const TermFrequencyTable& table,
                                         const std::map<MonthKey, double>& yoy,
                                         const LexiconPolicy& policy);

/// Window + build_term_stats + select_lexicon for one target month.
std::optional<Lexicon> rolling_lexicon(const TermFrequencyTable& table,
                                       const std::map<MonthKey, double>& yoy, MonthKey as_of,
                                       const LexiconPolicy& policy = {});

/// rolling_lexicon for each target month.
std::vector<std::optional<Lexicon>> rolling_lexicons(const TermFrequencyTable& table,
                                                     const std::map<MonthKey, double>& yoy,
                                                     const std::vector<MonthKey>& targets,
                                                     const LexiconPolicy& policy = {},
                                                     int threads = 1);

/// Audit CSV: `as_of,polarity,rank,term,correlation`.
void write_lexicon_audit(std::ostream& out, const std::vector<Lexicon>& lexicons);

}  // namespace wsi
