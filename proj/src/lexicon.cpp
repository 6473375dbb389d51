#include "wsi/lexicon.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "wsi/econometrics.hpp"
#include "wsi/error.hpp"
#include "wsi/format.hpp"
#include "wsi/kernels.hpp"

namespace wsi {

namespace detail {
extern const char* const kStopWordsEnglish;
}

const StopWords& StopWords::english() {
  static const StopWords words = [] {
    std::istringstream in(detail::kStopWordsEnglish);
    return parse(in);
  }();
  return words;
}

StopWords StopWords::parse(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& tok : tokenize_all(line)) words.insert(std::move(tok));
  }
  return StopWords(std::move(words));
}

namespace {

inline bool word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline char lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

std::vector<std::string> tokenize_all(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (word_byte(c)) {
      cur.push_back(lower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text, const StopWords& stop_words) {
  auto tokens = tokenize_all(text);
  std::erase_if(tokens, [&](const std::string& t) { return stop_words.contains(t); });
  return tokens;
}

std::optional<std::size_t> TermFrequencyTable::find(std::string_view term) const {
  auto it = std::lower_bound(terms.begin(), terms.end(), term);
  if (it == terms.end() || *it != term) return std::nullopt;
  return static_cast<std::size_t>(it - terms.begin());
}

MonthTexts texts_by_month(const MonthGroups& groups) {
  MonthTexts out;
  for (const auto& [month, records] : groups) {
    auto& texts = out[month];
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.analysis_text());
  }
  return out;
}

TermFrequencyTable count_terms(const MonthTexts& texts, const StopWords& stop_words,
                               double min_total, int threads) {
  return threads > 1 ? kernels::count_terms_omp(texts, stop_words, min_total, threads)
                     : kernels::count_terms_serial(texts, stop_words, min_total);
}

std::vector<TermStats> build_term_stats(const TermFrequencyTable& table,
                                        const std::map<MonthKey, double>& yoy, MonthRange window,
                                        double min_mean_frequency) {
  if (window.size() < 2) {
    throw LengthError("build_term_stats: correlation window needs at least two months");
  }
  if (!table.span.contains(window.first) || !table.span.contains(window.last)) {
    throw Error(fmt::format("build_term_stats: window {}..{} outside the counted span",
                            window.first.to_string(), window.last.to_string()));
  }
  const auto w = static_cast<std::size_t>(window.size());
  std::vector<double> target(w);
  for (std::size_t i = 0; i < w; ++i) {
    auto m = window.first.plus(static_cast<std::int64_t>(i));
    auto it = yoy.find(m);
    if (it == yoy.end()) throw Error(fmt::format("build_term_stats: no yoy for {}", m.to_string()));
    target[i] = it->second;
  }

  const auto offset = static_cast<std::size_t>(months_between(table.span.first, window.first));
  std::vector<TermStats> out;
  for (std::size_t t = 0; t < table.terms.size(); ++t) {
    const double* row = table.counts[t].data() + offset;
    double total = 0.0;
    for (std::size_t i = 0; i < w; ++i) total += row[i];
    double mean = total / static_cast<double>(w);
    if (mean < min_mean_frequency) continue;
    TermStats s;
    s.term = table.terms[t];
    s.window = window;
    s.mean_frequency = mean;
    s.monthly.reserve(w);
    for (std::size_t i = 0; i < w; ++i) s.monthly.push_back(static_cast<std::int64_t>(row[i]));
    s.correlation = try_pearson(std::span<const double>(row, w), target);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TermStats> build_term_stats(const MonthGroups& groups, const WageSeries& wages,
                                        MonthRange window, double min_mean_frequency) {
  MonthTexts texts;
  for (const auto& [m, records] : groups) {
    if (!window.contains(m)) continue;
    auto& v = texts[m];
    for (const auto& r : records) v.push_back(r.analysis_text());
  }
  // make sure the table covers the full window even if edge months are empty
  texts[window.first];
  texts[window.last];
  auto table = count_terms(texts);
  return build_term_stats(table, wages.yoy(), window, min_mean_frequency);
}

Lexicon::Lexicon(MonthKey as_of, std::vector<LexiconTerm> positive,
                 std::vector<LexiconTerm> negative, std::size_t top_k)
    : as_of_(as_of), positive_(std::move(positive)), negative_(std::move(negative)) {
  degenerate_ = positive_.size() < top_k || negative_.size() < top_k;
  for (const auto& t : positive_) lookup_.emplace(t.term, Polarity::Positive);
  for (const auto& t : negative_) {
    if (!lookup_.emplace(t.term, Polarity::Negative).second) {
      throw Error(fmt::format("lexicon term '{}' is both positive and negative", t.term));
    }
  }
}

std::optional<Polarity> Lexicon::polarity(std::string_view term) const {
  auto it = lookup_.find(std::string(term));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

Lexicon select_lexicon(const std::vector<TermStats>& stats, MonthKey as_of, std::size_t top_k) {
  const MonthKey expected_end = as_of.minus(2);
  std::vector<LexiconTerm> pos, neg;
  for (const auto& s : stats) {
    if (s.window.last != expected_end) {
      throw Error(fmt::format("select_lexicon: stats window ends {} but target {} needs {}",
                              s.window.last.to_string(), as_of.to_string(), expected_end.to_string()));
    }
    if (!s.correlation) continue;
    if (*s.correlation > 0.0) pos.push_back({s.term, *s.correlation});
    if (*s.correlation < 0.0) neg.push_back({s.term, *s.correlation});
  }
  auto by_desc = [](const LexiconTerm& a, const LexiconTerm& b) {
    return a.correlation != b.correlation ? a.correlation > b.correlation : a.term < b.term;
  };
  auto by_asc = [](const LexiconTerm& a, const LexiconTerm& b) {
    return a.correlation != b.correlation ? a.correlation < b.correlation : a.term < b.term;
  };
  std::sort(pos.begin(), pos.end(), by_desc);
  std::sort(neg.begin(), neg.end(), by_asc);
  if (pos.size() > top_k) pos.resize(top_k);
  if (neg.size() > top_k) neg.resize(top_k);
  return Lexicon(as_of, std::move(pos), std::move(neg), top_k);
}

LexiconHits count_hits(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
  LexiconHits hits;
  for (const auto& t : tokens) {
    if (auto p = lexicon.polarity(t)) {
      if (*p == Polarity::Positive) {
        ++hits.positive;
      } else {
        ++hits.negative;
      }
    }
  }
  return hits;
}

ClassProbabilities lexicon_classify(const std::vector<std::string>& tokens, const Lexicon& lexicon,
                                    Smoothing smoothing) {
  auto hits = count_hits(tokens, lexicon);
  auto p = static_cast<double>(hits.positive);
  auto n = static_cast<double>(hits.negative);
  if (p + n == 0.0) return ClassProbabilities::unrelated();
  if (smoothing == Smoothing::None) return {p / (p + n), n / (p + n), 0.0};
  double d = p + n + 1.0;
  return {p / d, n / d, 1.0 / d};
}

std::optional<MonthRange> lexicon_window(MonthKey as_of, const TermFrequencyTable& table,
                                         const std::map<MonthKey, double>& yoy,
                                         const LexiconPolicy& policy) {
  if (table.span.empty() || yoy.empty()) return std::nullopt;
  MonthRange w;
  w.last = as_of.minus(2);
  w.first = std::max(table.span.first, yoy.begin()->first);
  if (policy.window == WindowKind::Rolling) {
    w.first = std::max(w.first, w.last.minus(std::max(policy.rolling_months, 2) - 1));
  }
  if (w.size() < 2 || !table.span.contains(w.last)) return std::nullopt;
  // yoy must cover every window month
  if (yoy.rbegin()->first < w.last) return std::nullopt;
  for (auto m = w.first; m <= w.last; m = m.next()) {
    if (!yoy.count(m)) return std::nullopt;
  }
  return w;
}

std::optional<Lexicon> rolling_lexicon(const TermFrequencyTable& table,
                                       const std::map<MonthKey, double>& yoy, MonthKey as_of,
                                       const LexiconPolicy& policy) {
  auto window = lexicon_window(as_of, table, yoy, policy);
  if (!window) return std::nullopt;
  auto stats = build_term_stats(table, yoy, *window, policy.min_mean_frequency);
  return select_lexicon(stats, as_of, policy.top_k);
}

std::vector<std::optional<Lexicon>> rolling_lexicons(const TermFrequencyTable& table,
                                                     const std::map<MonthKey, double>& yoy,
                                                     const std::vector<MonthKey>& targets,
                                                     const LexiconPolicy& policy, int threads) {
  return threads > 1 ? kernels::rolling_lexicons_omp(table, yoy, targets, policy, threads)
                     : kernels::rolling_lexicons_serial(table, yoy, targets, policy);
}

void write_lexicon_audit(std::ostream& out, const std::vector<Lexicon>& lexicons) {
  out << "as_of,polarity,rank,term,correlation\n";
  for (const auto& lex : lexicons) {
    auto emit = [&](const std::vector<LexiconTerm>& terms, std::string_view polarity) {
      for (std::size_t i = 0; i < terms.size(); ++i) {
        out << lex.as_of().to_string() << ',' << polarity << ',' << (i + 1) << ','
            << terms[i].term << ',' << format_shortest(terms[i].correlation) << '\n';
      }
    };
    emit(lex.positive(), "positive");
    emit(lex.negative(), "negative");
  }
}

}  // namespace wsi
