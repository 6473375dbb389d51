#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "support.hpp"
#include "wsi/error.hpp"
#include "wsi/lexicon.hpp"

using namespace wsi;

namespace {

/// Independent tokenizer oracle reading the stop-word asset file directly.
std::map<std::string, long> oracle_counts(const std::vector<std::string>& docs) {
  std::unordered_set<std::string> stop;
  std::ifstream in(std::string(WSI_ASSETS_DIR) + "/stopwords_en_v1.txt");
  for (std::string w; std::getline(in, w);) {
    if (!w.empty() && w[0] != '#') stop.insert(w);
  }
  std::map<std::string, long> counts;
  for (const auto& d : docs) {
    std::string cur;
    for (std::size_t i = 0; i <= d.size(); ++i) {
      unsigned char c = i < d.size() ? static_cast<unsigned char>(d[i]) : ' ';
      if (std::isalnum(c) || c >= 0x80) {
        cur += static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c);
      } else if (!cur.empty()) {
        if (!stop.count(cur)) ++counts[cur];
        cur.clear();
      }
    }
  }
  return counts;
}

TermStats stat(const std::string& term, double corr, MonthRange window) {
  TermStats s;
  s.term = term;
  s.window = window;
  s.mean_frequency = 10;
  s.correlation = corr;
  return s;
}

/// AR(1) yoy path starting at `start`.
std::map<MonthKey, double> yoy_path(MonthKey start, int months, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 0.5);
  std::map<MonthKey, double> out;
  double g = 2.0;
  for (int i = 0; i < months; ++i) {
    g = 2.0 + 0.8 * (g - 2.0) + e(rng);
    out[start.plus(i)] = g;
  }
  return out;
}

/// Corpus in which "bonus" appears round(10 + 2*yoy) times a month, plus
/// noise terms with random counts.
MonthTexts bonus_corpus(const std::map<MonthKey, double>& yoy, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MonthTexts texts;
  for (const auto& [m, g] : yoy) {
    auto& v = texts[m];
    int bonus = static_cast<int>(std::lround(10 + 2 * g));
    for (int k = 0; k < bonus; ++k) v.push_back("the bonus was paid");
    for (int t = 0; t < 30; ++t) {
      int n = 3 + static_cast<int>(rng() % 10);
      for (int k = 0; k < n; ++k) v.push_back(fmt::format("noise{} here", t));
    }
  }
  return texts;
}

}  // namespace

TEST_SUITE("lexicon") {
  TEST_CASE("tokenizer examples") {
    CHECK(tokenize("Wages were RAISED!") == std::vector<std::string>{"wages", "raised"});
    CHECK(tokenize("").empty());
    CHECK(tokenize_all("Up 3.5% in Q2") == std::vector<std::string>{"up", "3", "5", "in", "q2"});
    CHECK(tokenize_all("caf\xc3\xa9 bonus") == std::vector<std::string>{"caf\xc3\xa9", "bonus"});
    CHECK(StopWords::english().contains("were"));
    CHECK_FALSE(StopWords::english().contains("not"));
  }

  TEST_CASE("1000-document corpus counts match an independent recount") {
    std::mt19937_64 rng(21);
    const std::vector<std::string> words{"Wage", "RAISE", "the", "bonus", "cut,", "were", "Sales!", "q4",
                                         "and", "freeze", "(hike)", "it's", "pay-rise", "\xe8\xb3\x83\xe9\x87\x91"};
    std::vector<std::string> docs;
    MonthTexts texts;
    for (int i = 0; i < 1000; ++i) {
      std::string d;
      int n = 1 + static_cast<int>(rng() % 15);
      for (int k = 0; k < n; ++k) d += words[rng() % words.size()] + (rng() % 3 ? " " : "  ");
      docs.push_back(d);
      texts[MonthKey(2000, 1).plus(i % 12)].push_back(d);
    }
    auto oracle = oracle_counts(docs);
    auto table = count_terms(texts);
    std::map<std::string, long> got;
    for (std::size_t t = 0; t < table.terms.size(); ++t) {
      double total = 0;
      for (double c : table.counts[t]) total += c;
      got[table.terms[t]] = static_cast<long>(total);
    }
    CHECK(got == oracle);
  }

  TEST_CASE("count table covers the full span with zero months") {
    MonthTexts texts;
    texts[MonthKey(2000, 1)] = {"bonus bonus"};
    texts[MonthKey(2000, 4)] = {"bonus"};
    auto table = count_terms(texts);
    CHECK(table.months() == 4);
    auto idx = table.find("bonus");
    REQUIRE(idx);
    CHECK(table.counts[*idx] == std::vector<double>{2, 0, 0, 1});
    CHECK_FALSE(table.find("missing"));
    auto filtered = count_terms(texts, StopWords::english(), 4.0);
    CHECK_FALSE(filtered.find("bonus"));
  }

  TEST_CASE("frequency threshold boundary and zero-variance exclusion") {
    MonthTexts texts;
    std::map<MonthKey, double> yoy;
    for (int i = 0; i < 12; ++i) {
      auto m = MonthKey(2001, 1).plus(i);
      yoy[m] = i;
      for (int k = 0; k < 5; ++k) texts[m].push_back("steady");
      for (int k = 0; k < 4; ++k) texts[m].push_back("rare");
      for (int k = 0; k < 5 + i; ++k) texts[m].push_back("rising");
    }
    auto table = count_terms(texts);
    auto stats = build_term_stats(table, yoy, {MonthKey(2001, 1), MonthKey(2001, 12)});
    std::map<std::string, TermStats> by;
    for (auto& s : stats) by[s.term] = s;
    REQUIRE(by.count("steady"));
    CHECK(by["steady"].mean_frequency == 5.0);
    CHECK_FALSE(by["steady"].correlation);
    CHECK_FALSE(by.count("rare"));
    REQUIRE(by["rising"].correlation);
    CHECK(*by["rising"].correlation == doctest::Approx(1.0));

    auto lex = select_lexicon(stats, MonthKey(2002, 2));
    CHECK_FALSE(lex.polarity("steady"));
    CHECK(lex.polarity("rising") == Polarity::Positive);
  }

  TEST_CASE("term stats input checks") {
    MonthTexts texts{{MonthKey(2001, 1), {"a"}}, {MonthKey(2001, 2), {"a"}}};
    auto table = count_terms(texts);
    std::map<MonthKey, double> yoy{{MonthKey(2001, 1), 1.0}};
    CHECK_THROWS_AS(build_term_stats(table, yoy, {MonthKey(2001, 1), MonthKey(2001, 1)}), LengthError);
    CHECK_THROWS_AS(build_term_stats(table, yoy, {MonthKey(2001, 1), MonthKey(2001, 2)}), Error);
  }

  TEST_CASE("bonus frequency linear in yoy correlates above 0.9") {
    auto yoy = yoy_path(MonthKey(2001, 1), 120, 4);
    auto table = count_terms(bonus_corpus(yoy, 5));
    MonthRange window{MonthKey(2001, 1), MonthKey(2010, 12)};
    auto stats = build_term_stats(table, yoy, window);
    auto it = std::find_if(stats.begin(), stats.end(), [](const auto& s) { return s.term == "bonus"; });
    REQUIRE(it != stats.end());
    std::vector<double> x, y;
    for (std::int64_t i = 0; i < window.size(); ++i) {
      x.push_back(static_cast<double>(it->monthly[static_cast<std::size_t>(i)]));
      y.push_back(yoy.at(window.first.plus(i)));
    }
    const double oracle = wsi::test::two_pass_pearson(x, y);
    CHECK(oracle > 0.9);
    CHECK(*it->correlation == doctest::Approx(oracle).epsilon(1e-12));
  }

  TEST_CASE("selection keeps the top 10 of 25 candidates") {
    MonthRange window{MonthKey(2000, 1), MonthKey(2004, 12)};
    std::vector<TermStats> stats;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> d(0.01, 0.99);
    for (int i = 0; i < 25; ++i) stats.push_back(stat(fmt::format("pos{:02}", i), d(rng), window));
    for (int i = 0; i < 25; ++i) stats.push_back(stat(fmt::format("neg{:02}", i), -d(rng), window));
    auto lex = select_lexicon(stats, MonthKey(2005, 2));
    REQUIRE(lex.positive().size() == 10);
    REQUIRE(lex.negative().size() == 10);
    CHECK_FALSE(lex.degenerate());

    auto sorted = stats;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return *a.correlation > *b.correlation; });
    for (int i = 0; i < 10; ++i) CHECK(lex.positive()[static_cast<std::size_t>(i)].term == sorted[static_cast<std::size_t>(i)].term);
    std::reverse(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) CHECK(lex.negative()[static_cast<std::size_t>(i)].term == sorted[static_cast<std::size_t>(i)].term);
  }

  TEST_CASE("few candidates give a degenerate lexicon") {
    MonthRange window{MonthKey(2000, 1), MonthKey(2000, 12)};
    std::vector<TermStats> stats{stat("a", 0.5, window), stat("b", 0.4, window), stat("c", 0.3, window),
                                 stat("d", 0.2, window), stat("e", -0.1, window)};
    for (int i = 0; i < 12; ++i) stats.push_back(stat(fmt::format("n{}", i), -0.2 - 0.01 * i, window));
    auto lex = select_lexicon(stats, MonthKey(2001, 2));
    CHECK(lex.positive().size() == 4);
    CHECK(lex.negative().size() == 10);
    CHECK(lex.degenerate());
  }

  TEST_CASE("ties at the cut-off resolve alphabetically") {
    MonthRange window{MonthKey(2000, 1), MonthKey(2000, 12)};
    std::vector<TermStats> stats;
    for (int i = 0; i < 9; ++i) stats.push_back(stat(fmt::format("top{}", i), 0.9 - 0.01 * i, window));
    stats.push_back(stat("zeta", 0.5, window));
    stats.push_back(stat("alpha", 0.5, window));
    auto lex = select_lexicon(stats, MonthKey(2001, 2));
    REQUIRE(lex.positive().size() == 10);
    CHECK(lex.positive().back().term == "alpha");
    CHECK_FALSE(lex.polarity("zeta"));
  }

  TEST_CASE("selection rejects stats from the wrong window") {
    MonthRange window{MonthKey(2000, 1), MonthKey(2000, 12)};
    CHECK_THROWS_AS(select_lexicon({stat("a", 0.5, window)}, MonthKey(2001, 3)), Error);
  }

  TEST_CASE("per-comment mapping") {
    Lexicon lex(MonthKey(2001, 1), {{"raise", 0.9}, {"bonus", 0.8}}, {{"cut", -0.9}}, 2);
    auto p = lexicon_classify({"raise", "raise", "bonus"}, lex);
    CHECK(p == ClassProbabilities{0.75, 0, 0.25});
    CHECK(hard_label(p) == HardLabel::Increase);
    auto q = lexicon_classify({"raise", "bonus", "cut", "cut", "other"}, lex);
    CHECK(q.u == doctest::Approx(0.4));
    CHECK(q.v == doctest::Approx(0.4));
    CHECK(q.w == doctest::Approx(0.2));
    CHECK(hard_label(q) == HardLabel::Neutral);
    CHECK(lexicon_classify({"other"}, lex) == ClassProbabilities{});
    auto r = lexicon_classify({"raise", "cut", "cut", "cut"}, lex, Smoothing::None);
    CHECK(r == ClassProbabilities{0.25, 0.75, 0});
    CHECK(lex.window_end() == MonthKey(2000, 11));
  }

  TEST_CASE("lexicon lists may not overlap") {
    CHECK_THROWS_AS(Lexicon(MonthKey(2001, 1), {{"x", 0.5}}, {{"x", -0.5}}), Error);
  }

  TEST_CASE("windows end two months before the target") {
    auto yoy = yoy_path(MonthKey(2001, 1), 60, 2);
    auto table = count_terms(bonus_corpus(yoy, 3));
    LexiconPolicy expanding;
    auto w = lexicon_window(MonthKey(2004, 6), table, yoy, expanding);
    REQUIRE(w);
    CHECK(w->first == MonthKey(2001, 1));
    CHECK(w->last == MonthKey(2004, 4));
    LexiconPolicy rolling;
    rolling.window = WindowKind::Rolling;
    rolling.rolling_months = 24;
    auto r = lexicon_window(MonthKey(2004, 6), table, yoy, rolling);
    REQUIRE(r);
    CHECK(r->size() == 24);
    CHECK(r->last == MonthKey(2004, 4));
    CHECK_FALSE(lexicon_window(MonthKey(2001, 3), table, yoy, expanding));
    CHECK(lexicon_window(MonthKey(2001, 4), table, yoy, expanding)->size() == 2);
  }

  TEST_CASE("months after the window do not influence the lexicon") {
    auto yoy = yoy_path(MonthKey(2001, 1), 96, 12);
    auto texts = bonus_corpus(yoy, 13);
    const MonthKey as_of(2005, 6);
    auto clean = rolling_lexicon(count_terms(texts), yoy, as_of);
    REQUIRE(clean);

    auto poisoned_yoy = yoy;
    auto poisoned = texts;
    for (auto& [m, v] : poisoned) {
      if (m > as_of.minus(2)) {
        v.assign(50, "poison cut cut bonus");
        poisoned_yoy[m] = -40.0;
      }
    }
    auto dirty = rolling_lexicon(count_terms(poisoned), poisoned_yoy, as_of);
    REQUIRE(dirty);
    auto same = [](const std::vector<LexiconTerm>& a, const std::vector<LexiconTerm>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].term != b[i].term || a[i].correlation != b[i].correlation) return false;
      }
      return true;
    };
    CHECK(same(clean->positive(), dirty->positive()));
    CHECK(same(clean->negative(), dirty->negative()));
  }

  TEST_CASE("audit export") {
    Lexicon lex(MonthKey(2001, 1), {{"raise", 0.9}}, {{"cut", -0.25}}, 1);
    std::ostringstream out;
    write_lexicon_audit(out, {lex});
    CHECK(out.str() == "as_of,polarity,rank,term,correlation\n200101,positive,1,raise,0.9\n200101,negative,1,cut,-0.25\n");
  }
}
