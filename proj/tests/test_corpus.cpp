#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "support.hpp"
#include "wsi/corpus.hpp"
#include "wsi/error.hpp"

using namespace wsi;
using wsi::test::ScratchDir;

namespace {

WageSeries linear_wages(MonthKey start, int months, double base, double step) {
  std::map<MonthKey, double> levels;
  for (int i = 0; i < months; ++i) levels[start.plus(i)] = base + step * i;
  return WageSeries::from_levels(levels);
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("well-formed file loads sorted by month") {
    std::istringstream in(
        "yyyymm,region,industry,judgment,comment\n"
        "200003,Kinki,Retail,Good,Sales were up\n"
        "200001,Tokai,Hotel,Bad,Fewer guests\n"
        "200002,Kyushu,Retail,Unchanged,\"Flat, as usual\"\n");
    auto r = parse_survey(in);
    REQUIRE(r.records.size() == 3);
    CHECK(r.errors.empty());
    CHECK(r.records[0].month == MonthKey(2000, 1));
    CHECK(r.records[1].month == MonthKey(2000, 2));
    CHECK(r.records[2].month == MonthKey(2000, 3));
    CHECK(r.records[1].comment == "Flat, as usual");
    CHECK(r.records[0].judgment == Judgment::Bad);
  }

  TEST_CASE("invalid month becomes a row error and other rows still load") {
    std::istringstream in(
        "yyyymm,region,industry,judgment,comment\n"
        "200001,Tokai,Hotel,Bad,ok one\n"
        "2000-13,Tokai,Hotel,Bad,broken\n"
        "200002,Tokai,Hotel,Good,ok two\n");
    auto r = parse_survey(in, {}, "f.csv");
    CHECK(r.records.size() == 2);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].line == 3);
    CHECK(r.errors[0].reason.find("invalid month") != std::string::npos);
  }

  TEST_CASE("unknown judgment labels and blank comments are reported") {
    std::istringstream in(
        "yyyymm,region,industry,judgment,comment\n"
        "200001,Tokai,Hotel,Superb,text\n"
        "200001,Tokai,Hotel,Good,   \n");
    auto r = parse_survey(in);
    CHECK(r.records.empty());
    CHECK(r.errors.size() == 1);
    CHECK(r.skipped_empty == 1);
  }

  TEST_CASE("missing required column throws") {
    std::istringstream in("yyyymm,region,judgment,comment\n200001,a,Good,x\n");
    CHECK_THROWS_AS(parse_survey(in), LoadError);
  }

  TEST_CASE("schema remaps columns and accepts label aliases") {
    SurveySchema schema;
    schema.month_column = "Month";
    schema.comment_column = "Text";
    schema.add_alias("fine", Judgment::Good);
    std::istringstream in(
        "Month,region,industry,judgment,Text,comment_translated\n"
        "2000-01,Tokai,Hotel,fine,src,translated\n"
        "2000-01,Tokai,Hotel,yaya warui,src2,\n"
        "2000-01,Tokai,Hotel,\xe6\x82\xaa,src3,\n");
    auto r = parse_survey(in, schema);
    REQUIRE(r.records.size() == 3);
    CHECK(r.records[0].judgment == Judgment::Good);
    CHECK(r.records[0].analysis_text() == "translated");
    CHECK(r.records[1].judgment == Judgment::SlightlyBad);
    CHECK(r.records[1].analysis_text() == "src2");
    CHECK(r.records[2].judgment == Judgment::Bad);
  }

  TEST_CASE("write then parse is the identity") {
    std::vector<SurveyRecord> recs{
        {MonthKey(2001, 5), "Kinki", "Retail", Judgment::SlightlyBad, "a, \"quoted\"\nline", std::nullopt},
        {MonthKey(2001, 6), "Tokai", "Hotel", Judgment::Excellent, "plain", std::string("eng")}};
    std::ostringstream out;
    write_survey(out, recs);
    std::istringstream in(out.str());
    auto r = parse_survey(in);
    CHECK(r.records == recs);
  }

  TEST_CASE("600 monthly files load to the sum of their line counts") {
    ScratchDir dir;
    std::mt19937_64 rng(11);
    std::vector<std::string> paths;
    std::size_t expected = 0;
    for (int i = 0; i < 600; ++i) {
      auto m = MonthKey(1990, 1).plus(i);
      int rows = static_cast<int>(rng() % 7) + 1;
      std::string content = "yyyymm,region,industry,judgment,comment\n";
      for (int k = 0; k < rows; ++k) content += fmt::format("{},R,I,Good,comment {} {}\n", m.to_string(), i, k);
      auto p = dir / fmt::format("s{:03}.csv", i);
      wsi::test::spit(p, content);
      paths.push_back(p.string());
      // oracle: physical lines minus the header
      expected += static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n')) - 1;
    }
    auto r = load_surveys(paths);
    CHECK(r.records.size() == expected);
    CHECK(r.errors.empty());
    CHECK(std::is_sorted(r.records.begin(), r.records.end(),
                         [](const auto& a, const auto& b) { return a.month < b.month; }));
  }

  TEST_CASE("yoy examples") {
    std::map<MonthKey, double> levels;
    for (int i = 0; i <= 12; ++i) levels[MonthKey(2019, 1).plus(i)] = 100.0 + (i == 12 ? 2.0 : 0.5 * i / 12);
    auto w = WageSeries::from_levels(levels);
    CHECK(w.yoy().size() == 1);
    CHECK(w.yoy().at(MonthKey(2020, 1)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(*yoy(w, MonthKey(2020, 1)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_FALSE(yoy(w, MonthKey(2019, 12)));

    auto flat = linear_wages(MonthKey(2019, 1), 13, 100.0, 0.0);
    CHECK(*yoy(flat, MonthKey(2020, 1)) == 0.0);

    auto short_series = linear_wages(MonthKey(2019, 1), 12, 100.0, 1.0);
    CHECK(short_series.yoy().empty());
  }

  TEST_CASE("yoy matches a direct recomputation on random series") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(50.0, 150.0);
    std::map<MonthKey, double> levels;
    for (int i = 0; i < 300; ++i) levels[MonthKey(2000, 1).plus(i)] = d(rng);
    auto w = WageSeries::from_levels(levels);
    CHECK(w.yoy().size() == 288);
    for (const auto& [m, v] : w.yoy()) {
      double oracle = (levels.at(m) / levels.at(m.minus(12)) - 1.0) * 100.0;
      CHECK(std::fabs(v - oracle) <= 1e-12 * std::max(1.0, std::fabs(oracle)));
    }
  }

  TEST_CASE("wage series rejects gaps, duplicates and non-positive levels") {
    CHECK_THROWS_AS(WageSeries::from_levels({{MonthKey(2000, 1), 1.0}, {MonthKey(2000, 3), 1.0}}), LoadError);
    CHECK_THROWS_AS(WageSeries::from_levels({{MonthKey(2000, 1), 0.0}}), LoadError);
    std::istringstream dup("yyyymm,level\n200001,1\n200001,2\n");
    CHECK_THROWS_AS(parse_wages(dup), LoadError);
    std::istringstream ok("yyyymm,level\n200001,100\n200002,101.5\n");
    auto w = parse_wages(ok);
    CHECK(*w.level(MonthKey(2000, 2)) == 101.5);
    std::ostringstream out;
    write_wages(out, w);
    std::istringstream back(out.str());
    CHECK(parse_wages(back).levels() == w.levels());
  }

  TEST_CASE("group_by_month") {
    CHECK(group_by_month({}).empty());
    std::vector<SurveyRecord> recs;
    for (int i = 0; i < 10; ++i) {
      recs.push_back({MonthKey(2000, 1 + i % 2), "R", "I", Judgment::Good, fmt::format("c{}", i), std::nullopt});
    }
    auto g = group_by_month(recs);
    REQUIRE(g.size() == 2);
    CHECK(g.begin()->second.size() + g.rbegin()->second.size() == recs.size());

    // permutation invariance up to within-group order
    auto shuffled = recs;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(5));
    auto g2 = group_by_month(shuffled);
    REQUIRE(g2.size() == g.size());
    for (auto& [m, v] : g2) {
      auto a = v, b = g.at(m);
      auto by_comment = [](const auto& x, const auto& y) { return x.comment < y.comment; };
      std::sort(a.begin(), a.end(), by_comment);
      std::sort(b.begin(), b.end(), by_comment);
      CHECK(a == b);
    }
  }
}
