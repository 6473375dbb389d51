#include <doctest.h>

#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "support.hpp"
#include "wsi/classify.hpp"
#include "wsi/error.hpp"
#include "wsi/synthetic.hpp"
#include "wsi/transport.hpp"
#include "wsi/translate.hpp"

using namespace wsi;
using nlohmann::json;

namespace {

BackendSpec quick_spec(std::string id = "test") {
  BackendSpec s;
  s.id = id;
  s.endpoint = "mock";
  s.model_id = "m1";
  s.backoff = std::chrono::milliseconds(1);
  s.timeout = std::chrono::milliseconds(5000);
  return s;
}

/// Fails the first `failures` calls, or every call for `bad_model`.
class FlakyBackend : public ClassifierBackend {
 public:
  FlakyBackend(int failures, std::string bad_model = {})
      : failures_(failures), bad_model_(std::move(bad_model)),
        inner_(mock_keyword_classifier(synthetic_keyword_rules())) {}
  std::vector<RawItem> classify(const std::string& model, const std::vector<std::string>& comments) override {
    count_call();
    if (calls_seen_.fetch_add(1) < failures_) throw TransportError("flaky");
    if (model == bad_model_) throw TransportError("model down");
    return inner_->classify(model, comments);
  }

 private:
  int failures_;
  std::string bad_model_;
  std::atomic<int> calls_seen_{0};
  std::unique_ptr<KeywordMockClassifier> inner_;
};

class FixedBackend : public ClassifierBackend {
 public:
  explicit FixedBackend(RawItem item) : item_(item) {}
  std::vector<RawItem> classify(const std::string&, const std::vector<std::string>& comments) override {
    count_call();
    return std::vector<RawItem>(comments.size(), item_);
  }

 private:
  RawItem item_;
};

std::vector<SurveyRecord> records_with(const std::vector<std::string>& texts) {
  std::vector<SurveyRecord> out;
  for (const auto& t : texts) out.push_back({MonthKey(2010, 4), "R", "I", Judgment::Good, t, std::nullopt});
  return out;
}

}  // namespace

TEST_SUITE("classify") {
  TEST_CASE("normalization and validity") {
    auto p = normalize(0.69, 0.105, 0.2);
    REQUIRE(p);
    CHECK(std::fabs(p->sum() - 1.0) <= 1e-6);
    const double s = 0.69 + 0.105 + 0.2;
    CHECK(p->u == doctest::Approx(0.69 / s).epsilon(1e-12));
    CHECK(p->v == doctest::Approx(0.105 / s).epsilon(1e-12));
    CHECK(p->w == doctest::Approx(0.2 / s).epsilon(1e-12));
    CHECK(p->valid());
    CHECK(*normalize(0, 0, 0.7) == ClassProbabilities::unrelated());
    CHECK_FALSE(normalize(-0.1, 0.5, 0.6));
    CHECK_FALSE(normalize(std::nan(""), 0.5, 0.6));
    CHECK_FALSE(normalize(INFINITY, 0.5, 0.6));
    CHECK(ClassProbabilities{}.valid());
    CHECK_FALSE(ClassProbabilities{0.5, 0.2, 0.2}.valid());
  }

  TEST_CASE("hard labels and tie-break") {
    CHECK(hard_label({0.75, 0, 0.25}) == HardLabel::Increase);
    CHECK(hard_label({0.4, 0.4, 0.2}) == HardLabel::Neutral);
    CHECK(hard_label({0.45, 0.45, 0.1}) == HardLabel::Neutral);
    CHECK(hard_label({0.2, 0.4, 0.4}) == HardLabel::Neutral);
    CHECK(hard_label({0.4, 0.2, 0.4}) == HardLabel::Neutral);
    CHECK(hard_label({0.1, 0.6, 0.3}) == HardLabel::Decrease);
    CHECK(hard_label({0, 0, 1}) == HardLabel::Unrelated);
    CHECK(hard_label({}) == HardLabel::Unrelated);
    for (auto l : {HardLabel::Increase, HardLabel::Decrease, HardLabel::Unrelated}) {
      CHECK(hard_label(one_hot(l)) == l);
      CHECK(parse_hard_label(to_string(l)) == l);
    }
  }

  TEST_CASE("keyword mock examples") {
    auto mock = mock_keyword_classifier(synthetic_keyword_rules());
    CHECK(mock->classify_one("wages were raised this spring") == ClassProbabilities{0, 0, 0});
    auto raise = mock_keyword_classifier({{{"raise", "raised", "bonus"}, {1, 0, 0}}});
    CHECK(raise->classify_one("wages were raised this spring") == ClassProbabilities{1, 0, 0});
    CHECK(raise->classify_one("a bonus was paid") == ClassProbabilities{1, 0, 0});
    CHECK(raise->classify_one("the weather was pleasant") == ClassProbabilities{});

    auto ordered = mock_keyword_classifier({{{"cut"}, {0, 1, 0}}, {{"raise"}, {1, 0, 0}}});
    CHECK(ordered->classify_one("raise then cut") == ClassProbabilities{0, 1, 0});
    auto reversed = mock_keyword_classifier({{{"raise"}, {1, 0, 0}}, {{"cut"}, {0, 1, 0}}});
    CHECK(reversed->classify_one("raise then cut") == ClassProbabilities{1, 0, 0});
  }

  TEST_CASE("keyword rules file") {
    std::istringstream in("# rules\nraise bonus => 1 0 0\ncut => 0 1 0\n\n");
    auto rules = parse_keyword_rules(in);
    REQUIRE(rules.size() == 2);
    CHECK(rules[0].keywords.count("bonus") == 1);
    CHECK(rules[1].probs == ClassProbabilities{0, 1, 0});
    std::istringstream bad("raise 1 0 0\n");
    CHECK_THROWS_AS(parse_keyword_rules(bad), Error);
  }

  TEST_CASE("classify_month counts and batching") {
    auto recs = records_with({"a raise", "a cut", "salary talk", "bonus paid", "freeze announced"});
    auto mock = mock_keyword_classifier(synthetic_keyword_rules());
    auto spec = quick_spec();
    spec.batch_size = 2;
    auto out = classify_month(recs, spec, *mock);
    CHECK(out.comments.size() == 5);
    CHECK(out.failures == 0);
    CHECK(mock->wire_calls() == 3);
    CHECK(out.comments[1].label == HardLabel::Decrease);
    CHECK(out.comments[2].label == HardLabel::Neutral);
  }

  TEST_CASE("batching does not change results") {
    std::vector<std::string> texts;
    SyntheticVocabulary vocab;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 137; ++i) {
      auto& pool = (i % 3 == 0) ? vocab.increase : (i % 3 == 1 ? vocab.decrease : vocab.filler);
      texts.push_back(fmt::format("note {} {}", i, pool[rng() % pool.size()]));
    }
    auto mock = mock_keyword_classifier(synthetic_keyword_rules());
    auto s1 = quick_spec();
    s1.batch_size = 1;
    auto s50 = quick_spec();
    s50.batch_size = 50;
    s50.concurrency = 4;
    auto a = classify_batch(texts, s1, *mock);
    auto b = classify_batch(texts, s50, *mock);
    REQUIRE(a.items.size() == b.items.size());
    for (std::size_t i = 0; i < texts.size(); ++i) CHECK(a.items[i].probs == b.items[i].probs);
  }

  TEST_CASE("retries recover from transient failures") {
    FlakyBackend flaky(2);
    auto spec = quick_spec();
    spec.batch_size = 10;
    auto r = classify_batch({"a raise", "a cut"}, spec, flaky);
    CHECK(r.failed == 0);
    CHECK(r.wire_attempts == 3);
    CHECK(r.items[0].probs == ClassProbabilities{1, 0, 0});
  }

  TEST_CASE("fallback model answers when the primary is down") {
    FlakyBackend down(0, "m1");
    auto spec = quick_spec();
    spec.fallback_model_id = "m2";
    auto r = classify_batch({"a raise"}, spec, down);
    CHECK(r.failed == 0);
    CHECK(r.fallback_used == 1);
    CHECK(r.items[0].model_id == "m2");
    CHECK(r.wire_attempts == 4);
  }

  TEST_CASE("exhausted retries mark items failed and they carry Unrelated") {
    FlakyBackend dead(1000);
    auto spec = quick_spec();
    spec.max_retries = 1;
    spec.batch_size = 2;
    auto recs = records_with({"a raise", "a cut", "bonus"});
    auto out = classify_month(recs, spec, dead);
    CHECK(out.failures == 3);
    for (const auto& c : out.comments) {
      CHECK(c.failed);
      CHECK(c.label == HardLabel::Unrelated);
    }
  }

  TEST_CASE("invalid backend output marks items failed") {
    FixedBackend neg({-1, 0.5, 0.5, false});
    auto r = classify_batch({"x"}, quick_spec(), neg);
    CHECK(r.failed == 1);
    FixedBackend flagged({0.3, 0.3, 0.4, true});
    auto u = classify_batch({"x"}, quick_spec(), flagged);
    CHECK(u.items[0].probs.is_unrelated());
  }

  TEST_CASE("spec validation and input checks") {
    auto mock = mock_keyword_classifier(synthetic_keyword_rules());
    auto spec = quick_spec();
    spec.batch_size = 0;
    CHECK_THROWS_AS(classify_batch({"x"}, spec, *mock), ConfigError);
    CHECK_THROWS_AS(classify_batch({}, quick_spec(), *mock), Error);
    CHECK_THROWS_AS(classify_batch({"  "}, quick_spec(), *mock), Error);
    auto recs = records_with({"a", "b"});
    recs[1].month = MonthKey(2010, 5);
    CHECK_THROWS_AS(classify_month(recs, quick_spec(), *mock), Error);
  }

  TEST_CASE("wire response parsing") {
    auto items = WireClassifier::parse_response(
        json{{"probabilities", {{0.7, 0.1, 0.2}, {0.2, 0.2, 0.6}}}, {"unrelated", {false, true}}}, 2);
    CHECK(items[0].u == 0.7);
    CHECK(items[1].unrelated);
    auto labels = WireClassifier::parse_response(json{{"labels", {"increase", "decrease", "unrelated"}}}, 3);
    CHECK(labels[0].u == 1.0);
    CHECK(labels[1].v == 1.0);
    CHECK(labels[2].unrelated);
    CHECK_THROWS_AS(WireClassifier::parse_response(json{{"probabilities", {{1, 0, 0}}}}, 2), TransportError);
    CHECK_THROWS_AS(WireClassifier::parse_response(json{{"error", "x"}}, 1), TransportError);
    auto req = WireClassifier::make_request("gpt", {"a"});
    CHECK(req["labels"] == json({"increase", "decrease", "neutral"}));
  }

  TEST_CASE("http transport against an in-process server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/classify", [&](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      if (hits.fetch_add(1) == 0) {
        res.status = 503;
        return;
      }
      json probs = json::array();
      for (std::size_t i = 0; i < body["comments"].size(); ++i) probs.push_back({0.6, 0.2, 0.2});
      res.set_content(json{{"probabilities", probs}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto spec = quick_spec();
    spec.endpoint = fmt::format("http://127.0.0.1:{}/classify", port);
    WireClassifier wire(make_transport(spec.endpoint, spec.timeout));
    auto r = classify_batch({"one", "two", "three"}, spec, wire);
    server.stop();
    t.join();
    CHECK(r.failed == 0);
    CHECK(r.wire_attempts == 2);
    CHECK(r.items[2].probs.u == doctest::Approx(0.6));
  }

  TEST_CASE("http transport reports connection failures") {
    HttpTransport t("http://127.0.0.1:1/x", std::chrono::milliseconds(300));
    CHECK_THROWS_AS(t.exchange(json::object()), TransportError);
  }

  TEST_CASE("process transport talks to the mock backend executable") {
    auto spec = quick_spec();
    spec.endpoint = std::string("exec:") + WSI_MOCK_BACKEND + " --fail-first 1";
    spec.concurrency = 3;
    spec.batch_size = 2;
    WireClassifier wire(make_transport(spec.endpoint, spec.timeout));
    auto r = classify_batch({"a raise", "a cut", "weather", "salary", "bonus"}, spec, wire);
    CHECK(r.failed == 0);
    CHECK(r.wire_attempts == 4);
    CHECK(r.items[0].probs == ClassProbabilities{1, 0, 0});
    CHECK(r.items[1].probs == ClassProbabilities{0, 1, 0});
    CHECK(r.items[2].probs.is_unrelated());
    CHECK(r.items[3].probs.w == doctest::Approx(0.8));
  }

  TEST_CASE("process transport survives a child that exits") {
    ProcessTransport t("head -n 0", std::chrono::milliseconds(500));
    CHECK_THROWS_AS(t.exchange(json{{"a", 1}}), TransportError);
    CHECK_THROWS_AS(t.exchange(json{{"a", 1}}), TransportError);
  }

  TEST_CASE("retry helper backs off and rethrows") {
    int attempts = 0;
    CHECK_THROWS_AS(with_retries(
                        RetryPolicy{2, std::chrono::milliseconds(1)},
                        []() -> int { throw TransportError("x"); }, &attempts),
                    TransportError);
    CHECK(attempts == 3);
    int n = 0;
    CHECK(with_retries(RetryPolicy{3, std::chrono::milliseconds(1)}, [&] {
            if (++n < 2) throw TransportError("x");
            return 7;
          }) == 7);
  }
}

TEST_SUITE("classify") {
  TEST_CASE("identity translation copies the comment") {
    IdentityTranslator id;
    auto res = translate_all(records_with({"a", "b", "a"}), id, nullptr);
    for (const auto& r : res.records) CHECK(r.comment_translated == r.comment);
    CHECK(res.report.translated == 3);
  }

  TEST_CASE("warm translation cache needs no backend") {
    wsi::test::ScratchDir dir;
    TranslationCache cache(dir.path());
    auto recs = records_with({"uno", "dos", "tres"});
    IdentityTranslator id;
    translate_all(recs, id, &cache);
    CHECK(id.calls() > 0);

    class Offline : public TranslationBackend {
     public:
      std::string id() const override { return "offline"; }
      std::vector<std::string> translate(const std::vector<std::string>&, std::string_view,
                                         std::string_view) override {
        ++calls;
        throw TransportError("offline");
      }
      int calls = 0;
    } offline;
    auto res = translate_all(recs, offline, &cache);
    CHECK(offline.calls == 0);
    CHECK(res.report.failed.empty());
    CHECK(res.report.cache_hits == 3);
    for (const auto& r : res.records) CHECK(r.comment_translated == r.comment);
  }

  TEST_CASE("translation failures leave records untranslated and listed") {
    class Broken : public TranslationBackend {
     public:
      std::string id() const override { return "broken"; }
      std::vector<std::string> translate(const std::vector<std::string>&, std::string_view,
                                         std::string_view) override {
        throw TransportError("down");
      }
    } broken;
    TranslateOptions opts;
    opts.retry = {1, std::chrono::milliseconds(1)};
    auto res = translate_all(records_with({"a", "b"}), broken, nullptr, opts);
    CHECK(res.report.failed == std::vector<std::size_t>{0, 1});
    CHECK_FALSE(res.records[0].comment_translated);
  }

  TEST_CASE("translation parallelism 8 vs 1 gives identical output") {
    std::vector<std::string> texts;
    for (int i = 0; i < 1000; ++i) texts.push_back(fmt::format("comment number {}", i % 700));
    auto recs = records_with(texts);
    wsi::test::ScratchDir d1, d8;
    TranslationCache c1(d1.path()), c8(d8.path());
    WireTranslator w1(make_transport(std::string("exec:") + WSI_MOCK_BACKEND + " --translate-prefix EN:",
                                     std::chrono::milliseconds(5000)),
                      "mock");
    WireTranslator w8(make_transport(std::string("exec:") + WSI_MOCK_BACKEND + " --translate-prefix EN:",
                                     std::chrono::milliseconds(5000)),
                      "mock");
    TranslateOptions o1;
    o1.parallelism = 1;
    o1.batch_size = 16;
    TranslateOptions o8 = o1;
    o8.parallelism = 8;
    auto a = translate_all(recs, w1, &c1, o1);
    auto b = translate_all(recs, w8, &c8, o8);
    CHECK(a.records == b.records);
    CHECK(a.records[5].comment_translated == "EN:comment number 5");
    std::ostringstream sa, sb;
    write_survey(sa, a.records);
    write_survey(sb, b.records);
    CHECK(sa.str() == sb.str());
    CHECK(wsi::test::tree(d1.path()) == wsi::test::tree(d8.path()));
  }
}
