#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "wsi/corpus.hpp"
#include "wsi/transport.hpp"

namespace wsi {

/// Per-comment probabilities of wage increase (u), decrease (v) and
/// neutral (w). The all-zero triple is the canonical "unrelated" value.
struct ClassProbabilities {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;

  static constexpr ClassProbabilities unrelated() { return {}; }

  /// Both directional probabilities are zero: excluded from every index.
  constexpr bool is_unrelated() const { return u == 0.0 && v == 0.0; }
  constexpr double sum() const { return u + v + w; }

  /// Components in [0,1] and sum either 0 or within `tol` of 1.
  bool valid(double tol = 1e-6) const;

  friend bool operator==(const ClassProbabilities&, const ClassProbabilities&) = default;
};

/// Rescales raw non-negative scores to sum 1, keeping their ratios. A triple
/// with u = v = 0 collapses to the all-zero unrelated encoding. Returns
/// nullopt for negative, NaN or infinite components.
std::optional<ClassProbabilities> normalize(double u, double v, double w);
std::optional<ClassProbabilities> normalize(const ClassProbabilities& p);

enum class HardLabel { Increase, Decrease, Neutral, Unrelated };

std::string_view to_string(HardLabel label);
std::optional<HardLabel> parse_hard_label(std::string_view text);

/// Unrelated when u = v = 0, otherwise the argmax. Any exact tie for the
/// largest component resolves to Neutral, so (0.4, 0.4, 0.2) is Neutral.
HardLabel hard_label(const ClassProbabilities& p);

/// One-hot triple for a hard label (Unrelated -> all zero).
ClassProbabilities one_hot(HardLabel label);

struct ClassifiedComment {
  std::size_t record_index = 0;  // position in the classified record list
  MonthKey month;
  ClassProbabilities probs;
  std::string backend_id;
  HardLabel label = HardLabel::Unrelated;
  /// Classification failed; the comment carries Unrelated and is excluded.
  bool failed = false;
};

struct BackendSpec {
  std::string id;
  /// "http://...", "exec:<command>", "mock[:rules-file]" or "lexicon".
  std::string endpoint;
  std::string model_id;
  std::optional<std::string> fallback_model_id;
  std::size_t batch_size = 16;
  int max_retries = 2;
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds backoff{200};
  /// Batches in flight at once.
  int concurrency = 1;
};

/// Throws wsi::ConfigError when batch_size or timeout is out of range.
void validate(const BackendSpec& spec);

/// Raw item as answered by a backend, before normalization.
struct RawItem {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
  bool unrelated = false;
};

/// One wire call: classify `comments` with `model`. Position-aligned
/// output; throws wsi::TransportError on failure. Must be thread-safe.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual std::vector<RawItem> classify(const std::string& model,
                                        const std::vector<std::string>& comments) = 0;
  std::size_t wire_calls() const { return calls_.load(); }

 protected:
  void count_call() { calls_.fetch_add(1); }

 private:
  std::atomic<std::size_t> calls_{0};
};

/// Remote backend speaking the JSON classification protocol:
///   request  {"model": m, "comments": [...], "labels": ["increase","decrease","neutral"]}
///   response {"probabilities": [[u,v,w], ...], "unrelated": [bool, ...]?}
/// A response carrying only `"labels": ["increase", ...]` is accepted and
/// mapped to one-hot triples.
class WireClassifier : public ClassifierBackend {
 public:
  explicit WireClassifier(std::unique_ptr<JsonTransport> transport)
      : transport_(std::move(transport)) {}
  std::vector<RawItem> classify(const std::string& model,
                                const std::vector<std::string>& comments) override;

  static nlohmann::json make_request(const std::string& model,
                                     const std::vector<std::string>& comments);
  /// Throws wsi::TransportError on a malformed or misaligned response.
  static std::vector<RawItem> parse_response(const nlohmann::json& response, std::size_t expected);

 private:
  std::unique_ptr<JsonTransport> transport_;
};

struct KeywordRule {
  std::set<std::string> keywords;
  ClassProbabilities probs;
};

/// Deterministic test double: the first rule (in declared order) with a
/// keyword among the comment's tokens decides; no match -> unrelated.
class KeywordMockClassifier : public ClassifierBackend {
 public:
  explicit KeywordMockClassifier(std::vector<KeywordRule> rules) : rules_(std::move(rules)) {}

  std::vector<RawItem> classify(const std::string& model,
                                const std::vector<std::string>& comments) override;
  ClassProbabilities classify_one(std::string_view comment) const;
  const std::vector<KeywordRule>& rules() const { return rules_; }

 private:
  std::vector<KeywordRule> rules_;
};

std::unique_ptr<KeywordMockClassifier> mock_keyword_classifier(std::vector<KeywordRule> rules);

/// Rules file: one rule per line, `kw1 kw2 ... => u v w`; '#' starts a comment.
std::vector<KeywordRule> parse_keyword_rules(std::istream& in);
std::vector<KeywordRule> load_keyword_rules(const std::string& path);

struct ItemResult {
  ClassProbabilities probs;
  bool failed = false;
  std::string model_id;  // model that produced the answer (empty when failed)
  std::string error;
};

struct BatchReport {
  std::vector<ItemResult> items;
  std::size_t wire_attempts = 0;
  std::size_t failed = 0;
  std::size_t fallback_used = 0;
};

/// Classifies `comments` in chunks of spec.batch_size, retrying each chunk
/// up to spec.max_retries times with exponential backoff, then retrying the
/// fallback model if configured, then marking the chunk failed.
BatchReport classify_batch(const std::vector<std::string>& comments, const BackendSpec& spec,
                           ClassifierBackend& backend);

struct MonthClassification {
  std::vector<ClassifiedComment> comments;
  std::size_t failures = 0;
  std::size_t wire_attempts = 0;
};

/// All records must share one month. One ClassifiedComment per record.
MonthClassification classify_month(std::span<const SurveyRecord> records, const BackendSpec& spec,
                                   ClassifierBackend& backend);

}  // namespace wsi
