#include "wsi/classify.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "wsi/error.hpp"
#include "wsi/lexicon.hpp"

namespace wsi {

bool ClassProbabilities::valid(double tol) const {
  for (double x : {u, v, w}) {
    if (!(x >= 0.0 && x <= 1.0)) return false;
  }
  double s = sum();
  return s == 0.0 || std::abs(s - 1.0) <= tol;
}

std::optional<ClassProbabilities> normalize(double u, double v, double w) {
  for (double x : {u, v, w}) {
    if (!std::isfinite(x) || x < 0.0) return std::nullopt;
  }
  if (u == 0.0 && v == 0.0) return ClassProbabilities::unrelated();
  double s = u + v + w;
  return ClassProbabilities{u / s, v / s, w / s};
}

std::optional<ClassProbabilities> normalize(const ClassProbabilities& p) {
  return normalize(p.u, p.v, p.w);
}

std::string_view to_string(HardLabel label) {
  switch (label) {
    case HardLabel::Increase: return "increase";
    case HardLabel::Decrease: return "decrease";
    case HardLabel::Neutral: return "neutral";
    case HardLabel::Unrelated: return "unrelated";
  }
  return "unrelated";
}

std::optional<HardLabel> parse_hard_label(std::string_view text) {
  if (text == "increase") return HardLabel::Increase;
  if (text == "decrease") return HardLabel::Decrease;
  if (text == "neutral") return HardLabel::Neutral;
  if (text == "unrelated") return HardLabel::Unrelated;
  return std::nullopt;
}

HardLabel hard_label(const ClassProbabilities& p) {
  if (p.is_unrelated()) return HardLabel::Unrelated;
  const double m = std::max({p.u, p.v, p.w});
  const int at_max = (p.u == m) + (p.v == m) + (p.w == m);
  if (at_max > 1 || p.w == m) return HardLabel::Neutral;
  return p.u == m ? HardLabel::Increase : HardLabel::Decrease;
}

ClassProbabilities one_hot(HardLabel label) {
  switch (label) {
    case HardLabel::Increase: return {1.0, 0.0, 0.0};
    case HardLabel::Decrease: return {0.0, 1.0, 0.0};
    case HardLabel::Neutral: return {0.0, 0.0, 1.0};
    case HardLabel::Unrelated: return {};
  }
  return {};
}

void validate(const BackendSpec& spec) {
  if (spec.batch_size < 1) throw ConfigError(fmt::format("backend {}: batch_size must be >= 1", spec.id));
  if (spec.timeout.count() <= 0) throw ConfigError(fmt::format("backend {}: timeout must be > 0", spec.id));
  if (spec.max_retries < 0) throw ConfigError(fmt::format("backend {}: max_retries must be >= 0", spec.id));
}

nlohmann::json WireClassifier::make_request(const std::string& model,
                                            const std::vector<std::string>& comments) {
  return nlohmann::json{{"model", model},
                        {"comments", comments},
                        {"labels", {"increase", "decrease", "neutral"}}};
}

std::vector<RawItem> WireClassifier::parse_response(const nlohmann::json& response,
                                                    std::size_t expected) {
  std::vector<RawItem> items;
  try {
    if (response.contains("probabilities")) {
      const auto& probs = response.at("probabilities");
      if (!probs.is_array() || probs.size() != expected) {
        throw TransportError(fmt::format("expected {} probability triples", expected));
      }
      for (const auto& t : probs) {
        if (!t.is_array() || t.size() != 3) throw TransportError("probability entry is not a triple");
        items.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), false});
      }
    } else if (response.contains("labels")) {
      const auto& labels = response.at("labels");
      if (!labels.is_array() || labels.size() != expected) {
        throw TransportError(fmt::format("expected {} labels", expected));
      }
      for (const auto& l : labels) {
        auto label = parse_hard_label(l.get<std::string>());
        if (!label) throw TransportError(fmt::format("unknown label {}", l.dump()));
        auto p = one_hot(*label);
        items.push_back({p.u, p.v, p.w, *label == HardLabel::Unrelated});
      }
    } else {
      throw TransportError("response has neither probabilities nor labels");
    }
    if (response.contains("unrelated")) {
      const auto& flags = response.at("unrelated");
      if (!flags.is_array() || flags.size() != expected) {
        throw TransportError(fmt::format("expected {} unrelated flags", expected));
      }
      for (std::size_t i = 0; i < expected; ++i) items[i].unrelated = flags[i].get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(fmt::format("malformed classifier response: {}", e.what()));
  }
  return items;
}

std::vector<RawItem> WireClassifier::classify(const std::string& model,
                                              const std::vector<std::string>& comments) {
  count_call();
  return parse_response(transport_->exchange(make_request(model, comments)), comments.size());
}

ClassProbabilities KeywordMockClassifier::classify_one(std::string_view comment) const {
  auto tokens = tokenize_all(comment);
  std::set<std::string_view> present(tokens.begin(), tokens.end());
  for (const auto& rule : rules_) {
    for (const auto& kw : rule.keywords) {
      if (present.count(kw)) return rule.probs;
    }
  }
  return ClassProbabilities::unrelated();
}

std::vector<RawItem> KeywordMockClassifier::classify(const std::string&,
                                                     const std::vector<std::string>& comments) {
  count_call();
  std::vector<RawItem> out;
  out.reserve(comments.size());
  for (const auto& c : comments) {
    auto p = classify_one(c);
    out.push_back({p.u, p.v, p.w, false});
  }
  return out;
}

std::unique_ptr<KeywordMockClassifier> mock_keyword_classifier(std::vector<KeywordRule> rules) {
  for (const auto& r : rules) {
    if (!normalize(r.probs)) throw ConfigError("keyword rule has an invalid probability triple");
  }
  return std::make_unique<KeywordMockClassifier>(std::move(rules));
}

std::vector<KeywordRule> parse_keyword_rules(std::istream& in) {
  std::vector<KeywordRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto arrow = line.find("=>");
    if (arrow == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ConfigError(fmt::format("rules line {}: missing '=>'", lineno));
    }
    KeywordRule rule;
    std::istringstream kws(line.substr(0, arrow));
    std::string kw;
    while (kws >> kw) rule.keywords.insert(tokenize_all(kw).empty() ? kw : tokenize_all(kw).front());
    std::istringstream probs(line.substr(arrow + 2));
    if (!(probs >> rule.probs.u >> rule.probs.v >> rule.probs.w) || rule.keywords.empty()) {
      throw ConfigError(fmt::format("rules line {}: expected 'keywords => u v w'", lineno));
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<KeywordRule> load_keyword_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open rules file {}", path));
  return parse_keyword_rules(in);
}

namespace {

struct ChunkOutcome {
  std::vector<ItemResult> items;
  std::size_t attempts = 0;
  bool fallback = false;
};

ChunkOutcome run_chunk(const std::vector<std::string>& texts, const BackendSpec& spec,
                       ClassifierBackend& backend) {
  ChunkOutcome out;
  RetryPolicy policy{spec.max_retries, spec.backoff};
  std::vector<std::string> models{spec.model_id};
  if (spec.fallback_model_id) models.push_back(*spec.fallback_model_id);

  std::string last_error;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto& model = models[mi];
    int attempts = 0;
    try {
      auto raw = with_retries(
          policy,
          [&] {
            auto r = backend.classify(model, texts);
            if (r.size() != texts.size()) {
              throw TransportError(fmt::format("expected {} results, got {}", texts.size(), r.size()));
            }
            return r;
          },
          &attempts);
      out.attempts += static_cast<std::size_t>(attempts);
      out.fallback = mi > 0;
      for (const auto& item : raw) {
        ItemResult res;
        auto p = item.unrelated ? std::optional(ClassProbabilities::unrelated())
                                : normalize(item.u, item.v, item.w);
        if (p) {
          res.probs = *p;
          res.model_id = model;
        } else {
          res.failed = true;
          res.error = fmt::format("invalid probabilities ({}, {}, {})", item.u, item.v, item.w);
        }
        out.items.push_back(std::move(res));
      }
      return out;
    } catch (const std::exception& e) {
      out.attempts += static_cast<std::size_t>(attempts);
      last_error = fmt::format("{}: {}", model, e.what());
    }
  }
  out.items.assign(texts.size(), ItemResult{{}, true, {}, last_error});
  return out;
}

}  // namespace

BatchReport classify_batch(const std::vector<std::string>& comments, const BackendSpec& spec,
                           ClassifierBackend& backend) {
  validate(spec);
  if (comments.empty()) throw Error("classify_batch: empty comment list");
  for (const auto& c : comments) {
    if (c.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error("classify_batch: empty comment text");
    }
  }

  const std::size_t batch = spec.batch_size;
  const auto n_chunks = static_cast<std::int64_t>((comments.size() + batch - 1) / batch);
  std::vector<ChunkOutcome> outcomes(static_cast<std::size_t>(n_chunks));

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, spec.concurrency))
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    auto lo = static_cast<std::size_t>(c) * batch;
    auto hi = std::min(comments.size(), lo + batch);
    std::vector<std::string> texts(comments.begin() + static_cast<std::ptrdiff_t>(lo),
                                   comments.begin() + static_cast<std::ptrdiff_t>(hi));
    outcomes[static_cast<std::size_t>(c)] = run_chunk(texts, spec, backend);
  }

  BatchReport report;
  report.items.reserve(comments.size());
  for (auto& o : outcomes) {
    report.wire_attempts += o.attempts;
    if (o.fallback) ++report.fallback_used;
    for (auto& item : o.items) {
      if (item.failed) ++report.failed;
      report.items.push_back(std::move(item));
    }
  }
  return report;
}

MonthClassification classify_month(std::span<const SurveyRecord> records, const BackendSpec& spec,
                                   ClassifierBackend& backend) {
  MonthClassification result;
  if (records.empty()) return result;
  const MonthKey month = records.front().month;
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) {
    if (r.month != month) throw Error("classify_month: records span more than one month");
    texts.push_back(r.analysis_text());
  }
  auto batch = classify_batch(texts, spec, backend);
  result.wire_attempts = batch.wire_attempts;
  result.failures = batch.failed;
  result.comments.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& item = batch.items[i];
    ClassifiedComment c;
    c.record_index = i;
    c.month = month;
    c.backend_id = spec.id;
    c.failed = item.failed;
    c.probs = item.failed ? ClassProbabilities::unrelated() : item.probs;
    c.label = hard_label(c.probs);
    result.comments.push_back(std::move(c));
  }
  return result;
}

}  // namespace wsi
