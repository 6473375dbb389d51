#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wsi/corpus.hpp"
#include "wsi/digest.hpp"
#include "wsi/transport.hpp"

namespace wsi {

class TranslationBackend {
 public:
  virtual ~TranslationBackend() = default;
  virtual std::string id() const = 0;
  /// Position-aligned translations; throws wsi::TransportError on failure.
  virtual std::vector<std::string> translate(const std::vector<std::string>& texts,
                                             std::string_view source,
                                             std::string_view target) = 0;
};

/// Returns its input unchanged. Used for tests and for corpora already in English.
class IdentityTranslator : public TranslationBackend {
 public:
  std::string id() const override { return "identity"; }
  std::vector<std::string> translate(const std::vector<std::string>& texts, std::string_view,
                                     std::string_view) override {
    calls_.fetch_add(1);
    return texts;
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::atomic<std::size_t> calls_{0};
};

/// `{"texts": [...], "source": "..", "target": ".."}` -> `{"translations": [...]}`.
class WireTranslator : public TranslationBackend {
 public:
  WireTranslator(std::unique_ptr<JsonTransport> transport, std::string id)
      : transport_(std::move(transport)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  std::vector<std::string> translate(const std::vector<std::string>& texts, std::string_view source,
                                     std::string_view target) override;

 private:
  std::unique_ptr<JsonTransport> transport_;
  std::string id_;
};

struct TranslationCacheEntry {
  Digest source_digest;
  std::string translation;
  std::string backend_id;
};

/// Content-addressed translation store: one file per SHA-256 of the source
/// text under `dir`. Reads are lock-free on disk; writes are serialized and
/// land via write-then-rename so readers never see a partial entry.
class TranslationCache {
 public:
  explicit TranslationCache(std::filesystem::path dir);

  std::optional<TranslationCacheEntry> lookup(std::string_view source_text) const;
  void store(std::string_view source_text, std::string_view translation,
             std::string_view backend_id);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const Digest& d) const;

  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

struct TranslateOptions {
  int parallelism = 1;
  std::size_t batch_size = 32;
  RetryPolicy retry{};
  std::string source_lang = "ja";
  std::string target_lang = "en";
};

struct TranslateReport {
  std::size_t translated = 0;
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
  /// Indices (into the input) of records left untranslated.
  std::vector<std::size_t> failed;
};

struct TranslationResult {
  std::vector<SurveyRecord> records;
  TranslateReport report;
};

/// Fills comment_translated for every record, consulting `cache` first
/// (may be null). Output order equals input order for any parallelism.
/// Records whose batch fails after retries stay untranslated and are listed
/// in the report; the call itself does not throw for backend failures.
TranslationResult translate_all(std::vector<SurveyRecord> records, TranslationBackend& backend,
                                TranslationCache* cache, const TranslateOptions& options = {});

}  // namespace wsi
