#include "wsi/translate.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "wsi/error.hpp"

namespace wsi {

std::vector<std::string> WireTranslator::translate(const std::vector<std::string>& texts,
                                                   std::string_view source,
                                                   std::string_view target) {
  nlohmann::json request{{"texts", texts}, {"source", source}, {"target", target}};
  auto response = transport_->exchange(request);
  if (!response.contains("translations") || !response["translations"].is_array()) {
    throw TransportError(fmt::format("{}: response has no translations array", id_));
  }
  const auto& arr = response["translations"];
  if (arr.size() != texts.size()) {
    throw TransportError(fmt::format("{}: expected {} translations, got {}", id_, texts.size(),
                                     arr.size()));
  }
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& t : arr) {
    if (!t.is_string()) throw TransportError(fmt::format("{}: non-string translation", id_));
    out.push_back(t.get<std::string>());
  }
  return out;
}

TranslationCache::TranslationCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path TranslationCache::path_for(const Digest& d) const { return dir_ / d.hex(); }

std::optional<TranslationCacheEntry> TranslationCache::lookup(std::string_view source_text) const {
  auto digest = Digest::of(source_text);
  std::ifstream in(path_for(digest), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    auto j = nlohmann::json::parse(buf.str());
    return TranslationCacheEntry{digest, j.at("translation").get<std::string>(),
                                 j.at("backend").get<std::string>()};
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void TranslationCache::store(std::string_view source_text, std::string_view translation,
                             std::string_view backend_id) {
  auto digest = Digest::of(source_text);
  nlohmann::json j{{"backend", backend_id}, {"translation", translation}};
  std::lock_guard lock(write_mutex_);
  auto final_path = path_for(digest);
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write cache entry {}", tmp.string()));
    out << j.dump();
  }
  std::filesystem::rename(tmp, final_path);
}

TranslationResult translate_all(std::vector<SurveyRecord> records, TranslationBackend& backend,
                                TranslationCache* cache, const TranslateOptions& options) {
  TranslationResult result;
  auto& report = result.report;

  // unique source texts still needing a backend round trip, in first-seen order
  std::unordered_map<std::string, std::size_t> slot_of;
  std::vector<std::string> pending;
  std::vector<std::optional<std::string>> resolved;

  for (auto& r : records) {
    if (r.comment_translated) continue;
    if (slot_of.count(r.comment)) continue;
    std::optional<std::string> hit;
    if (cache) {
      if (auto entry = cache->lookup(r.comment)) hit = entry->translation;
    }
    slot_of.emplace(r.comment, resolved.size());
    resolved.push_back(hit);
    if (hit) {
      ++report.cache_hits;
    } else {
      pending.push_back(r.comment);
    }
  }

  // map pending text -> slot
  std::vector<std::size_t> pending_slot;
  pending_slot.reserve(pending.size());
  for (const auto& t : pending) pending_slot.push_back(slot_of.at(t));

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const auto n_batches = static_cast<std::int64_t>((pending.size() + batch - 1) / batch);
  std::atomic<std::size_t> calls{0};
  std::vector<std::vector<std::string>> batch_out(static_cast<std::size_t>(n_batches));
  std::vector<char> batch_ok(static_cast<std::size_t>(n_batches), 0);

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, options.parallelism))
  for (std::int64_t b = 0; b < n_batches; ++b) {
    auto lo = static_cast<std::size_t>(b) * batch;
    auto hi = std::min(pending.size(), lo + batch);
    std::vector<std::string> texts(pending.begin() + static_cast<std::ptrdiff_t>(lo),
                                   pending.begin() + static_cast<std::ptrdiff_t>(hi));
    try {
      auto out = with_retries(options.retry, [&] {
        calls.fetch_add(1);
        auto t = backend.translate(texts, options.source_lang, options.target_lang);
        if (t.size() != texts.size()) throw TransportError("translation count mismatch");
        return t;
      });
      if (cache) {
        for (std::size_t i = 0; i < texts.size(); ++i) cache->store(texts[i], out[i], backend.id());
      }
      batch_out[static_cast<std::size_t>(b)] = std::move(out);
      batch_ok[static_cast<std::size_t>(b)] = 1;
    } catch (const std::exception&) {
      batch_ok[static_cast<std::size_t>(b)] = 0;
    }
  }
  report.backend_calls = calls.load();

  for (std::int64_t b = 0; b < n_batches; ++b) {
    if (!batch_ok[static_cast<std::size_t>(b)]) continue;
    auto lo = static_cast<std::size_t>(b) * batch;
    auto& out = batch_out[static_cast<std::size_t>(b)];
    for (std::size_t i = 0; i < out.size(); ++i) resolved[pending_slot[lo + i]] = std::move(out[i]);
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (r.comment_translated) continue;
    const auto& t = resolved[slot_of.at(r.comment)];
    if (t) {
      r.comment_translated = *t;
      ++report.translated;
    } else {
      report.failed.push_back(i);
    }
  }
  result.records = std::move(records);
  return result;
}

}  // namespace wsi
