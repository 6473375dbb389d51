#include "wsi/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "wsi/csv.hpp"
#include "wsi/error.hpp"
#include "wsi/format.hpp"
#include "wsi/report.hpp"
#include "wsi/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace wsi {

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  if (backends.empty()) throw ConfigError("config: at least one backend is required");
  if (max_lag < 1) throw ConfigError("config: max_lag must be >= 1");
  if (survey_paths.empty()) throw ConfigError("config: no survey input");
  if (wage_path.empty()) throw ConfigError("config: no wage input");
  std::set<std::string> ids;
  for (const auto& b : backends) {
    wsi::validate(b);
    if (!ids.insert(b.id).second) throw ConfigError(fmt::format("config: duplicate backend '{}'", b.id));
    if (b.endpoint.empty()) throw ConfigError(fmt::format("config: backend '{}' has no endpoint", b.id));
  }
  if (lexicon.min_mean_frequency < 0 || lexicon.top_k < 1) {
    throw ConfigError("config: lexicon.min_mean_frequency >= 0 and lexicon.top_k >= 1 required");
  }
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  T out{};
  std::istringstream in(value);
  in.imbue(std::locale::classic());
  if (!(in >> out) || !(in >> std::ws).eof()) {
    throw ConfigError(fmt::format("config: bad value '{}' for {}", value, key));
  }
  return out;
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

Judgment parse_judgment_name(const std::string& key, const std::string& value) {
  auto norm = SurveySchema::normalize_label(value);
  for (auto j : kAllJudgments) {
    if (SurveySchema::normalize_label(to_string(j)) == norm) return j;
  }
  throw ConfigError(fmt::format("config: {} must name a judgment, got '{}'", key, value));
}

}  // namespace

RunConfig parse_config(std::istream& in, const fs::path& base_dir) {
  RunConfig cfg;
  cfg.survey_paths.clear();
  std::map<std::string, std::size_t> backend_slot;
  auto backend_for = [&](const std::string& id) -> BackendSpec& {
    auto it = backend_slot.find(id);
    if (it == backend_slot.end()) {
      it = backend_slot.emplace(id, cfg.backends.size()).first;
      BackendSpec spec;
      spec.id = id;
      spec.model_id = id;
      cfg.backends.push_back(spec);
    }
    return cfg.backends[it->second];
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected key = value", lineno));
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));

    if (key == "survey") {
      std::istringstream parts(value);
      std::string part;
      while (std::getline(parts, part, ',')) {
        if (!trim(part).empty()) cfg.survey_paths.push_back(resolve(base_dir, trim(part)));
      }
    } else if (key == "wages") {
      cfg.wage_path = resolve(base_dir, value);
    } else if (key == "normalization") {
      auto n = parse_normalization(value);
      if (!n) throw ConfigError(fmt::format("config: normalization must be per_comment or paper_literal"));
      cfg.normalization = *n;
    } else if (key == "max_lag") {
      cfg.max_lag = parse_value<int>(key, value);
    } else if (key == "lexicon.window") {
      if (value == "expanding") {
        cfg.lexicon.window = WindowKind::Expanding;
      } else if (value == "rolling") {
        cfg.lexicon.window = WindowKind::Rolling;
      } else {
        throw ConfigError("config: lexicon.window must be expanding or rolling");
      }
    } else if (key == "lexicon.rolling_months") {
      cfg.lexicon.rolling_months = parse_value<int>(key, value);
    } else if (key == "lexicon.smoothing") {
      if (value == "laplace") {
        cfg.lexicon.smoothing = Smoothing::Laplace;
      } else if (value == "none") {
        cfg.lexicon.smoothing = Smoothing::None;
      } else {
        throw ConfigError("config: lexicon.smoothing must be laplace or none");
      }
    } else if (key == "lexicon.min_mean_frequency") {
      cfg.lexicon.min_mean_frequency = parse_value<double>(key, value);
    } else if (key == "lexicon.top_k") {
      cfg.lexicon.top_k = parse_value<std::size_t>(key, value);
    } else if (key == "translate.endpoint") {
      cfg.translate_endpoint = value;
    } else if (key == "translate.source") {
      cfg.translate_source = value;
    } else if (key == "translate.target") {
      cfg.translate_target = value;
    } else if (key == "translate.batch_size") {
      cfg.translate_batch_size = parse_value<std::size_t>(key, value);
    } else if (key == "parallelism.translate") {
      cfg.translate_parallelism = parse_value<int>(key, value);
    } else if (key == "parallelism.classify") {
      cfg.classify_parallelism = parse_value<int>(key, value);
    } else if (key == "parallelism.backends") {
      cfg.backend_parallelism = parse_value<int>(key, value);
    } else if (key == "parallelism.kernels") {
      cfg.kernel_threads = parse_value<int>(key, value);
    } else if (key == "output") {
      cfg.output_dir = resolve(base_dir, value);
    } else if (key == "cache") {
      cfg.cache_dir = resolve(base_dir, value);
    } else if (key == "prompt_template") {
      cfg.prompt_template = resolve(base_dir, value);
    } else if (key == "seed") {
      cfg.seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "run_id") {
      cfg.run_id = value;
    } else if (key.rfind("schema.alias.", 0) == 0) {
      cfg.schema.add_alias(key.substr(13), parse_judgment_name(key, value));
    } else if (key.rfind("schema.", 0) == 0) {
      auto field = key.substr(7);
      if (field == "month_column") cfg.schema.month_column = value;
      else if (field == "region_column") cfg.schema.region_column = value;
      else if (field == "industry_column") cfg.schema.industry_column = value;
      else if (field == "judgment_column") cfg.schema.judgment_column = value;
      else if (field == "comment_column") cfg.schema.comment_column = value;
      else if (field == "translated_column") cfg.schema.translated_column = value;
      else throw ConfigError(fmt::format("config: unknown key {}", key));
    } else if (key.rfind("backend.", 0) == 0) {
      auto rest = key.substr(8);
      auto dot = rest.rfind('.');
      if (dot == std::string::npos || dot == 0) throw ConfigError(fmt::format("config: bad key {}", key));
      auto& b = backend_for(rest.substr(0, dot));
      auto field = rest.substr(dot + 1);
      if (field == "endpoint") {
        b.endpoint = value.rfind("mock:", 0) == 0 ? "mock:" + resolve(base_dir, value.substr(5)) : value;
      } else if (field == "model") {
        b.model_id = value;
      } else if (field == "fallback_model") {
        b.fallback_model_id = value.empty() ? std::nullopt : std::optional(value);
      } else if (field == "batch_size") {
        b.batch_size = parse_value<std::size_t>(key, value);
      } else if (field == "max_retries") {
        b.max_retries = parse_value<int>(key, value);
      } else if (field == "timeout_ms") {
        b.timeout = std::chrono::milliseconds(parse_value<long>(key, value));
      } else if (field == "backoff_ms") {
        b.backoff = std::chrono::milliseconds(parse_value<long>(key, value));
      } else if (field == "concurrency") {
        b.concurrency = parse_value<int>(key, value);
      } else {
        throw ConfigError(fmt::format("config: unknown key {}", key));
      }
    } else {
      throw ConfigError(fmt::format("config: unknown key {}", key));
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path));
  auto cfg = parse_config(in, fs::path(path).parent_path());
  apply_environment(cfg);
  return cfg;
}

void apply_environment(RunConfig& config) {
  if (const char* dir = std::getenv(kCacheDirEnv); dir != nullptr && *dir != '\0') {
    config.cache_dir = dir;
  }
}

std::string canonical_config(const RunConfig& c) {
  std::vector<std::string> lines;
  auto add = [&lines](std::string k, std::string v) { lines.push_back(k + "=" + v); };
  add("normalization", std::string(to_string(c.normalization)));
  add("max_lag", std::to_string(c.max_lag));
  add("lexicon.window", c.lexicon.window == WindowKind::Expanding ? "expanding" : "rolling");
  add("lexicon.rolling_months", std::to_string(c.lexicon.rolling_months));
  add("lexicon.smoothing", c.lexicon.smoothing == Smoothing::Laplace ? "laplace" : "none");
  add("lexicon.min_mean_frequency", format_shortest(c.lexicon.min_mean_frequency));
  add("lexicon.top_k", std::to_string(c.lexicon.top_k));
  add("translate.endpoint", c.translate_endpoint);
  add("translate.source", c.translate_source);
  add("translate.target", c.translate_target);
  add("seed", std::to_string(c.seed));
  add("schema.month_column", c.schema.month_column);
  add("schema.region_column", c.schema.region_column);
  add("schema.industry_column", c.schema.industry_column);
  add("schema.judgment_column", c.schema.judgment_column);
  add("schema.comment_column", c.schema.comment_column);
  add("schema.translated_column", c.schema.translated_column);
  for (const auto& [label, j] : c.schema.judgment_aliases) {
    add("schema.alias." + label, std::string(to_string(j)));
  }
  std::sort(lines.begin(), lines.end());
  // backend order matters for table layout, so it is kept as declared
  for (const auto& b : c.backends) {
    std::string endpoint = b.endpoint;
    if (endpoint.rfind("mock:", 0) == 0) endpoint = "mock:" + file_digest(endpoint.substr(5)).hex();
    lines.push_back(fmt::format("backend.{}={}|{}|{}", b.id, endpoint, b.model_id,
                                b.fallback_model_id.value_or("")));
  }
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::vector<std::string> survey_files(const RunConfig& config) {
  std::vector<std::string> files;
  for (const auto& p : config.survey_paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
          found.push_back(entry.path().string());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

Digest cache_key(std::string_view comment, std::string_view model_id, std::string_view prompt_version) {
  return Digest::of_parts({"wsi-classify-v1", comment, model_id, prompt_version});
}

std::string prompt_version(const std::string& template_path) {
  auto stem = fs::path(template_path).stem().string();
  return stem + "-" + file_digest(template_path).hex().substr(0, 12);
}

// ---------------------------------------------------------------- cache

namespace {

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += fmt::format(".tmp{}", static_cast<unsigned long>(std::hash<std::string>{}(path.string()) & 0xffff));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out << content;
    if (!out) throw Error(fmt::format("write failed for {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t shard_of(const std::string& hex) { return std::stoul(hex.substr(0, 2), nullptr, 16); }

}  // namespace

ClassificationCache::ClassificationCache(fs::path dir) : dir_(std::move(dir)), dirty_(256, false) {
  fs::create_directories(dir_);
  for (int s = 0; s < 256; ++s) {
    auto path = dir_ / fmt::format("{:02x}.tsv", s);
    std::ifstream in(path);
    if (!in) continue;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      ls.imbue(std::locale::classic());
      std::string hex;
      ClassProbabilities p;
      if (ls >> hex >> p.u >> p.v >> p.w && hex.size() == 64) entries_[hex] = p;
    }
  }
}

std::optional<ClassProbabilities> ClassificationCache::lookup(const Digest& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key.hex());
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ClassificationCache::store(const Digest& key, const ClassProbabilities& probs) {
  auto hex = key.hex();
  std::lock_guard lock(mutex_);
  entries_[hex] = probs;
  dirty_[shard_of(hex)] = true;
}

void ClassificationCache::flush() {
  std::lock_guard lock(mutex_);
  std::vector<std::vector<const std::pair<const std::string, ClassProbabilities>*>> shards(256);
  for (const auto& kv : entries_) {
    auto s = shard_of(kv.first);
    if (dirty_[s]) shards[s].push_back(&kv);
  }
  for (std::size_t s = 0; s < 256; ++s) {
    if (!dirty_[s]) continue;
    auto& items = shards[s];
    std::sort(items.begin(), items.end(), [](auto* a, auto* b) { return a->first < b->first; });
    std::string content;
    for (const auto* kv : items) {
      content += fmt::format("{}\t{}\t{}\t{}\n", kv->first, format_shortest(kv->second.u),
                             format_shortest(kv->second.v), format_shortest(kv->second.w));
    }
    write_atomic(dir_ / fmt::format("{:02x}.tsv", s), content);
    dirty_[s] = false;
  }
}

std::size_t ClassificationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------- backends

std::unique_ptr<ClassifierBackend> make_backend(const BackendSpec& spec) {
  if (spec.endpoint == "mock") {
    return mock_keyword_classifier(synthetic_keyword_rules());
  }
  if (spec.endpoint.rfind("mock:", 0) == 0) {
    return mock_keyword_classifier(load_keyword_rules(spec.endpoint.substr(5)));
  }
  if (spec.endpoint == "lexicon") throw ConfigError("the lexicon baseline is not a wire backend");
  return std::make_unique<WireClassifier>(make_transport(spec.endpoint, spec.timeout));
}

// ---------------------------------------------------------------- pipeline

namespace {

json month_json(MonthKey m) { return m.to_string(); }

json span_json(const std::optional<MonthRange>& r) {
  if (!r) return nullptr;
  return json::array({r->first.to_string(), r->last.to_string()});
}

/// Longest contiguous block of months present in both maps.
std::optional<AlignedPair> evaluation_pair(const std::map<MonthKey, double>& x,
                                           const std::map<MonthKey, double>& y) {
  std::vector<MonthKey> common;
  for (const auto& [m, v] : y) {
    if (x.count(m)) common.push_back(m);
  }
  std::size_t best_lo = 0, best_len = 0;
  for (std::size_t i = 0; i < common.size();) {
    std::size_t j = i + 1;
    while (j < common.size() && common[j] == common[j - 1].next()) ++j;
    if (j - i > best_len) {
      best_lo = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len < 2) return std::nullopt;
  AlignedPair pair;
  pair.start = common[best_lo];
  for (std::size_t i = best_lo; i < best_lo + best_len; ++i) {
    pair.x.push_back(x.at(common[i]));
    pair.y.push_back(y.at(common[i]));
  }
  return pair;
}

GrangerSweep read_granger_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("missing {}; run `wsi granger` first", path.string()));
  GrangerSweep sweep;
  auto rows = csv::read_all(in);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() < 6) throw LoadError(fmt::format("{}:{}: expected 6 fields", path.string(), rows[i].line));
    int lag = std::stoi(f[2]);
    if (f[3] == "NA") {
      sweep.skipped.push_back({lag, "not computed"});
      continue;
    }
    GrangerResult r;
    r.lag = lag;
    r.df_num = lag;
    r.f_stat = f[3] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(f[3]);
    r.p_value = std::stod(f[4]);
    r.stars = stars_for(r.p_value);
    sweep.results.push_back(r);
  }
  return sweep;
}

std::string endpoint_kind(const std::string& endpoint) {
  if (endpoint == "lexicon") return "lexicon";
  if (endpoint.rfind("mock", 0) == 0) return "mock";
  if (endpoint.rfind("http://", 0) == 0) return "http";
  if (endpoint.rfind("exec:", 0) == 0) return "exec";
  return "unknown";
}

}  // namespace

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {}

template <typename Fn>
auto Pipeline::stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    try {
      fs::create_directories(run_dir());
      write_atomic(run_dir() / "FAILED", fmt::format("stage: {}\ncause: {}\n", name, e.what()));
    } catch (...) {
    }
    throw StageError(name, e.what());
  }
}

const std::string& Pipeline::run_id() {
  if (!run_id_) {
    if (!config_.run_id.empty()) {
      run_id_ = config_.run_id;
    } else {
      Hasher h;
      h.update_part(canonical_config(config_));
      for (const auto& f : survey_files(config_)) h.update_part(file_digest(f).hex());
      h.update_part(file_digest(config_.wage_path).hex());
      h.update_part(prompt_version(config_.prompt_template));
      h.update_part(kVersion);
      run_id_ = h.finish().hex().substr(0, 16);
    }
  }
  return *run_id_;
}

fs::path Pipeline::run_dir() { return fs::path(config_.output_dir) / run_id(); }

const BackendSpec& Pipeline::backend(const std::string& id) const {
  for (const auto& b : config_.backends) {
    if (b.id == id) return b;
  }
  throw ConfigError(fmt::format("unknown backend '{}'", id));
}

void Pipeline::ingest() {
  config_.validate();
  const auto files = survey_files(config_);
  auto loaded = load_surveys(files, config_.schema);
  auto wages = load_wages(config_.wage_path);

  json ingest_meta;
  json errors = json::array();
  for (const auto& e : loaded.errors) {
    errors.push_back({{"file", fs::path(e.source).filename().string()}, {"line", e.line}, {"reason", e.reason}});
  }
  ingest_meta["load_errors"] = errors;
  ingest_meta["skipped_empty"] = loaded.skipped_empty;
  ingest_meta["records"] = loaded.records.size();

  if (config_.translate_endpoint != "none") {
    std::unique_ptr<TranslationBackend> translator;
    if (config_.translate_endpoint == "identity") {
      translator = std::make_unique<IdentityTranslator>();
    } else {
      translator = std::make_unique<WireTranslator>(
          make_transport(config_.translate_endpoint, std::chrono::milliseconds(60000)),
          config_.translate_endpoint);
    }
    TranslationCache cache(fs::path(config_.cache_dir) / "translations");
    TranslateOptions opts;
    opts.parallelism = config_.translate_parallelism;
    opts.batch_size = config_.translate_batch_size;
    opts.source_lang = config_.translate_source;
    opts.target_lang = config_.translate_target;
    auto result = translate_all(std::move(loaded.records), *translator, &cache, opts);
    loaded.records = std::move(result.records);
    ingest_meta["translation"] = {{"translated", result.report.translated},
                                  {"failed", result.report.failed}};
  }

  fs::create_directories(run_dir() / "work");
  std::ostringstream recs;
  write_survey(recs, loaded.records);
  write_atomic(run_dir() / "work" / "records.csv", recs.str());
  std::ostringstream wg;
  write_wages(wg, wages);
  write_atomic(run_dir() / "work" / "wages.csv", wg.str());
  std::ostringstream summary;
  write_corpus_summary(summary, summarize_corpus(loaded.records));
  write_atomic(run_dir() / "summary" / "corpus.csv", summary.str());
  write_atomic(run_dir() / "work" / "ingest.json", ingest_meta.dump(2) + "\n");

  ingest_ = IngestState{std::move(loaded.records), std::move(wages)};
}

Pipeline::IngestState& Pipeline::ingested() {
  if (!ingest_) {
    auto records_path = run_dir() / "work" / "records.csv";
    if (!fs::exists(records_path)) {
      throw Error(fmt::format("{} not found; run `wsi ingest` first", records_path.string()));
    }
    auto loaded = load_survey(records_path.string());
    ingest_ = IngestState{std::move(loaded.records), load_wages((run_dir() / "work" / "wages.csv").string())};
  }
  return *ingest_;
}

BackendClassification Pipeline::classify_one(const BackendSpec& spec) {
  return spec.endpoint == "lexicon" ? classify_lexicon(spec) : classify_remote(spec);
}

BackendClassification Pipeline::classify_lexicon(const BackendSpec& spec) {
  const auto& st = ingested();
  BackendClassification out;
  out.backend_id = spec.id;

  std::map<MonthKey, std::vector<std::size_t>> by_month;
  for (std::size_t i = 0; i < st.records.size(); ++i) by_month[st.records[i].month].push_back(i);
  MonthTexts texts;
  for (const auto& [m, idx] : by_month) {
    auto& v = texts[m];
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(st.records[i].analysis_text());
  }
  const auto& policy = config_.lexicon;
  const int threads = std::max(1, config_.kernel_threads);
  auto table = count_terms(texts, StopWords::english(), 2.0 * policy.min_mean_frequency, threads);

  std::vector<MonthKey> targets;
  for (const auto& [m, idx] : by_month) targets.push_back(m);
  auto lexicons = rolling_lexicons(table, st.wages.yoy(), targets, policy, threads);

  std::vector<std::vector<ClassifiedComment>> per_month(targets.size());
  const auto n = static_cast<std::int64_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& lex = lexicons[static_cast<std::size_t>(k)];
    if (!lex) continue;
    const auto month = targets[static_cast<std::size_t>(k)];
    auto& dst = per_month[static_cast<std::size_t>(k)];
    for (auto i : by_month.at(month)) {
      ClassifiedComment c;
      c.record_index = i;
      c.month = month;
      c.backend_id = spec.id;
      c.probs = lexicon_classify(tokenize(st.records[i].analysis_text()), *lex, policy.smoothing);
      c.label = hard_label(c.probs);
      dst.push_back(std::move(c));
    }
  }
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (!lexicons[k]) {
      out.months_without_lexicon.push_back(targets[k]);
      continue;
    }
    out.classified.emplace(targets[k], std::move(per_month[k]));
    out.lexicons.push_back(*lexicons[k]);
  }
  return out;
}

BackendClassification Pipeline::classify_remote(const BackendSpec& spec) {
  const auto& st = ingested();
  BackendClassification out;
  out.backend_id = spec.id;

  auto backend = factory_ ? factory_(spec) : make_backend(spec);
  ClassificationCache cache(fs::path(config_.cache_dir) / "classify");
  const auto pv = prompt_version(config_.prompt_template);

  const std::size_t n = st.records.size();
  std::vector<std::optional<ClassProbabilities>> probs(n);
  std::vector<std::string> errors(n);
  std::vector<std::string> pending_texts;
  std::unordered_map<std::string, std::size_t> pending_slot;  // primary key hex -> slot
  std::vector<std::size_t> slot_of_record(n, SIZE_MAX);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& text = st.records[i].analysis_text();
    auto key = cache_key(text, spec.model_id, pv);
    auto hit = cache.lookup(key);
    if (!hit && spec.fallback_model_id) hit = cache.lookup(cache_key(text, *spec.fallback_model_id, pv));
    if (hit) {
      probs[i] = *hit;
      ++out.cache_hits;
      continue;
    }
    auto [it, inserted] = pending_slot.emplace(key.hex(), pending_texts.size());
    if (inserted) pending_texts.push_back(text);
    slot_of_record[i] = it->second;
  }

  if (!pending_texts.empty()) {
    BackendSpec s = spec;
    s.concurrency = std::max(spec.concurrency, config_.classify_parallelism);
    auto report = classify_batch(pending_texts, s, *backend);
    out.wire_attempts = report.wire_attempts;
    for (std::size_t k = 0; k < pending_texts.size(); ++k) {
      const auto& item = report.items[k];
      if (!item.failed) cache.store(cache_key(pending_texts[k], item.model_id, pv), item.probs);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (slot_of_record[i] == SIZE_MAX) continue;
      const auto& item = report.items[slot_of_record[i]];
      if (item.failed) {
        errors[i] = item.error;
      } else {
        probs[i] = item.probs;
      }
    }
    cache.flush();
  }

  for (std::size_t i = 0; i < n; ++i) {
    ClassifiedComment c;
    c.record_index = i;
    c.month = st.records[i].month;
    c.backend_id = spec.id;
    c.failed = !probs[i].has_value();
    c.probs = probs[i].value_or(ClassProbabilities::unrelated());
    c.label = hard_label(c.probs);
    if (c.failed) out.failures.push_back({c.month, i, errors[i]});
    out.classified[c.month].push_back(std::move(c));
  }
  return out;
}

void Pipeline::write_classification(const BackendClassification& c) {
  std::ostringstream s;
  s << "yyyymm,record,u,v,w,label,failed\n";
  for (const auto& [m, comments] : c.classified) {
    for (const auto& cc : comments) {
      s << m.to_string() << ',' << cc.record_index << ',' << format_shortest(cc.probs.u) << ','
        << format_shortest(cc.probs.v) << ',' << format_shortest(cc.probs.w) << ','
        << to_string(cc.label) << ',' << (cc.failed ? 1 : 0) << '\n';
    }
  }
  write_atomic(run_dir() / "work" / "classified" / (c.backend_id + ".csv"), s.str());

  json meta;
  json failures = json::array();
  for (const auto& f : c.failures) {
    failures.push_back({{"month", f.month.to_string()}, {"record", f.record}, {"error", f.error}});
  }
  meta["failures"] = failures;
  json no_lex = json::array();
  for (auto m : c.months_without_lexicon) no_lex.push_back(month_json(m));
  meta["months_without_lexicon"] = no_lex;
  json degenerate = json::array();
  for (const auto& lex : c.lexicons) {
    if (lex.degenerate()) degenerate.push_back(month_json(lex.as_of()));
  }
  meta["degenerate_lexicon_months"] = degenerate;
  write_atomic(run_dir() / "work" / ("classify_" + c.backend_id + ".json"), meta.dump(2) + "\n");

  if (endpoint_kind(backend(c.backend_id).endpoint) == "lexicon") {
    std::ostringstream audit;
    write_lexicon_audit(audit, c.lexicons);
    write_atomic(run_dir() / "lexicon" / (c.backend_id + ".csv"), audit.str());

    // month-level word-count aggregate, kept for comparison with the
    // per-comment route
    const auto& st = ingested();
    std::ostringstream wc;
    wc << "yyyymm,positive_hits,negative_hits,wsi_wordcount\n";
    std::size_t li = 0;
    for (const auto& [m, comments] : c.classified) {
      while (li < c.lexicons.size() && c.lexicons[li].as_of() != m) ++li;
      if (li == c.lexicons.size()) break;
      LexiconHits total;
      for (const auto& cc : comments) {
        auto h = count_hits(tokenize(st.records[cc.record_index].analysis_text()), c.lexicons[li]);
        total.positive += h.positive;
        total.negative += h.negative;
      }
      auto denom = total.positive + total.negative;
      wc << m.to_string() << ',' << total.positive << ',' << total.negative << ','
         << (denom > 0 ? format_shortest(static_cast<double>(total.positive - total.negative) /
                                         static_cast<double>(denom) * 100.0)
                       : std::string("NA"))
         << '\n';
    }
    write_atomic(run_dir() / "lexicon" / (c.backend_id + "_wordcount.csv"), wc.str());
  }
}

void Pipeline::classify(const std::string& backend_id) {
  config_.validate();
  std::vector<const BackendSpec*> todo;
  for (const auto& b : config_.backends) {
    if (backend_id.empty() || b.id == backend_id) todo.push_back(&b);
  }
  if (todo.empty()) throw ConfigError(fmt::format("unknown backend '{}'", backend_id));
  ingested();
  run_dir();

  std::vector<std::optional<BackendClassification>> results(todo.size());
  std::vector<std::string> errors(todo.size());
  const auto n = static_cast<std::int64_t>(todo.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, config_.backend_parallelism))
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = classify_one(*todo[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!results[i]) throw Error(fmt::format("backend {}: {}", todo[i]->id, errors[i]));
    write_classification(*results[i]);
    wire_attempts_ += results[i]->wire_attempts;
    cache_hits_ += results[i]->cache_hits;
    classified_[todo[i]->id] = std::move(*results[i]);
  }
  series_.reset();
}

ClassifiedByMonth Pipeline::load_classification(const std::string& id) {
  if (auto it = classified_.find(id); it != classified_.end()) return it->second.classified;
  auto path = run_dir() / "work" / "classified" / (id + ".csv");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("{} not found; run `wsi classify` first", path.string()));
  ClassifiedByMonth out;
  auto rows = csv::read_all(in);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() < 7) throw LoadError(fmt::format("{}:{}: expected 7 fields", path.string(), rows[i].line));
    ClassifiedComment c;
    c.month = *MonthKey::parse(f[0]);
    c.record_index = std::stoul(f[1]);
    c.probs = {std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
    c.label = parse_hard_label(f[5]).value_or(HardLabel::Unrelated);
    c.failed = f[6] == "1";
    c.backend_id = id;
    out[c.month].push_back(std::move(c));
  }
  return out;
}

void Pipeline::index() {
  std::map<std::string, IndexSeries> all;
  for (const auto& b : config_.backends) {
    auto series = build_series(load_classification(b.id), config_.normalization,
                               std::max(1, config_.kernel_threads));
    std::ostringstream s;
    write_series_csv(s, series);
    write_atomic(run_dir() / "series" / (b.id + ".csv"), s.str());
    all.emplace(b.id, std::move(series));
  }
  series_ = std::move(all);
}

std::map<std::string, IndexSeries>& Pipeline::series() {
  if (!series_) {
    std::map<std::string, IndexSeries> all;
    for (const auto& b : config_.backends) {
      auto path = run_dir() / "series" / (b.id + ".csv");
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(fmt::format("{} not found; run `wsi index` first", path.string()));
      all.emplace(b.id, read_series_csv(in, config_.normalization));
    }
    series_ = std::move(all);
  }
  return *series_;
}

void Pipeline::granger() {
  const auto& wages = ingested().wages;
  for (const auto& b : config_.backends) {
    BackendReport rep;
    rep.backend_id = b.id;
    rep.series = series().at(b.id);
    auto pair_std = evaluation_pair(rep.series.standard(), wages.yoy());
    auto pair_wt = evaluation_pair(rep.series.weighted(), wages.yoy());
    if (!pair_std || !pair_wt) {
      rep.failure = "index and yoy overlap in fewer than two contiguous months";
    } else {
      rep.evaluation_span = pair_std->span();
      rep.standard = granger_sweep(*pair_std, config_.max_lag, std::max(1, config_.kernel_threads));
      rep.weighted = granger_sweep(*pair_wt, config_.max_lag, std::max(1, config_.kernel_threads));
      for (const auto& [kind, sweep] : {std::pair{"standard", &*rep.standard}, std::pair{"weighted", &*rep.weighted}}) {
        std::ostringstream s;
        write_granger_csv(s, {b.id, kind}, *sweep);
        write_atomic(run_dir() / "granger" / fmt::format("{}_{}.csv", b.id, kind), s.str());
      }
    }
    reports_[b.id] = std::move(rep);
  }
}

ReportBundle Pipeline::report() {
  const auto& st = ingested();
  ReportBundle bundle;
  bundle.run_id = run_id();
  bundle.run_dir = run_dir();

  // sweeps from memory, else from the granger CSVs
  for (const auto& b : config_.backends) {
    if (reports_.count(b.id)) continue;
    BackendReport rep;
    rep.backend_id = b.id;
    rep.series = series().at(b.id);
    auto std_path = run_dir() / "granger" / (b.id + "_standard.csv");
    if (fs::exists(std_path)) {
      rep.standard = read_granger_csv(std_path);
      rep.weighted = read_granger_csv(run_dir() / "granger" / (b.id + "_weighted.csv"));
      if (auto pair = evaluation_pair(rep.series.standard(), st.wages.yoy())) rep.evaluation_span = pair->span();
    } else {
      rep.failure = "no Granger results";
    }
    reports_[b.id] = std::move(rep);
  }

  fs::create_directories(run_dir() / "charts");
  std::vector<NamedSweep> standard, weighted;
  json backends = json::array();
  for (const auto& b : config_.backends) {
    auto& rep = reports_.at(b.id);
    json jb;
    jb["id"] = b.id;
    jb["kind"] = endpoint_kind(b.endpoint);
    jb["model"] = b.model_id;
    jb["fallback_model"] = b.fallback_model_id ? json(*b.fallback_model_id) : json(nullptr);
    jb["series_months"] = rep.series.points.size();
    json skipped = json::array();
    for (auto m : rep.series.skipped) skipped.push_back(month_json(m));
    jb["months_all_excluded"] = skipped;
    jb["evaluation_span"] = span_json(rep.evaluation_span);

    auto meta_path = run_dir() / "work" / ("classify_" + b.id + ".json");
    if (fs::exists(meta_path)) {
      auto meta = json::parse(read_file(meta_path));
      jb["classification_failures"] = meta["failures"].size();
      jb["failures"] = meta["failures"];
      jb["months_without_lexicon"] = meta["months_without_lexicon"];
      jb["degenerate_lexicon_months"] = meta["degenerate_lexicon_months"];
    }

    if (rep.standard && rep.weighted) {
      standard.push_back({{b.id, "standard"}, *rep.standard});
      weighted.push_back({{b.id, "weighted"}, *rep.weighted});
      json skipped_lags = json::array();
      for (const auto& s : rep.standard->skipped) skipped_lags.push_back(s.lag);
      jb["skipped_lags"] = skipped_lags;
    }
    try {
      write_series_chart((run_dir() / "charts" / (b.id + ".svg")).string(), rep.series, st.wages,
                         fmt::format("Wage Sentiment Index: {}", b.id));
      jb["chart"] = fmt::format("charts/{}.svg", b.id);
    } catch (const std::exception& e) {
      jb["chart"] = nullptr;
      jb["chart_error"] = e.what();
    }
    if (!rep.failure.empty()) {
      jb["failure"] = rep.failure;
      bundle.failed_backends.push_back(b.id);
    }
    backends.push_back(jb);
    bundle.backends.push_back(rep);
  }

  if (!standard.empty()) {
    std::string md = render_comparison_markdown(standard, "Granger causality: standard WSI");
    md += "\n" + render_comparison_markdown(weighted, "Granger causality: weighted WSI");
    write_atomic(run_dir() / "tables" / "granger.md", md);
    std::string tex = render_comparison_latex(standard, "Granger Causality Test on the Standard WSI");
    tex += "\n" + render_comparison_latex(weighted, "Granger Causality Test on the Weighted WSI");
    write_atomic(run_dir() / "tables" / "granger.tex", tex);
  }

  json manifest;
  manifest["version"] = kVersion;
  manifest["run_id"] = run_id();
  manifest["config_digest"] = Digest::of(canonical_config(config_)).hex();
  manifest["prompt_version"] = prompt_version(config_.prompt_template);
  manifest["normalization"] = to_string(config_.normalization);
  manifest["max_lag"] = config_.max_lag;
  json inputs = json::array();
  for (const auto& f : survey_files(config_)) {
    inputs.push_back({{"file", fs::path(f).filename().string()}, {"sha256", file_digest(f).hex()}});
  }
  manifest["inputs"] = {{"surveys", inputs},
                        {"wages", {{"file", fs::path(config_.wage_path).filename().string()},
                                   {"sha256", file_digest(config_.wage_path).hex()}}}};
  json spans;
  if (!st.records.empty()) spans["survey"] = {st.records.front().month.to_string(), st.records.back().month.to_string()};
  if (!st.wages.empty()) {
    spans["wages"] = {st.wages.levels().begin()->first.to_string(), st.wages.levels().rbegin()->first.to_string()};
  }
  if (!st.wages.yoy().empty()) {
    spans["yoy"] = {st.wages.yoy().begin()->first.to_string(), st.wages.yoy().rbegin()->first.to_string()};
  }
  manifest["spans"] = spans;
  auto ingest_path = run_dir() / "work" / "ingest.json";
  if (fs::exists(ingest_path)) manifest["ingest"] = json::parse(read_file(ingest_path));
  manifest["backends"] = backends;
  manifest["failed_backends"] = bundle.failed_backends;
  write_atomic(run_dir() / "manifest.json", manifest.dump(2) + "\n");

  bundle.manifest = std::move(manifest);
  bundle.wire_attempts = wire_attempts_;
  bundle.cache_hits = cache_hits_;
  return bundle;
}

ReportBundle Pipeline::run() {
  stage("config", [&] {
    config_.validate();
    fs::create_directories(run_dir());
    fs::remove(run_dir() / "FAILED");
  });
  stage("ingest", [&] { ingest(); });
  stage("classify", [&] { classify(); });
  stage("index", [&] { index(); });
  stage("granger", [&] { granger(); });
  return stage("report", [&] { return report(); });
}

}  // namespace wsi
