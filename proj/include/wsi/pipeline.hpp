#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsi/classify.hpp"
#include "wsi/corpus.hpp"
#include "wsi/digest.hpp"
#include "wsi/econometrics.hpp"
#include "wsi/error.hpp"
#include "wsi/index.hpp"
#include "wsi/lexicon.hpp"
#include "wsi/translate.hpp"

namespace wsi {

inline constexpr std::string_view kVersion = "1.0.0";

/// Environment variable overriding RunConfig::cache_dir.
inline constexpr const char* kCacheDirEnv = "WSI_CACHE_DIR";

struct RunConfig {
  /// Files or directories; a directory contributes its *.csv files in name order.
  std::vector<std::string> survey_paths;
  std::string wage_path;
  SurveySchema schema;
  std::vector<BackendSpec> backends;
  Normalization normalization = Normalization::PerComment;
  int max_lag = 24;
  LexiconPolicy lexicon;

  /// "none", "identity", "http://..." or "exec:...".
  std::string translate_endpoint = "none";
  std::string translate_source = "ja";
  std::string translate_target = "en";
  std::size_t translate_batch_size = 32;

  int translate_parallelism = 4;
  int classify_parallelism = 4;
  int backend_parallelism = 1;
  int kernel_threads = 1;

  std::string output_dir = "out";
  std::string cache_dir = ".wsi-cache";
  std::string prompt_template = std::string(WSI_ASSETS_DIR) + "/prompts/classify_v1.txt";
  std::uint64_t seed = 42;
  /// Overrides the content-derived run id when set.
  std::string run_id;

  /// Throws wsi::ConfigError on violated invariants.
  void validate() const;
};

/// `key = value` lines, '#' comments. Relative paths resolve against
/// `base_dir`. Unknown keys are errors. See README for the key list.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::string& path);

/// Applies WSI_CACHE_DIR if set.
void apply_environment(RunConfig& config);

/// Deterministic text of every setting that can change results (paths,
/// parallelism and directories excluded).
std::string canonical_config(const RunConfig& config);

/// Expands survey_paths into the ordered list of files.
std::vector<std::string> survey_files(const RunConfig& config);

/// Stable 256-bit key for one classification.
Digest cache_key(std::string_view comment, std::string_view model_id, std::string_view prompt_version);

/// Prompt version: template name plus a digest prefix of its contents.
std::string prompt_version(const std::string& template_path);

/// Digest -> probabilities, persisted as 256 shard files under `dir`.
/// Readers may run concurrently; store() and flush() are serialized; shards
/// are replaced by write-then-rename.
class ClassificationCache {
 public:
  explicit ClassificationCache(std::filesystem::path dir);

  std::optional<ClassProbabilities> lookup(const Digest& key) const;
  void store(const Digest& key, const ClassProbabilities& probs);
  void flush();
  std::size_t size() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, ClassProbabilities> entries_;
  std::vector<bool> dirty_;
};

struct ClassificationFailure {
  MonthKey month;
  std::size_t record = 0;
  std::string error;
};

struct BackendClassification {
  std::string backend_id;
  ClassifiedByMonth classified;
  std::vector<ClassificationFailure> failures;
  std::vector<MonthKey> months_without_lexicon;
  std::vector<Lexicon> lexicons;
  std::size_t wire_attempts = 0;
  std::size_t cache_hits = 0;
};

struct BackendReport {
  std::string backend_id;
  IndexSeries series;
  std::optional<MonthRange> evaluation_span;
  std::optional<GrangerSweep> standard;
  std::optional<GrangerSweep> weighted;
  std::string failure;
};

struct ReportBundle {
  std::string run_id;
  std::filesystem::path run_dir;
  std::vector<BackendReport> backends;
  std::vector<std::string> failed_backends;
  nlohmann::json manifest;
  /// Run statistics that are not part of the written output.
  std::size_t wire_attempts = 0;
  std::size_t cache_hits = 0;
};

/// A stage failed; the run directory carries a FAILED marker.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

using BackendFactory = std::function<std::unique_ptr<ClassifierBackend>(const BackendSpec&)>;

/// Builds the classifier for a spec: "mock" (synthetic keyword rules),
/// "mock:<rules file>", "http://..." or "exec:...". Throws for "lexicon",
/// which the pipeline handles itself.
std::unique_ptr<ClassifierBackend> make_backend(const BackendSpec& spec);

/// Stage sequencing over out/<run-id>/. Each stage keeps its result in
/// memory and on disk, so stages can run in one process (run()) or one per
/// CLI invocation.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  void set_backend_factory(BackendFactory factory) { factory_ = std::move(factory); }

  const RunConfig& config() const { return config_; }
  const std::string& run_id();
  std::filesystem::path run_dir();

  void ingest();
  /// Empty id classifies every configured backend.
  void classify(const std::string& backend_id = {});
  void index();
  void granger();
  ReportBundle report();
  /// All stages; on failure writes FAILED and throws StageError.
  ReportBundle run();

 private:
  struct IngestState {
    std::vector<SurveyRecord> records;
    WageSeries wages;
  };

  const BackendSpec& backend(const std::string& id) const;
  IngestState& ingested();
  BackendClassification classify_one(const BackendSpec& spec);
  BackendClassification classify_lexicon(const BackendSpec& spec);
  BackendClassification classify_remote(const BackendSpec& spec);
  void write_classification(const BackendClassification& c);
  ClassifiedByMonth load_classification(const std::string& id);
  std::map<std::string, IndexSeries>& series();
  template <typename Fn>
  auto stage(const char* name, Fn&& fn) -> decltype(fn());

  RunConfig config_;
  BackendFactory factory_;
  std::optional<std::string> run_id_;
  std::optional<IngestState> ingest_;
  std::map<std::string, BackendClassification> classified_;
  std::optional<std::map<std::string, IndexSeries>> series_;
  std::map<std::string, BackendReport> reports_;
  std::size_t wire_attempts_ = 0;
  std::size_t cache_hits_ = 0;
};

}  // namespace wsi
