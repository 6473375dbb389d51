#include "wsi/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>

#include "wsi/error.hpp"

namespace wsi::kernels {

namespace {

using MonthCounts = std::unordered_map<std::string, double>;

MonthRange span_of(const MonthTexts& texts) {
  if (texts.empty()) {
    MonthKey m;
    return {m, m.minus(1)};
  }
  return {texts.begin()->first, texts.rbegin()->first};
}

void count_month(const std::vector<std::string>& docs, const StopWords& stop_words,
                 MonthCounts& out) {
  for (const auto& d : docs) {
    for (auto& tok : tokenize(d, stop_words)) out[std::move(tok)] += 1.0;
  }
}

// Turns per-month maps (indexed by month offset) into the dense table.
TermFrequencyTable assemble(MonthRange span, const std::vector<MonthCounts>& per_month,
                            double min_total) {
  std::unordered_map<std::string, double> totals;
  for (const auto& m : per_month) {
    for (const auto& [term, n] : m) totals[term] += n;
  }
  TermFrequencyTable table;
  table.span = span;
  for (const auto& [term, n] : totals) {
    if (n >= min_total) table.terms.push_back(term);
  }
  std::sort(table.terms.begin(), table.terms.end());
  table.counts.assign(table.terms.size(), std::vector<double>(per_month.size(), 0.0));
  for (std::size_t t = 0; t < table.terms.size(); ++t) {
    for (std::size_t m = 0; m < per_month.size(); ++m) {
      auto it = per_month[m].find(table.terms[t]);
      if (it != per_month[m].end()) table.counts[t][m] = it->second;
    }
  }
  return table;
}

}  // namespace

TermFrequencyTable count_terms_serial(const MonthTexts& texts, const StopWords& stop_words,
                                      double min_total) {
  auto span = span_of(texts);
  std::vector<MonthCounts> per_month(static_cast<std::size_t>(span.size()));
  for (const auto& [month, docs] : texts) {
    count_month(docs, stop_words, per_month[static_cast<std::size_t>(months_between(span.first, month))]);
  }
  return assemble(span, per_month, min_total);
}

TermFrequencyTable count_terms_omp(const MonthTexts& texts, const StopWords& stop_words,
                                   double min_total, int threads) {
  auto span = span_of(texts);
  std::vector<MonthCounts> per_month(static_cast<std::size_t>(span.size()));
  std::vector<const std::pair<const MonthKey, std::vector<std::string>>*> items;
  items.reserve(texts.size());
  for (const auto& kv : texts) items.push_back(&kv);

  const auto n = static_cast<std::int64_t>(items.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& [month, docs] = *items[static_cast<std::size_t>(i)];
    count_month(docs, stop_words,
                per_month[static_cast<std::size_t>(months_between(span.first, month))]);
  }
  return assemble(span, per_month, min_total);
}

std::vector<std::optional<Lexicon>> rolling_lexicons_serial(const TermFrequencyTable& table,
                                                            const std::map<MonthKey, double>& yoy,
                                                            const std::vector<MonthKey>& targets,
                                                            const LexiconPolicy& policy) {
  std::vector<std::optional<Lexicon>> out;
  out.reserve(targets.size());
  for (auto m : targets) out.push_back(rolling_lexicon(table, yoy, m, policy));
  return out;
}

std::vector<std::optional<Lexicon>> rolling_lexicons_omp(const TermFrequencyTable& table,
                                                         const std::map<MonthKey, double>& yoy,
                                                         const std::vector<MonthKey>& targets,
                                                         const LexiconPolicy& policy, int threads) {
  std::vector<std::optional<Lexicon>> out(targets.size());
  const auto n = static_cast<std::int64_t>(targets.size());
  int failures = 0;
  std::string first_error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) reduction(+ : failures)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          rolling_lexicon(table, yoy, targets[static_cast<std::size_t>(i)], policy);
    } catch (const std::exception& e) {
      ++failures;
#pragma omp critical(wsi_rolling_lexicon_error)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (failures) throw Error(first_error);
  return out;
}

namespace {

std::optional<IndexPoint> aggregate_month(MonthKey month, const std::vector<ClassifiedComment>& comments,
                                          Normalization normalization) {
  auto counts = count_labels(month, comments);
  auto standard = standard_wsi(counts);
  if (!standard) return std::nullopt;
  std::vector<ClassProbabilities> triples;
  triples.reserve(comments.size());
  for (const auto& c : comments) {
    if (!c.failed && !c.probs.is_unrelated()) triples.push_back(c.probs);
  }
  auto weighted = weighted_wsi(triples, normalization);
  if (!weighted) return std::nullopt;
  return IndexPoint{month, *standard, *weighted, counts, normalization};
}

}  // namespace

IndexSeries build_series_serial(const ClassifiedByMonth& classified, Normalization normalization) {
  IndexSeries series;
  for (const auto& [month, comments] : classified) {
    if (auto p = aggregate_month(month, comments, normalization)) {
      series.points.push_back(*p);
    } else {
      series.skipped.push_back(month);
    }
  }
  return series;
}

IndexSeries build_series_omp(const ClassifiedByMonth& classified, Normalization normalization,
                             int threads) {
  std::vector<const ClassifiedByMonth::value_type*> items;
  items.reserve(classified.size());
  for (const auto& kv : classified) items.push_back(&kv);
  std::vector<std::optional<IndexPoint>> points(items.size());

  const auto n = static_cast<std::int64_t>(items.size());
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& [month, comments] = *items[static_cast<std::size_t>(i)];
    points[static_cast<std::size_t>(i)] = aggregate_month(month, comments, normalization);
  }

  IndexSeries series;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (points[i]) {
      series.points.push_back(*points[i]);
    } else {
      series.skipped.push_back(items[i]->first);
    }
  }
  return series;
}

namespace {

std::optional<std::string> infeasible(const AlignedPair& pair, int lag) {
  auto t_eff = static_cast<std::int64_t>(pair.size()) - lag;
  if (t_eff - 2 * lag - 1 < 1) {
    return fmt::format("df_den < 1 ({} observations, lag {})", pair.size(), lag);
  }
  return std::nullopt;
}

}  // namespace

GrangerSweep granger_sweep_serial(const AlignedPair& pair, int max_lag) {
  GrangerSweep sweep;
  for (int lag = 1; lag <= max_lag; ++lag) {
    if (auto why = infeasible(pair, lag)) {
      sweep.skipped.push_back({lag, *why});
      continue;
    }
    try {
      sweep.results.push_back(granger_test(pair, lag));
    } catch (const SingularDesign& e) {
      sweep.skipped.push_back({lag, e.what()});
    }
  }
  return sweep;
}

GrangerSweep granger_sweep_omp(const AlignedPair& pair, int max_lag, int threads) {
  const auto n = static_cast<std::size_t>(std::max(max_lag, 0));
  std::vector<std::optional<GrangerResult>> results(n);
  std::vector<std::string> reasons(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int lag = 1; lag <= max_lag; ++lag) {
    auto i = static_cast<std::size_t>(lag - 1);
    if (auto why = infeasible(pair, lag)) {
      reasons[i] = *why;
      continue;
    }
    try {
      results[i] = granger_test(pair, lag);
    } catch (const SingularDesign& e) {
      reasons[i] = e.what();
    }
  }
  GrangerSweep sweep;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      sweep.results.push_back(*results[i]);
    } else {
      sweep.skipped.push_back({static_cast<int>(i + 1), reasons[i]});
    }
  }
  return sweep;
}

}  // namespace wsi::kernels
