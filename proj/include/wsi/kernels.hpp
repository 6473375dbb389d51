#pragma once

// Data-parallel hot loops. Each kernel has a serial reference version and
// an OpenMP version; the two must produce identical results and are
// compared in tests/test_kernels.cpp and bench/bench_kernels.cpp. The
// public API (count_terms, rolling_lexicons, build_series, granger_sweep)
// picks one based on its `threads` argument.

#include <map>
#include <optional>
#include <vector>

#include "wsi/econometrics.hpp"
#include "wsi/index.hpp"
#include "wsi/lexicon.hpp"

namespace wsi::kernels {

TermFrequencyTable count_terms_serial(const MonthTexts& texts, const StopWords& stop_words,
                                      double min_total);
TermFrequencyTable count_terms_omp(const MonthTexts& texts, const StopWords& stop_words,
                                   double min_total, int threads);

std::vector<std::optional<Lexicon>> rolling_lexicons_serial(const TermFrequencyTable& table,
                                                            const std::map<MonthKey, double>& yoy,
                                                            const std::vector<MonthKey>& targets,
                                                            const LexiconPolicy& policy);
std::vector<std::optional<Lexicon>> rolling_lexicons_omp(const TermFrequencyTable& table,
                                                         const std::map<MonthKey, double>& yoy,
                                                         const std::vector<MonthKey>& targets,
                                                         const LexiconPolicy& policy, int threads);

IndexSeries build_series_serial(const ClassifiedByMonth& classified, Normalization normalization);
IndexSeries build_series_omp(const ClassifiedByMonth& classified, Normalization normalization,
                             int threads);

GrangerSweep granger_sweep_serial(const AlignedPair& pair, int max_lag);
GrangerSweep granger_sweep_omp(const AlignedPair& pair, int max_lag, int threads);

}  // namespace wsi::kernels
