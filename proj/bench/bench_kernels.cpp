// Serial reference kernels against their OpenMP counterparts. The second
// benchmark argument is the thread count; 0 selects the serial version.

#include <benchmark/benchmark.h>

#include <random>

#include "wsi/kernels.hpp"
#include "wsi/synthetic.hpp"

using namespace wsi;

namespace {

struct Corpus {
  SyntheticData data;
  MonthTexts texts;
  TermFrequencyTable table;
  std::vector<MonthKey> months;
  ClassifiedByMonth classified;
  AlignedPair pair;

  Corpus() {
    SyntheticSpec spec;
    spec.months = 240;
    spec.comments_per_month = 300;
    data = generate_synthetic_data(spec, 42);
    for (const auto& r : data.records) texts[r.month].push_back(r.analysis_text());
    for (const auto& [m, v] : texts) months.push_back(m);
    table = kernels::count_terms_serial(texts, StopWords::english(), 10.0);
    auto mock = mock_keyword_classifier(synthetic_keyword_rules());
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      ClassifiedComment c;
      c.record_index = i;
      c.month = data.records[i].month;
      c.probs = mock->classify_one(data.records[i].analysis_text());
      c.label = hard_label(c.probs);
      classified[c.month].push_back(c);
    }
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    pair.start = MonthKey(2000, 1);
    for (int t = 0; t < 300; ++t) {
      pair.x.push_back(n(rng));
      pair.y.push_back(t > 0 ? 0.4 * pair.x[static_cast<std::size_t>(t) - 1] + n(rng) : n(rng));
    }
  }
};

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

void BM_CountTerms(benchmark::State& state) {
  const auto& c = corpus();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto t = threads == 0 ? kernels::count_terms_serial(c.texts, StopWords::english(), 10.0)
                          : kernels::count_terms_omp(c.texts, StopWords::english(), 10.0, threads);
    benchmark::DoNotOptimize(t);
  }
}

void BM_RollingLexicons(benchmark::State& state) {
  const auto& c = corpus();
  const int threads = static_cast<int>(state.range(0));
  const LexiconPolicy policy;
  for (auto _ : state) {
    auto l = threads == 0
                 ? kernels::rolling_lexicons_serial(c.table, c.data.wages.yoy(), c.months, policy)
                 : kernels::rolling_lexicons_omp(c.table, c.data.wages.yoy(), c.months, policy, threads);
    benchmark::DoNotOptimize(l);
  }
}

void BM_BuildSeries(benchmark::State& state) {
  const auto& c = corpus();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto s = threads == 0 ? kernels::build_series_serial(c.classified, Normalization::PerComment)
                          : kernels::build_series_omp(c.classified, Normalization::PerComment, threads);
    benchmark::DoNotOptimize(s);
  }
}

void BM_GrangerSweep(benchmark::State& state) {
  const auto& c = corpus();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto g = threads == 0 ? kernels::granger_sweep_serial(c.pair, 24)
                          : kernels::granger_sweep_omp(c.pair, 24, threads);
    benchmark::DoNotOptimize(g);
  }
}

}  // namespace

BENCHMARK(BM_CountTerms)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RollingLexicons)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildSeries)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GrangerSweep)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
