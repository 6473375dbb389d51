#include "wsi/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "wsi/error.hpp"

namespace wsi {

namespace {

// std:: distributions are implementation-defined; these keep generated
// files identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<double> ar_path(Rng& rng, std::size_t n, double mean, double phi, double sigma) {
  std::vector<double> g(n);
  double stationary_sd = sigma / std::sqrt(std::max(1e-12, 1.0 - phi * phi));
  double prev = mean + stationary_sd * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    prev = mean + phi * (prev - mean) + sigma * rng.normal();
    g[i] = prev;
  }
  return g;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

enum class Kind { Increase, Decrease, Neutral, Unrelated };

std::string make_comment(Rng& rng, Kind kind, const SyntheticVocabulary& v) {
  const auto& f1 = rng.pick(v.filler);
  const auto& f2 = rng.pick(v.filler);
  const auto& f3 = rng.pick(v.filler);
  // Directional comments share their wording and differ only in the keyword.
  auto directional = [&](const std::string& kw) {
    switch (rng.below(3)) {
      case 0: return fmt::format("{} and {} were mixed, and staff saw a {} in pay.", capitalize(f1), f2, kw);
      case 1: return fmt::format("Given current {}, management announced a wage {}.", f1, kw);
      default: return fmt::format("{} shaped the month; part-timers got a {} amid {}.", capitalize(f1), kw, f2);
    }
  };
  switch (kind) {
    case Kind::Increase: return directional(rng.pick(v.increase));
    case Kind::Decrease: return directional(rng.pick(v.decrease));
    case Kind::Neutral:
      return fmt::format("{} levels are unchanged from last year while {} and {} are mixed.",
                         capitalize(rng.pick(v.neutral)), f1, f2);
    case Kind::Unrelated:
      return fmt::format("{} were affected by the {}, and {} remained flat.", capitalize(f1), f2, f3);
  }
  return {};
}

Judgment judgment_for(Rng& rng, Kind kind) {
  double u = rng.uniform();
  switch (kind) {
    case Kind::Increase: return u < 0.3 ? Judgment::Excellent : u < 0.8 ? Judgment::Good : Judgment::Unchanged;
    case Kind::Decrease: return u < 0.3 ? Judgment::Bad : u < 0.8 ? Judgment::SlightlyBad : Judgment::Unchanged;
    default:
      return u < 0.1 ? Judgment::Good : u < 0.6 ? Judgment::Unchanged : u < 0.9 ? Judgment::SlightlyBad : Judgment::Bad;
  }
}

}  // namespace

SyntheticData generate_synthetic_data(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.months < 1 || spec.comments_per_month < 0 || spec.lead < 0) {
    throw ConfigError("synthetic spec: months >= 1, comments >= 0 and lead >= 0 required");
  }
  Rng rng(seed);
  const auto horizon = static_cast<std::size_t>(spec.months + spec.lead);
  auto growth = ar_path(rng, horizon, spec.mean_growth, spec.ar_coefficient, spec.noise_scale);
  std::vector<double> driver = growth;
  if (spec.independent) {
    driver = ar_path(rng, horizon, spec.mean_growth, spec.ar_coefficient, spec.noise_scale);
  }
  const double stationary_sd =
      spec.noise_scale / std::sqrt(std::max(1e-12, 1.0 - spec.ar_coefficient * spec.ar_coefficient));

  SyntheticData data;
  std::map<MonthKey, double> levels;
  for (int i = 0; i < spec.months; ++i) {
    MonthKey m = spec.start.plus(i);
    double level;
    if (i < 12) {
      bool bonus = m.month() == 6 || m.month() == 7 || m.month() == 12;
      level = 100.0 * (bonus ? 1.0 + spec.seasonal_bonus : 1.0);
    } else {
      level = levels.at(m.minus(12)) * (1.0 + growth[static_cast<std::size_t>(i)] / 100.0);
    }
    levels.emplace(m, level);
  }
  for (std::size_t i = 0; i < horizon; ++i) {
    data.latent_growth.emplace(spec.start.plus(static_cast<std::int64_t>(i)), growth[i]);
  }
  data.wages = WageSeries::from_levels(std::move(levels));

  const auto& vocab = spec.vocabulary;
  data.records.reserve(static_cast<std::size_t>(spec.months) *
                       static_cast<std::size_t>(spec.comments_per_month));
  for (int i = 0; i < spec.months; ++i) {
    MonthKey m = spec.start.plus(i);
    double z = (driver[static_cast<std::size_t>(i + spec.lead)] - spec.mean_growth) / stationary_sd;
    double p_up = 0.5 + 0.45 * std::tanh(spec.sensitivity * z);
    for (int c = 0; c < spec.comments_per_month; ++c) {
      Kind kind;
      if (rng.uniform() >= spec.related_share) {
        kind = Kind::Unrelated;
      } else if (rng.uniform() < spec.neutral_share) {
        kind = Kind::Neutral;
      } else {
        kind = rng.uniform() < p_up ? Kind::Increase : Kind::Decrease;
      }
      SurveyRecord r;
      r.month = m;
      r.region = rng.pick(spec.regions);
      r.industry = rng.pick(spec.industries);
      r.judgment = judgment_for(rng, kind);
      r.comment = make_comment(rng, kind, vocab);
      data.records.push_back(std::move(r));
    }
  }
  return data;
}

SyntheticFiles generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                  const std::filesystem::path& dir) {
  auto data = generate_synthetic_data(spec, seed);
  std::filesystem::create_directories(dir / "survey");
  SyntheticFiles files;

  std::size_t i = 0;
  while (i < data.records.size()) {
    MonthKey m = data.records[i].month;
    std::size_t j = i;
    while (j < data.records.size() && data.records[j].month == m) ++j;
    std::vector<SurveyRecord> month_records(data.records.begin() + static_cast<std::ptrdiff_t>(i),
                                            data.records.begin() + static_cast<std::ptrdiff_t>(j));
    auto path = dir / "survey" / fmt::format("survey_{}.csv", m.to_string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    write_survey(out, month_records);
    files.survey_files.push_back(path.string());
    i = j;
  }
  auto wage_path = dir / "wages.csv";
  std::ofstream out(wage_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", wage_path.string()));
  write_wages(out, data.wages);
  files.wage_file = wage_path.string();
  return files;
}

std::vector<KeywordRule> synthetic_keyword_rules(const SyntheticVocabulary& vocabulary) {
  std::vector<KeywordRule> rules;
  rules.push_back({{vocabulary.increase.begin(), vocabulary.increase.end()}, {1.0, 0.0, 0.0}});
  rules.push_back({{vocabulary.decrease.begin(), vocabulary.decrease.end()}, {0.0, 1.0, 0.0}});
  rules.push_back({{vocabulary.neutral.begin(), vocabulary.neutral.end()}, {0.1, 0.1, 0.8}});
  return rules;
}

}  // namespace wsi
