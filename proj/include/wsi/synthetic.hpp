#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wsi/classify.hpp"
#include "wsi/corpus.hpp"

namespace wsi {

struct SyntheticVocabulary {
  std::vector<std::string> increase{"raise", "bonus", "hike", "increase", "uplift", "boost"};
  std::vector<std::string> decrease{"cut", "reduction", "decrease", "freeze", "layoff", "slash"};
  /// Wage-related but directionless.
  std::vector<std::string> neutral{"payroll", "salary", "compensation"};
  std::vector<std::string> filler{"customers", "sales", "weather", "traffic", "store", "visitors",
                                  "demand", "orders", "tourism", "holiday", "inventory", "shoppers",
                                  "restaurant", "hotel", "factory", "shipments", "prices", "season"};
};

/// Generator parameters. Wage growth follows an AR(1) in year-on-year
/// percent; levels repeat a seasonal shape (bonus months June, July and
/// December) scaled by that growth. Comment sentiment at month m tracks
/// growth at month m + lead.
struct SyntheticSpec {
  int months = 300;
  MonthKey start{2000, 1};
  int comments_per_month = 1000;
  double ar_coefficient = 0.9;
  double noise_scale = 0.4;          // innovation s.d. of yoy growth (%)
  double mean_growth = 0.5;          // long-run yoy growth (%)
  double seasonal_bonus = 0.15;      // relative level bump in bonus months
  int lead = 2;
  double sensitivity = 1.5;          // how sharply sentiment follows growth
  double related_share = 0.6;        // share of comments about wages
  double neutral_share = 0.2;        // share of related comments without direction
  /// Draw sentiment from an independent AR process instead of wages.
  bool independent = false;
  SyntheticVocabulary vocabulary{};
  std::vector<std::string> regions{"Hokkaido", "Tohoku", "Kita-Kanto", "Minami-Kanto", "Tokai",
                                   "Hokuriku", "Kinki", "Chugoku", "Shikoku", "Kyushu", "Okinawa"};
  std::vector<std::string> industries{"Retail", "Food service", "Manufacturing", "Services",
                                      "Construction", "Transport", "Employment agency"};
};

struct SyntheticData {
  std::vector<SurveyRecord> records;  // ascending month
  WageSeries wages;
  /// Latent yoy growth per month (covers months + lead).
  std::map<MonthKey, double> latent_growth;
};

/// Pure function of (spec, seed).
SyntheticData generate_synthetic_data(const SyntheticSpec& spec, std::uint64_t seed);

struct SyntheticFiles {
  std::vector<std::string> survey_files;  // one per month
  std::string wage_file;
};

/// Writes `survey/survey_YYYYMM.csv` per month and `wages.csv` under `dir` in the
/// canonical CSV formats. Same seed -> byte-identical files.
SyntheticFiles generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                  const std::filesystem::path& dir);

/// Keyword rules matching the vocabulary: increase words -> (1,0,0),
/// decrease words -> (0,1,0), neutral words -> (0.1,0.1,0.8).
std::vector<KeywordRule> synthetic_keyword_rules(const SyntheticVocabulary& vocabulary = {});

}  // namespace wsi
