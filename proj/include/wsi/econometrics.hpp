#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsi/month.hpp"

namespace wsi {

/// Dense row-major matrix, just enough for small regressions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Sample Pearson correlation, single-pass co-moment accumulation, clamped
/// to [-1, 1]. Throws wsi::LengthError on mismatched or short input and
/// wsi::UndefinedCorrelation when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// As pearson, but nullopt instead of UndefinedCorrelation.
std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y);

struct OlsFit {
  std::vector<double> coefficients;
  double rss = 0.0;
};

/// Least squares through Householder QR with column pivoting. A pivot whose
/// remaining norm falls below 1e-10 of the column's original norm raises
/// wsi::SingularDesign naming that column.
OlsFit ols(const Matrix& design, std::span<const double> y);

inline constexpr double kRankTolerance = 1e-10;

/// Two series on the common contiguous span of their months.
struct AlignedPair {
  MonthKey start;
  std::vector<double> x;  // candidate cause (e.g. the sentiment index)
  std::vector<double> y;  // target (e.g. year-on-year wage growth)

  std::size_t size() const { return y.size(); }
  MonthRange span() const { return {start, start.plus(static_cast<std::int64_t>(y.size()) - 1)}; }

  /// Restricts both series to the months present in each. Throws wsi::Error
  /// if that intersection is not contiguous and wsi::LengthError if it has
  /// fewer than two months.
  static AlignedPair align(const std::map<MonthKey, double>& x, const std::map<MonthKey, double>& y);
};

enum class Stars { None, One, Two, Three };

/// *** p < 0.01, ** p < 0.05, * p < 0.10.
Stars stars_for(double p_value);
std::string_view to_string(Stars s);

struct GrangerResult {
  int lag = 0;
  double f_stat = 0.0;
  double p_value = 1.0;
  int df_num = 0;
  int df_den = 0;
  Stars stars = Stars::None;
  double rss_restricted = 0.0;
  double rss_unrestricted = 0.0;
  std::size_t effective_sample = 0;
};

/// F-test of H0: lags 1..lag of x add nothing to an intercept plus lags
/// 1..lag of y. Uses the `size() - lag` observations that have a full set
/// of lags. Requires T_eff >= 2*lag + 2.
GrangerResult granger_test(const AlignedPair& pair, int lag);

struct SkippedLag {
  int lag = 0;
  std::string reason;
};

struct GrangerSweep {
  std::vector<GrangerResult> results;  // ascending lag
  std::vector<SkippedLag> skipped;

  const GrangerResult* at_lag(int lag) const;
};

/// granger_test for each lag in 1..max_lag on its own effective sample.
/// Infeasible or singular lags are listed in `skipped`. `threads` > 1 runs
/// lags concurrently; results are identical either way.
GrangerSweep granger_sweep(const AlignedPair& pair, int max_lag = 24, int threads = 1);

/// I_x(a, b) by Lentz's continued fraction. `one_minus_x` lets callers pass
/// 1 - x without cancellation.
double regularized_incomplete_beta(double x, double a, double b);
double regularized_incomplete_beta(double x, double one_minus_x, double a, double b);

/// P[F(df1, df2) > f].
double f_upper_tail(double f, double df1, double df2);

}  // namespace wsi
