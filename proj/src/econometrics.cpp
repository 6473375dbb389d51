#include "wsi/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "wsi/error.hpp"
#include "wsi/kernels.hpp"

namespace wsi {

namespace {

struct CoMoments {
  double cov = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
};

// Welford-style update of means and co-moments.
CoMoments co_moments(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw LengthError(fmt::format("pearson: length mismatch ({} vs {})", x.size(), y.size()));
  }
  if (x.size() < 2) throw LengthError("pearson: need at least two observations");
  double mx = 0.0, my = 0.0;
  CoMoments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double n = static_cast<double>(i + 1);
    double dx = x[i] - mx;
    double dy = y[i] - my;
    mx += dx / n;
    my += dy / n;
    m.var_x += dx * (x[i] - mx);
    m.var_y += dy * (y[i] - my);
    m.cov += dx * (y[i] - my);
  }
  return m;
}

}  // namespace

std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y) {
  auto m = co_moments(x, y);
  if (!(m.var_x > 0.0) || !(m.var_y > 0.0)) return std::nullopt;
  double r = m.cov / std::sqrt(m.var_x * m.var_y);
  return std::clamp(r, -1.0, 1.0);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  auto r = try_pearson(x, y);
  if (!r) throw UndefinedCorrelation("pearson: zero variance");
  return *r;
}

OlsFit ols(const Matrix& design, std::span<const double> y) {
  const std::size_t n = design.rows();
  const std::size_t k = design.cols();
  if (y.size() != n) throw LengthError(fmt::format("ols: {} rows but {} responses", n, y.size()));
  if (n <= k) throw LengthError(fmt::format("ols: need more rows ({}) than columns ({})", n, k));

  // column-major working copy
  std::vector<std::vector<double>> a(k, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) a[c][r] = design(r, c);
  }
  std::vector<double> qty(y.begin(), y.end());
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);

  auto tail_norm2 = [&](std::size_t c, std::size_t from) {
    double s = 0.0;
    for (std::size_t r = from; r < n; ++r) s += a[c][r] * a[c][r];
    return s;
  };
  std::vector<double> orig_norm(k), part_norm2(k);
  for (std::size_t c = 0; c < k; ++c) {
    part_norm2[c] = tail_norm2(c, 0);
    orig_norm[c] = std::sqrt(part_norm2[c]);
  }

  for (std::size_t j = 0; j < k; ++j) {
    std::size_t p = j;
    for (std::size_t c = j + 1; c < k; ++c) {
      if (part_norm2[c] > part_norm2[p]) p = c;
    }
    if (p != j) {
      std::swap(a[p], a[j]);
      std::swap(part_norm2[p], part_norm2[j]);
      std::swap(orig_norm[p], orig_norm[j]);
      std::swap(perm[p], perm[j]);
    }
    // Every remaining column is now at most as large as the pivot; the
    // first one that has collapsed relative to its own norm is dependent.
    double pivot_norm = std::sqrt(tail_norm2(j, j));
    for (std::size_t c = j; c < k; ++c) {
      double rem = c == j ? pivot_norm : std::sqrt(std::max(part_norm2[c], 0.0));
      if (orig_norm[c] == 0.0 || rem <= kRankTolerance * orig_norm[c]) {
        throw SingularDesign(
            fmt::format("ols: design is rank deficient at column {}", perm[c]), perm[c]);
      }
    }

    // Householder reflector zeroing a[j][j+1..]
    double alpha = a[j][j] > 0 ? -pivot_norm : pivot_norm;
    std::vector<double> v(a[j].begin() + static_cast<std::ptrdiff_t>(j), a[j].end());
    v[0] -= alpha;
    double vnorm2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    if (vnorm2 > 0.0) {
      auto reflect = [&](std::vector<double>& col) {
        double d = 0.0;
        for (std::size_t r = j; r < n; ++r) d += v[r - j] * col[r];
        double s = 2.0 * d / vnorm2;
        for (std::size_t r = j; r < n; ++r) col[r] -= s * v[r - j];
      };
      for (std::size_t c = j + 1; c < k; ++c) reflect(a[c]);
      reflect(qty);
    }
    a[j][j] = alpha;
    for (std::size_t r = j + 1; r < n; ++r) a[j][r] = 0.0;

    for (std::size_t c = j + 1; c < k; ++c) {
      part_norm2[c] -= a[c][j] * a[c][j];
      // recompute when downdating has lost most of its digits
      if (part_norm2[c] < 1e-8 * orig_norm[c] * orig_norm[c]) part_norm2[c] = tail_norm2(c, j + 1);
    }
  }

  // back substitution on R (stored in a[c][r], r <= c)
  std::vector<double> b(k);
  for (std::size_t jj = k; jj-- > 0;) {
    double s = qty[jj];
    for (std::size_t c = jj + 1; c < k; ++c) s -= a[c][jj] * b[c];
    b[jj] = s / a[jj][jj];
  }

  OlsFit fit;
  fit.coefficients.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) fit.coefficients[perm[j]] = b[j];
  double rss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double pred = 0.0;
    for (std::size_t c = 0; c < k; ++c) pred += design(r, c) * fit.coefficients[c];
    double e = y[r] - pred;
    rss += e * e;
  }
  fit.rss = rss;
  return fit;
}

AlignedPair AlignedPair::align(const std::map<MonthKey, double>& x,
                               const std::map<MonthKey, double>& y) {
  AlignedPair pair;
  std::optional<MonthKey> prev;
  for (const auto& [m, yv] : y) {
    auto it = x.find(m);
    if (it == x.end()) continue;
    if (prev && m != prev->next()) {
      throw Error(fmt::format("aligned series not contiguous: {} missing", prev->next().to_string()));
    }
    if (!prev) pair.start = m;
    pair.x.push_back(it->second);
    pair.y.push_back(yv);
    prev = m;
  }
  if (pair.y.size() < 2) throw LengthError("aligned series shorter than two months");
  return pair;
}

Stars stars_for(double p) {
  if (p < 0.01) return Stars::Three;
  if (p < 0.05) return Stars::Two;
  if (p < 0.10) return Stars::One;
  return Stars::None;
}

std::string_view to_string(Stars s) {
  switch (s) {
    case Stars::None: return "";
    case Stars::One: return "*";
    case Stars::Two: return "**";
    case Stars::Three: return "***";
  }
  return "";
}

GrangerResult granger_test(const AlignedPair& pair, int lag) {
  if (lag < 1) throw LengthError("granger_test: lag must be >= 1");
  const auto total = static_cast<std::int64_t>(pair.size());
  const std::int64_t t_eff = total - lag;
  if (t_eff < 2 * static_cast<std::int64_t>(lag) + 2) {
    throw LengthError(fmt::format("granger_test: {} observations too few for lag {}", total, lag));
  }
  const auto rows = static_cast<std::size_t>(t_eff);
  const auto L = static_cast<std::size_t>(lag);

  Matrix restricted(rows, 1 + L);
  Matrix unrestricted(rows, 1 + 2 * L);
  std::vector<double> target(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t t = r + L;
    target[r] = pair.y[t];
    restricted(r, 0) = 1.0;
    unrestricted(r, 0) = 1.0;
    for (std::size_t j = 1; j <= L; ++j) {
      restricted(r, j) = pair.y[t - j];
      unrestricted(r, j) = pair.y[t - j];
      unrestricted(r, L + j) = pair.x[t - j];
    }
  }

  OlsFit fit_r, fit_u;
  try {
    fit_r = ols(restricted, target);
    fit_u = ols(unrestricted, target);
  } catch (const SingularDesign& e) {
    throw SingularDesign(fmt::format("granger_test lag {}: {}", lag, e.what()), e.column());
  }

  GrangerResult res;
  res.lag = lag;
  res.df_num = lag;
  res.df_den = static_cast<int>(t_eff - 2 * lag - 1);
  res.effective_sample = rows;
  res.rss_restricted = fit_r.rss;
  // the restricted model is nested, so RSS_u <= RSS_r up to rounding
  res.rss_unrestricted = std::min(fit_u.rss, fit_r.rss);
  double gain = res.rss_restricted - res.rss_unrestricted;
  if (res.rss_unrestricted <= 0.0) {
    res.f_stat = gain > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    res.f_stat = (gain / res.df_num) / (res.rss_unrestricted / res.df_den);
  }
  res.p_value = f_upper_tail(res.f_stat, res.df_num, res.df_den);
  res.stars = stars_for(res.p_value);
  return res;
}

const GrangerResult* GrangerSweep::at_lag(int lag) const {
  for (const auto& r : results) {
    if (r.lag == lag) return &r;
  }
  return nullptr;
}

GrangerSweep granger_sweep(const AlignedPair& pair, int max_lag, int threads) {
  return threads > 1 ? kernels::granger_sweep_omp(pair, max_lag, threads)
                     : kernels::granger_sweep_serial(pair, max_lag);
}

namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_cf(double x, double a, double b) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double one_minus_x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                     b * std::log(one_minus_x);
  double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(one_minus_x, b, a) / b;
}

double regularized_incomplete_beta(double x, double a, double b) {
  return regularized_incomplete_beta(x, 1.0 - x, a, b);
}

double f_upper_tail(double f, double df1, double df2) {
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  double denom = df2 + df1 * f;
  double x = df2 / denom;
  double one_minus_x = df1 * f / denom;
  return std::clamp(regularized_incomplete_beta(x, one_minus_x, df2 / 2.0, df1 / 2.0), 0.0, 1.0);
}

}  // namespace wsi
