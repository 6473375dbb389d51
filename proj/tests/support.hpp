#pragma once

// Shared helpers for the test binaries: scratch directories, file
// comparison and the independent oracles the library is checked against.
// Nothing here calls into the code under test.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace wsi::test {

namespace fs = std::filesystem;

/// Fresh directory removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "wsi-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

/// Relative path -> bytes for every regular file under `root`.
inline std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

// ---------------------------------------------------------------- oracles

/// Textbook two-pass sample correlation.
inline double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Solves (X'X) b = X'y by Gaussian elimination with partial pivoting in
/// long double. `rows` is row-major with `k` columns.
inline std::vector<double> normal_equation_ols(const std::vector<std::vector<double>>& rows,
                                               const std::vector<double>& y) {
  const std::size_t k = rows.front().size();
  std::vector<std::vector<long double>> a(k, std::vector<long double>(k + 1, 0.0L));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) a[i][j] += static_cast<long double>(rows[r][i]) * rows[r][j];
      a[i][k] += static_cast<long double>(rows[r][i]) * y[r];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = c + 1; r < k; ++r) {
      long double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<double> b(k);
  for (std::size_t c = k; c-- > 0;) {
    long double s = a[c][k];
    for (std::size_t j = c + 1; j < k; ++j) s -= a[c][j] * b[j];
    b[c] = static_cast<double>(s / a[c][c]);
  }
  return b;
}

/// P[F(d1, d2) > f] by tanh-sinh quadrature of the beta density of
/// z = d2 / (d2 + d1 f), integrating whichever tail is shorter.
inline double quadrature_f_tail(double f, double d1, double d2) {
  if (f <= 0) return 1.0;
  const double a = d2 / 2, b = d1 / 2;
  const double z = d2 / (d2 + d1 * f);
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto density = [&](double t, double one_minus_t) {
    if (t <= 0 || one_minus_t <= 0) return 0.0;
    return std::exp((a - 1) * std::log(t) + (b - 1) * std::log(one_minus_t) - log_beta);
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  if (z <= 0.5) {
    return integrator.integrate([&](double t, double tc) { return density(t, t > 0.5 ? tc : 1 - t); }, 0.0, z,
                                1e-14);
  }
  // the complementary-distance form keeps precision near t = 1
  double upper = integrator.integrate(
      [&](double t, double tc) { return density(t, (t > 0.5 && tc > 0) ? tc : 1 - t); }, z, 1.0, 1e-14);
  return 1.0 - upper;
}

/// Brute-force standard index straight from labels.
inline double brute_standard(long alpha, long beta, long gamma) {
  return 100.0 * static_cast<double>(alpha - beta) / static_cast<double>(alpha + beta + gamma);
}

}  // namespace wsi::test
