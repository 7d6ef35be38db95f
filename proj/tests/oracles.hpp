#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's numeric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "protost/dataio.hpp"

namespace oracle {

inline std::vector<double> softmax(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

/// Row-wise softmax of an h*w*c logit array as a ProbMap.
inline protost::ProbMap prob_map(std::uint32_t h, std::uint32_t w, std::uint32_t c, const std::vector<double>& logits) {
  protost::ProbMap pm(h, w, c);
  for (std::size_t i = 0; i < pm.pixels(); ++i) {
    std::vector<double> z(logits.begin() + long(i * c), logits.begin() + long((i + 1) * c));
    auto p = softmax(z);
    std::copy(p.begin(), p.end(), pm.probs.begin() + long(i * c));
  }
  return pm;
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double x0 = x[i];
    x[i] = x0 + h;
    double fp = f(x);
    x[i] = x0 - h;
    double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Max over entries of |a-b| / max(|a|, |b|, floor).
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
  return worst;
}

/// Direct (non-log-space) diagonal Gaussian mixture density in long double.
struct LdComponent {
  long double weight;
  std::vector<long double> mean, var;
};
inline long double mixture_log_density(const std::vector<LdComponent>& comps, const std::vector<long double>& x) {
  const long double two_pi = 6.283185307179586476925286766559L;
  long double total = 0.0L;
  for (const auto& c : comps) {
    long double q = 0.0L, det = 1.0L;
    for (std::size_t k = 0; k < x.size(); ++k) {
      q += (x[k] - c.mean[k]) * (x[k] - c.mean[k]) / c.var[k];
      det *= two_pi * c.var[k];
    }
    total += c.weight * std::exp(-0.5L * q) / std::sqrt(det);
  }
  return std::log(total);
}

/// Best permutation by brute force: perm[i] is the estimate matched to truth i.
inline std::vector<std::size_t> best_matching(std::size_t n, const std::function<double(std::size_t, std::size_t)>& cost) {
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost(i, perm[i]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("protost_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

/// Every regular file under `root`, relative path -> bytes.
inline std::vector<std::pair<std::string, std::string>> tree_bytes(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.emplace_back(std::filesystem::relative(e.path(), root).string(), read_bytes(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
