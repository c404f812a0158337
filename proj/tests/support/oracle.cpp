#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tbq_test {

namespace {

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

double oracle_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("oracle_normal_quantile: p outside (0,1)");
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

OracleCodebook gaussian_lloyd_oracle(int b, std::size_t n_atoms) {
  if (b < 0 || b > 8)
    throw std::invalid_argument("gaussian_lloyd_oracle: b outside [0, 8]");
  const std::size_t k = std::size_t(1) << b;
  const std::size_t n = n_atoms;

  std::vector<double> atom(n);
  for (std::size_t i = 0; i < n; ++i)
    atom[i] = oracle_normal_quantile((double(i) + 0.5) / double(n));

  /* Prefix sums over atoms (uniform weight 1/n dropped until the end). */
  std::vector<long double> p1(n + 1, 0.0L), p2(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i + 1] = p1[i] + atom[i];
    p2[i + 1] = p2[i] + (long double)atom[i] * atom[i];
  }

  /* Quantile-spaced initialization. */
  std::vector<double> c(k);
  for (std::size_t i = 0; i < k; ++i)
    c[i] = oracle_normal_quantile((2.0 * double(i) + 1.0) / (2.0 * double(k)));

  OracleCodebook out;
  std::vector<std::size_t> cut(k + 1);  /* cluster j = atoms [cut[j], cut[j+1]) */
  cut[0] = 0;
  cut[k] = n;
  const int max_iter = 1000000;
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t j = 0; j + 1 < k; ++j) {
      const double boundary = 0.5 * (c[j] + c[j + 1]);
      cut[j + 1] = std::size_t(
          std::lower_bound(atom.begin(), atom.end(), boundary) - atom.begin());
    }
    double move = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t lo = cut[j], hi = cut[j + 1];
      if (hi == lo) continue;  /* keep an empty cluster's centroid */
      const double mean = double((p1[hi] - p1[lo]) / (long double)(hi - lo));
      move = std::max(move, std::abs(mean - c[j]));
      c[j] = mean;
    }
    out.iterations = it + 1;
    if (move < 1e-12) {
      out.converged = true;
      break;
    }
  }

  long double cost = 0.0L;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t lo = cut[j], hi = cut[j + 1];
    cost += (p2[hi] - p2[lo]) - 2.0L * c[j] * (p1[hi] - p1[lo]) +
            (long double)c[j] * c[j] * (long double)(hi - lo);
  }
  out.cost = double(cost / (long double)n);
  out.centroids = std::move(c);
  return out;
}

double monte_carlo_cost(const std::vector<double>& centroids, uint64_t trials,
                        uint64_t seed) {
  if (centroids.empty())
    throw std::invalid_argument("monte_carlo_cost: empty codebook");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  long double acc = 0.0L;
  for (uint64_t t = 0; t < trials; ++t) {
    const double x = normal(gen);
    double best = (x - centroids[0]) * (x - centroids[0]);
    for (std::size_t i = 1; i < centroids.size(); ++i) {
      const double e = (x - centroids[i]) * (x - centroids[i]);
      if (e < best) best = e;
    }
    acc += best;
  }
  return double(acc / (long double)trials);
}

}  // namespace tbq_test
