#include "tbq/codebook.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tbq {

namespace {

constexpr int kMaxBits = 8;
constexpr int kCacheFormatVersion = 1;

std::vector<double> midpoints(const std::vector<double>& c) {
  std::vector<double> m(c.size() > 0 ? c.size() - 1 : 0);
  for (size_t i = 0; i + 1 < c.size(); ++i) m[i] = 0.5 * (c[i] + c[i + 1]);
  return m;
}

/* Lloyd objective of `centroids` and, in the same quadrature pass, the
 * conditional cell means that form the next iterate. */
double lloyd_pass(const SourcePdf& pdf, const std::vector<double>& centroids,
                  std::vector<double>& next) {
  const size_t k = centroids.size();
  next.resize(k);
  const double lo_support = pdf.std_support_min();
  const double hi_support = pdf.std_support_max();
  double cost = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const double lo =
        (i == 0) ? lo_support : 0.5 * (centroids[i - 1] + centroids[i]);
    const double hi =
        (i + 1 == k) ? hi_support : 0.5 * (centroids[i] + centroids[i + 1]);
    double m0, m1, m2;
    pdf.std_cell_moments(lo, hi, m0, m1, m2);
    const double c = centroids[i];
    cost += m2 - 2.0 * c * m1 + c * c * m0;
    next[i] = (m0 > 0.0) ? m1 / m0 : c;
  }
  return cost;
}

}  // namespace

Codebook build_codebook(const SourcePdf& pdf, int b, double tol,
                        int max_iter) {
  if (b < 0 || b > kMaxBits)
    throw std::invalid_argument("build_codebook: b must be in [0, 8]");
  if (!(tol > 0.0)) throw std::invalid_argument("build_codebook: tol <= 0");

  Codebook cb;
  cb.b = b;
  cb.source = pdf;
  cb.standardized = true;

  const int k = 1 << b;
  if (b == 0) {
    // Single centroid at the (symmetric) mean; cost = source variance = 1.
    cb.centroids = {0.0};
    double m0, m1, m2;
    pdf.std_cell_moments(pdf.std_support_min(), pdf.std_support_max(), m0, m1,
                         m2);
    cb.cost = m2;
    cb.cost_history = {cb.cost};
    return cb;
  }

  std::vector<double> c(k);
  for (int i = 0; i < k; ++i)
    c[i] = pdf.std_quantile((2.0 * i + 1.0) / (2.0 * k));

  std::vector<double> next;
  bool converged = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    const double cost = lloyd_pass(pdf, c, next);
    cb.cost_history.push_back(cost);
    double move = 0.0;
    for (int i = 0; i < k; ++i) move = std::max(move, std::abs(next[i] - c[i]));
    c.swap(next);
    if (move < tol) {
      converged = true;
      ++it;
      break;
    }
  }
  cb.centroids = std::move(c);
  cb.converged = converged;
  cb.iterations = it;
  cb.boundaries = midpoints(cb.centroids);
  cb.cost = codebook_cost(cb, pdf);
  return cb;
}

double codebook_cost(const Codebook& cb, const SourcePdf& pdf) {
  if (cb.centroids.empty())
    throw std::invalid_argument("codebook_cost: empty codebook");
  std::vector<double> next;
  return lloyd_pass(pdf, cb.centroids, next);
}

double panter_dite_bound(int b) {
  if (b < 0) throw std::invalid_argument("panter_dite_bound: b < 0");
  return 0.5 * std::sqrt(3.0) * M_PI * std::pow(4.0, -b);
}

int encode_scalar(const Codebook& cb, double x) {
  // lower_bound: first boundary >= x. A value exactly on boundary[i]
  // therefore lands in cell i, the lower index.
  const auto it =
      std::lower_bound(cb.boundaries.begin(), cb.boundaries.end(), x);
  return int(it - cb.boundaries.begin());
}

double decode_scalar(const Codebook& cb, int idx) {
  if (idx < 0 || size_t(idx) >= cb.centroids.size())
    throw std::out_of_range("decode_scalar: index out of range");
  return cb.centroids[idx];
}

void save_codebook_cache(const Codebook& cb, const std::string& path) {
  nlohmann::json j;
  j["version"] = kCacheFormatVersion;
  j["source"] =
      cb.source.kind() == SourceKind::StdGaussian ? "gaussian" : "beta_sphere";
  j["d_or_gaussian"] = cb.source.dim();
  j["b"] = cb.b;
  j["centroids"] = cb.centroids;
  j["cost"] = cb.cost;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_codebook_cache: cannot open " + path);
  out << j.dump(2) << "\n";
}

Codebook load_codebook_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_codebook_cache: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != kCacheFormatVersion)
    throw std::runtime_error("load_codebook_cache: unsupported cache version");
  Codebook cb;
  const std::string source = j.at("source").get<std::string>();
  const int d = j.at("d_or_gaussian").get<int>();
  cb.source = (source == "gaussian") ? SourcePdf::std_gaussian()
                                     : SourcePdf::beta_sphere(d);
  cb.b = j.at("b").get<int>();
  cb.centroids = j.at("centroids").get<std::vector<double>>();
  cb.cost = j.at("cost").get<double>();
  if (cb.centroids.size() != size_t(1) << cb.b)
    throw std::runtime_error("load_codebook_cache: centroid count mismatch");
  cb.boundaries = midpoints(cb.centroids);
  cb.standardized = true;
  return cb;
}

const Codebook& cached_gaussian_codebook(int b) {
  if (b < 0 || b > kMaxBits)
    throw std::invalid_argument("cached_gaussian_codebook: b must be in [0,8]");
  static std::array<Codebook, kMaxBits + 1> cache;
  static std::array<std::once_flag, kMaxBits + 1> flags;
  std::call_once(flags[b], [b] {
    cache[b] = build_codebook(SourcePdf::std_gaussian(), b);
  });
  return cache[b];
}

}  // namespace tbq
