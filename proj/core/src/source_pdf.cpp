#include "tbq/source_pdf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tbq/numeric.hpp"

namespace tbq {

namespace {

constexpr double kGaussianSupport = 12.0;

double beta_log_norm(int d) {
  return std::lgamma(0.5 * d) - std::lgamma(0.5 * (d - 1)) -
         0.5 * std::log(M_PI);
}

}  // namespace

double beta_pdf(double x, int d) {
  if (d < 2) throw std::invalid_argument("beta_pdf: d must be >= 2");
  if (std::abs(x) > 1.0) return 0.0;
  const double ex = 0.5 * (d - 3);
  const double one_minus = 1.0 - x * x;
  if (one_minus <= 0.0) {
    // |x| = 1 edge: density is 0 for d > 3, c_d for d = 3, +inf for d = 2.
    if (ex > 0.0) return 0.0;
    if (ex == 0.0) return std::exp(beta_log_norm(d));
    return HUGE_VAL;
  }
  return std::exp(beta_log_norm(d) + ex * std::log1p(-x * x));
}

SourcePdf SourcePdf::beta_sphere(int d) {
  if (d < 2) throw std::invalid_argument("SourcePdf: BetaSphere needs d >= 2");
  SourcePdf p(SourceKind::BetaSphere, d);
  p.log_norm_ = beta_log_norm(d);
  return p;
}

SourcePdf SourcePdf::std_gaussian() {
  return SourcePdf(SourceKind::StdGaussian, 0);
}

double SourcePdf::density(double x) const {
  if (kind_ == SourceKind::StdGaussian) return normal_pdf(x);
  return beta_pdf(x, d_);
}

double SourcePdf::support_min() const {
  return kind_ == SourceKind::StdGaussian ? -kGaussianSupport : -1.0;
}

double SourcePdf::support_max() const { return -support_min(); }

double SourcePdf::std_support_min() const {
  return kind_ == SourceKind::StdGaussian ? -kGaussianSupport
                                          : -std::sqrt(double(d_));
}

double SourcePdf::std_support_max() const { return -std_support_min(); }

double SourcePdf::std_density(double u) const {
  if (kind_ == SourceKind::StdGaussian) return normal_pdf(u);
  const double rd = std::sqrt(double(d_));
  return density(u / rd) / rd;
}

void SourcePdf::std_cell_moments(double lo, double hi, double& m0, double& m1,
                                 double& m2) const {
  m0 = m1 = m2 = 0.0;
  lo = std::max(lo, std_support_min());
  hi = std::min(hi, std_support_max());
  if (!(hi > lo)) return;
  const GaussLegendreRule& rule = gauss_legendre_64();
  const int n = int(rule.nodes.size());
  if (kind_ == SourceKind::StdGaussian) {
    const double c = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int i = 0; i < n; ++i) {
      const double u = mid + c * rule.nodes[i];
      const double w = c * rule.weights[i] * normal_pdf(u);
      m0 += w;
      m1 += w * u;
      m2 += w * u * u;
    }
    return;
  }
  // BetaSphere: substitute u = sqrt(d) sin(theta);
  // f_U(u) du = c_d cos(theta)^(d-2) dtheta.
  const double rd = std::sqrt(double(d_));
  const double t0 = std::asin(std::clamp(lo / rd, -1.0, 1.0));
  const double t1 = std::asin(std::clamp(hi / rd, -1.0, 1.0));
  const double c = 0.5 * (t1 - t0), mid = 0.5 * (t1 + t0);
  const double k = d_ - 2;
  for (int i = 0; i < n; ++i) {
    const double t = mid + c * rule.nodes[i];
    const double ct = std::cos(t);
    double f;
    if (ct <= 0.0) {
      f = (k == 0) ? 1.0 : 0.0;
    } else {
      f = std::exp(k * std::log(ct));
    }
    const double w = c * rule.weights[i] * std::exp(log_norm_) * f;
    const double u = rd * std::sin(t);
    m0 += w;
    m1 += w * u;
    m2 += w * u * u;
  }
}

double SourcePdf::std_cdf(double u) const {
  if (u <= std_support_min()) return 0.0;
  if (u >= std_support_max()) return 1.0;
  if (kind_ == SourceKind::StdGaussian) return normal_cdf(u);
  // Composite quadrature from the lower support edge, split for accuracy.
  const double lo = std_support_min();
  const int segments = 16;
  double acc = 0.0;
  const double step = (u - lo) / segments;
  for (int s = 0; s < segments; ++s) {
    double m0, m1, m2;
    std_cell_moments(lo + s * step, lo + (s + 1) * step, m0, m1, m2);
    acc += m0;
  }
  return std::clamp(acc, 0.0, 1.0);
}

double SourcePdf::std_quantile(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("std_quantile: p must be in (0,1)");
  if (kind_ == SourceKind::StdGaussian) return normal_quantile(p);
  double lo = std_support_min(), hi = std_support_max();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * std::max(1.0, std::abs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace tbq
