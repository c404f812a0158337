#pragma once

#include <cstdint>

namespace tbq {

/* Density of one coordinate of a uniform unit vector in R^d:
 *   f(x) = Gamma(d/2) / (sqrt(pi) * Gamma((d-1)/2)) * (1 - x^2)^((d-3)/2)
 * on [-1, 1] (a scaled/shifted Beta), converging to N(0, 1/d) with d.
 * Returns 0 outside the support; rejects d < 2. */
double beta_pdf(double x, int d);

enum class SourceKind : uint8_t { BetaSphere, StdGaussian };

/* Source distribution a scalar codebook is trained against.
 *
 * Codebooks are built in the standardized (unit-variance) domain:
 * u = sqrt(d) * x for BetaSphere (exact unit variance since E[x^2] = 1/d),
 * the identity for StdGaussian. The quantizer scales by 1/sqrt(d) at use.
 *
 * Quadrature backbone: std_cell_moments() integrates {1, u, u^2} * f(u)
 * over a cell with a 64-point Gauss-Legendre rule. BetaSphere integrates in
 * the angle domain u = sqrt(d)*sin(theta), where the integrand becomes
 * c_d * cos(theta)^(d-2) — smooth for every d >= 2, including the d = 2
 * arcsine law whose density is unbounded at the support edge. The Gaussian
 * support is truncated at +/-12. */
class SourcePdf {
 public:
  static SourcePdf beta_sphere(int d);
  static SourcePdf std_gaussian();

  SourceKind kind() const { return kind_; }
  /* Sphere dimension; 0 for StdGaussian. */
  int dim() const { return d_; }

  /* Density and support in natural units. */
  double density(double x) const;
  double support_min() const;
  double support_max() const;

  /* Standardized (unit-variance) domain. */
  double std_support_min() const;
  double std_support_max() const;
  double std_density(double u) const;
  double std_cdf(double u) const;
  double std_quantile(double p) const;
  void std_cell_moments(double lo, double hi, double& m0, double& m1,
                        double& m2) const;

  bool operator==(const SourcePdf& o) const {
    return kind_ == o.kind_ && d_ == o.d_;
  }

 private:
  SourcePdf(SourceKind kind, int d) : kind_(kind), d_(d) {}

  SourceKind kind_;
  int d_;
  double log_norm_ = 0.0;  // log of the Beta normalization constant c_d
};

}  // namespace tbq
