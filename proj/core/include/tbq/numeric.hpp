#pragma once

#include <vector>

namespace tbq {

/* Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
 * Exact for polynomials up to degree 2n-1. */
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendreRule make_gauss_legendre(int n);

/* The 64-point rule used by the codebook quadrature, computed once. */
const GaussLegendreRule& gauss_legendre_64();

/* Standard normal density, CDF and quantile (double accuracy ~1e-15). */
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace tbq
