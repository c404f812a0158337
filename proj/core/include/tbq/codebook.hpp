#pragma once

#include <string>
#include <vector>

#include "tbq/source_pdf.hpp"

namespace tbq {

/* Optimal scalar quantizer for a unit-variance source: 2^b reconstruction
 * levels (centroids) with midpoint cell boundaries, solved by Lloyd-Max
 * fixed-point iteration (continuous 1-D k-means). Standardized: the
 * quantizer applies centroids at scale 1/sqrt(d). */
struct Codebook {
  int b = 0;                       // bit-width, 0..8
  std::vector<double> centroids;   // 2^b, strictly ascending
  std::vector<double> boundaries;  // 2^b - 1 midpoints
  double cost = 0.0;               // E[(u - q(u))^2] against source
  SourcePdf source = SourcePdf::std_gaussian();
  bool standardized = true;  // centroids are for the unit-variance source
  bool converged = true;
  int iterations = 0;
  std::vector<double> cost_history;  // Lloyd objective per iteration
};

/* Lloyd-Max solve. Initial centroids sit at the (2i+1)/2^(b+1) quantiles;
 * iteration stops when the max centroid movement drops below tol or
 * max_iter is exhausted (then converged=false, best iterate returned). */
Codebook build_codebook(const SourcePdf& pdf, int b, double tol = 1e-10,
                        int max_iter = 10000);

/* Expected squared error of cb against pdf, by per-cell quadrature. */
double codebook_cost(const Codebook& cb, const SourcePdf& pdf);

/* High-resolution distortion formula for a unit-variance Gaussian source:
 * (sqrt(3) * pi / 2) * 4^-b. Upper-bounds the optimal cost for b >= 2. */
double panter_dite_bound(int b);

/* Nearest-centroid cell index via binary search over boundaries;
 * a value exactly on a boundary resolves to the lower index. */
int encode_scalar(const Codebook& cb, double x);

/* centroids[idx]; rejects out-of-range indices. */
double decode_scalar(const Codebook& cb, int idx);

/* JSON cache: {version, source, d_or_gaussian, b, centroids[], cost}. */
void save_codebook_cache(const Codebook& cb, const std::string& path);
Codebook load_codebook_cache(const std::string& path);

/* Gaussian codebooks for b in [0, 8], built once per process. */
const Codebook& cached_gaussian_codebook(int b);

}  // namespace tbq
