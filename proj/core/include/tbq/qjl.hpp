#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "tbq/packing.hpp"

namespace tbq {

/* 1-bit sign sketch of a vector: signs of S.r plus gamma = ||r||_2.
 * Sign bits are packed 8 per byte, LSB-first; bit 1 means +1.
 * sign(0) is +1 by convention. */
struct QjlCode {
  PackedCodes signs;  // m bits
  float gamma = 0.0f;
};

/* m x d matrix of i.i.d. standard Gaussians, deterministic given
 * (seed, d, m). Entries are stored in single precision; products against it
 * accumulate in double (a widened mirror is kept for that). Inner products
 * estimated from the sketch are unbiased after rescaling by
 * sqrt(pi/2)/m * gamma. */
class QjlSketch {
 public:
  QjlSketch(uint64_t seed, int d, int m);

  int dim() const { return d_; }
  int width() const { return m_; }
  uint64_t seed() const { return seed_; }

  const Eigen::MatrixXf& matrix() const { return s_; }
  /* Same values widened to double; use for accumulation. */
  const Eigen::MatrixXd& matrix_f64() const { return s64_; }

  /* sqrt(pi/2)/m, the dequantization scale (before gamma). */
  double scale() const;

 private:
  uint64_t seed_;
  int d_, m_;
  Eigen::MatrixXf s_;
  Eigen::MatrixXd s64_;
};

QjlCode qjl_quantize(const QjlSketch& sk, std::span<const double> r);

/* (sqrt(pi/2)/m) * gamma * S^T * signs */
std::vector<double> qjl_dequantize(const QjlSketch& sk, const QjlCode& code);

/* (sqrt(pi/2)/m) * gamma * <S y, signs>, without materializing the decoded
 * vector; algebraically equal to <y, qjl_dequantize(code)>. */
double qjl_inner_estimate(const QjlSketch& sk, const QjlCode& code,
                          std::span<const double> y);

/* Same, with S.y already computed (query-side reuse). */
double qjl_inner_estimate_presketched(const QjlCode& code,
                                      std::span<const double> sy,
                                      double scale);

}  // namespace tbq
