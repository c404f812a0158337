#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tbq/codebook.hpp"
#include "tbq/packing.hpp"
#include "tbq/qjl.hpp"
#include "tbq/rotation.hpp"

namespace tbq {

/* Serialized payload: ceil(b*d/8) index bytes + 4-byte norm. */
struct QuantizedVecMse {
  PackedCodes idx;  // b*d bits
  float norm = 0.0f;
};

/* Serialized payload: ceil((b-1)*d/8) + ceil(m/8) bytes + gamma + norm. */
struct QuantizedVecProd {
  PackedCodes idx;    // (b-1)*d bits
  PackedCodes signs;  // m bits
  float gamma = 0.0f;
  float norm = 0.0f;
};

/* MSE-optimal quantizer: rotate by a seeded random orthogonal Pi, encode
 * each coordinate of the rotated unit vector against the per-coordinate
 * codebook applied at scale 1/sqrt(d). Inputs are normalized; the original
 * norm travels as a float32 and rescales the reconstruction.
 *
 * The rotation consumes seed stream "rot" derived from the master seed.
 * All randomness is fixed at construction; the object is immutable and safe
 * for concurrent use. */
class MseQuantizer {
 public:
  MseQuantizer(int d, int b, uint64_t master_seed,
               RotationKind rk = RotationKind::DenseQr);

  int dim() const { return d_; }
  int bits() const { return b_; }
  uint64_t master_seed() const { return master_seed_; }
  const Rotation& rotation() const { return rotation_; }
  const Codebook& codebook() const { return *codebook_; }

  /* codebook centroid idx at working scale (divided by sqrt(d)). */
  double centroid_value(uint32_t idx) const;
  /* cell index of a rotated coordinate (value at working scale). */
  uint32_t encode_coord(double y) const;

 private:
  int d_, b_;
  uint64_t master_seed_;
  Rotation rotation_;
  std::shared_ptr<const Codebook> codebook_;
  double root_d_;
};

QuantizedVecMse quant_mse(const MseQuantizer& q, std::span<const double> x);
std::vector<double> dequant_mse(const MseQuantizer& q,
                                const QuantizedVecMse& c);
/* norm * <Pi y, decoded centroids>; y_rotated = Pi y, computed once per
 * query. Algebraically equal to <y, dequant_mse(c)>. */
double inner_estimate_mse(const MseQuantizer& q, const QuantizedVecMse& c,
                          std::span<const double> y_rotated);

/* Two-stage quantizer for inner products: a (b-1)-bit MSE stage plus a
 * 1-bit sign sketch of the residual r = x_hat - dequant(stage codes), taken
 * in the original (unrotated) basis. gamma = ||r||_2. The estimator is
 * unbiased: E<y, dequant(quant(x))> = <y, x>.
 *
 * The sketch consumes seed stream "qjl"; sketch width m defaults to d. */
class ProdQuantizer {
 public:
  ProdQuantizer(int d, int b, uint64_t master_seed, int m = 0,
                RotationKind rk = RotationKind::DenseQr);

  int dim() const { return d_; }
  int bits() const { return b_; }
  int width() const { return sketch_.width(); }
  uint64_t master_seed() const { return mse_.master_seed(); }
  const MseQuantizer& mse_stage() const { return mse_; }
  const QjlSketch& sketch() const { return sketch_; }

 private:
  int d_, b_;
  MseQuantizer mse_;
  QjlSketch sketch_;
};

QuantizedVecProd quant_prod(const ProdQuantizer& q, std::span<const double> x);
std::vector<double> dequant_prod(const ProdQuantizer& q,
                                 const QuantizedVecProd& c);
/* norm * (<Pi y, centroids> + sqrt(pi/2)/m * gamma * <S y, signs>);
 * y_rotated = Pi y and y_sketched = S y are computed once per query. */
double inner_estimate_prod(const ProdQuantizer& q, const QuantizedVecProd& c,
                           std::span<const double> y_rotated,
                           std::span<const double> y_sketched);

/* Batch variants over matrix columns; results match the per-vector ops. */
std::vector<QuantizedVecMse> quant_mse_batch(const MseQuantizer& q,
                                             const Eigen::MatrixXd& x);
Eigen::MatrixXd dequant_mse_batch(const MseQuantizer& q,
                                  std::span<const QuantizedVecMse> codes);
std::vector<QuantizedVecProd> quant_prod_batch(const ProdQuantizer& q,
                                               const Eigen::MatrixXd& x);
Eigen::MatrixXd dequant_prod_batch(const ProdQuantizer& q,
                                   std::span<const QuantizedVecProd> codes);

}  // namespace tbq
