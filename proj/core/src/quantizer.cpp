#include "tbq/quantizer.hpp"

#include <cmath>
#include <stdexcept>

#include "tbq/rng.hpp"

namespace tbq {

namespace {

/* Codebooks are trained on the exact sphere-coordinate law below this
 * dimension and on its Gaussian limit at or above it. */
constexpr int kGaussianCodebookMinDim = 256;

void check_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v))
      throw std::invalid_argument("quantizer: NaN/Inf coordinate rejected");
}

Eigen::VectorXd to_vec(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
}

Rotation make_rotation(uint64_t master_seed, int d, RotationKind rk) {
  const uint64_t seed = derive_seed(master_seed, "rot");
  return rk == RotationKind::DenseQr ? generate_rotation(seed, d)
                                     : generate_fast_rotation(seed, d);
}

}  // namespace

MseQuantizer::MseQuantizer(int d, int b, uint64_t master_seed, RotationKind rk)
    : d_(d),
      b_(b),
      master_seed_(master_seed),
      rotation_(make_rotation(master_seed, d, rk)),
      root_d_(std::sqrt(double(d))) {
  if (d < 1) throw std::invalid_argument("MseQuantizer: d must be >= 1");
  if (b < 0 || b > 8)
    throw std::invalid_argument("MseQuantizer: b must be in [0, 8]");
  if (d < kGaussianCodebookMinDim && d >= 2) {
    codebook_ = std::make_shared<Codebook>(
        build_codebook(SourcePdf::beta_sphere(d), b));
  } else {
    // Static lifetime; aliasing constructor keeps the pointer non-owning.
    codebook_ = std::shared_ptr<const Codebook>(std::shared_ptr<void>(),
                                                &cached_gaussian_codebook(b));
  }
}

double MseQuantizer::centroid_value(uint32_t idx) const {
  return codebook_->centroids[idx] / root_d_;
}

uint32_t MseQuantizer::encode_coord(double y) const {
  return uint32_t(encode_scalar(*codebook_, y * root_d_));
}

QuantizedVecMse quant_mse(const MseQuantizer& q, std::span<const double> x) {
  if (x.size() != size_t(q.dim()))
    throw std::invalid_argument("quant_mse: dimension mismatch");
  check_finite(x);
  const Eigen::VectorXd xv = to_vec(x);
  const double norm = xv.norm();
  Eigen::VectorXd y;
  if (norm > 0.0) {
    y = q.rotation().apply(Eigen::VectorXd(xv / norm));
  } else {
    y = Eigen::VectorXd::Zero(q.dim());
  }
  std::vector<uint32_t> idx(q.dim());
  for (int j = 0; j < q.dim(); ++j) idx[j] = q.encode_coord(y[j]);
  QuantizedVecMse code;
  code.idx = pack_indices(idx, q.bits());
  code.norm = float(norm);
  return code;
}

std::vector<double> dequant_mse(const MseQuantizer& q,
                                const QuantizedVecMse& c) {
  if (c.idx.b != q.bits() || c.idx.count != size_t(q.dim()))
    throw std::invalid_argument("dequant_mse: code/quantizer mismatch");
  std::vector<double> out(q.dim(), 0.0);
  if (c.norm == 0.0f) return out;
  Eigen::VectorXd yhat(q.dim());
  for (int j = 0; j < q.dim(); ++j)
    yhat[j] = q.centroid_value(packed_code_at(c.idx.bytes, c.idx.b, j));
  Eigen::Map<Eigen::VectorXd>(out.data(), q.dim()) =
      q.rotation().apply_transpose(yhat) * double(c.norm);
  return out;
}

double inner_estimate_mse(const MseQuantizer& q, const QuantizedVecMse& c,
                          std::span<const double> y_rotated) {
  if (c.idx.b != q.bits() || c.idx.count != size_t(q.dim()))
    throw std::invalid_argument("inner_estimate_mse: code/quantizer mismatch");
  if (y_rotated.size() != size_t(q.dim()))
    throw std::invalid_argument("inner_estimate_mse: dimension mismatch");
  if (c.norm == 0.0f) return 0.0;
  double acc = 0.0;
  for (int j = 0; j < q.dim(); ++j)
    acc += y_rotated[j] *
           q.centroid_value(packed_code_at(c.idx.bytes, c.idx.b, j));
  return acc * double(c.norm);
}

namespace {

int checked_prod_bits(int b) {
  if (b < 1 || b > 8)
    throw std::invalid_argument("ProdQuantizer: b must be in [1, 8]");
  return b;
}

}  // namespace

ProdQuantizer::ProdQuantizer(int d, int b, uint64_t master_seed, int m,
                             RotationKind rk)
    : d_(d),
      b_(checked_prod_bits(b)),
      mse_(d, b - 1, master_seed, rk),
      sketch_(derive_seed(master_seed, "qjl"), d, m > 0 ? m : d) {}

QuantizedVecProd quant_prod(const ProdQuantizer& q, std::span<const double> x) {
  if (x.size() != size_t(q.dim()))
    throw std::invalid_argument("quant_prod: dimension mismatch");
  check_finite(x);
  const MseQuantizer& stage = q.mse_stage();
  const Eigen::VectorXd xv = to_vec(x);
  const double norm = xv.norm();
  QuantizedVecProd code;
  code.norm = float(norm);
  Eigen::VectorXd xhat =
      norm > 0.0 ? Eigen::VectorXd(xv / norm) : Eigen::VectorXd::Zero(q.dim());
  const Eigen::VectorXd y = stage.rotation().apply(xhat);
  std::vector<uint32_t> idx(q.dim());
  Eigen::VectorXd yhat(q.dim());
  for (int j = 0; j < q.dim(); ++j) {
    idx[j] = stage.encode_coord(y[j]);
    yhat[j] = stage.centroid_value(idx[j]);
  }
  code.idx = pack_indices(idx, stage.bits());
  // Residual in the original (unrotated) basis.
  const Eigen::VectorXd r = xhat - stage.rotation().apply_transpose(yhat);
  QjlCode qjl =
      qjl_quantize(q.sketch(), std::span<const double>(r.data(), r.size()));
  code.signs = std::move(qjl.signs);
  code.gamma = norm > 0.0 ? qjl.gamma : 0.0f;
  return code;
}

namespace {

void check_prod_code(const ProdQuantizer& q, const QuantizedVecProd& c) {
  if (c.idx.b != q.bits() - 1 || c.idx.count != size_t(q.dim()) ||
      c.signs.b != 1 || c.signs.count != size_t(q.width()))
    throw std::invalid_argument("prod code/quantizer mismatch");
}

}  // namespace

std::vector<double> dequant_prod(const ProdQuantizer& q,
                                 const QuantizedVecProd& c) {
  check_prod_code(q, c);
  std::vector<double> out(q.dim(), 0.0);
  if (c.norm == 0.0f) return out;
  const MseQuantizer& stage = q.mse_stage();
  Eigen::VectorXd yhat(q.dim());
  for (int j = 0; j < q.dim(); ++j)
    yhat[j] = stage.centroid_value(packed_code_at(c.idx.bytes, c.idx.b, j));
  Eigen::VectorXd xt = stage.rotation().apply_transpose(yhat);
  if (c.gamma > 0.0f) {
    Eigen::VectorXd z(q.width());
    for (int i = 0; i < q.width(); ++i)
      z[i] = packed_code_at(c.signs.bytes, 1, i) ? 1.0 : -1.0;
    xt += q.sketch().matrix_f64().transpose() * z *
          (q.sketch().scale() * double(c.gamma));
  }
  Eigen::Map<Eigen::VectorXd>(out.data(), q.dim()) = xt * double(c.norm);
  return out;
}

double inner_estimate_prod(const ProdQuantizer& q, const QuantizedVecProd& c,
                           std::span<const double> y_rotated,
                           std::span<const double> y_sketched) {
  check_prod_code(q, c);
  if (y_rotated.size() != size_t(q.dim()) ||
      y_sketched.size() != size_t(q.width()))
    throw std::invalid_argument("inner_estimate_prod: dimension mismatch");
  if (c.norm == 0.0f) return 0.0;
  const MseQuantizer& stage = q.mse_stage();
  double acc = 0.0;
  for (int j = 0; j < q.dim(); ++j)
    acc += y_rotated[j] *
           stage.centroid_value(packed_code_at(c.idx.bytes, c.idx.b, j));
  double qjl_part = 0.0;
  if (c.gamma > 0.0f) {
    double s = 0.0;
    for (int i = 0; i < q.width(); ++i)
      s += packed_code_at(c.signs.bytes, 1, i) ? y_sketched[i]
                                               : -y_sketched[i];
    qjl_part = q.sketch().scale() * double(c.gamma) * s;
  }
  return (acc + qjl_part) * double(c.norm);
}

/* ---------------- batch variants ---------------- */

std::vector<QuantizedVecMse> quant_mse_batch(const MseQuantizer& q,
                                             const Eigen::MatrixXd& x) {
  if (x.rows() != q.dim())
    throw std::invalid_argument("quant_mse_batch: dimension mismatch");
  const Eigen::Index n = x.cols();
  Eigen::VectorXd norms(n);
  Eigen::MatrixXd xhat(x.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    check_finite(std::span<const double>(x.col(c).data(), size_t(x.rows())));
    const double nm = x.col(c).norm();
    norms[c] = nm;
    xhat.col(c) = nm > 0.0 ? (x.col(c) / nm).eval()
                           : Eigen::VectorXd::Zero(x.rows()).eval();
  }
  const Eigen::MatrixXd y = q.rotation().apply_cols(xhat);
  std::vector<QuantizedVecMse> codes(static_cast<size_t>(n));
  std::vector<uint32_t> idx(size_t(q.dim()));
  for (Eigen::Index c = 0; c < n; ++c) {
    for (int j = 0; j < q.dim(); ++j) idx[size_t(j)] = q.encode_coord(y(j, c));
    codes[size_t(c)].idx = pack_indices(idx, q.bits());
    codes[size_t(c)].norm = float(norms[c]);
  }
  return codes;
}

Eigen::MatrixXd dequant_mse_batch(const MseQuantizer& q,
                                  std::span<const QuantizedVecMse> codes) {
  const Eigen::Index n = Eigen::Index(codes.size());
  Eigen::MatrixXd yhat(q.dim(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const QuantizedVecMse& code = codes[size_t(c)];
    if (code.idx.b != q.bits() || code.idx.count != size_t(q.dim()))
      throw std::invalid_argument("dequant_mse_batch: code mismatch");
    for (int j = 0; j < q.dim(); ++j)
      yhat(j, c) =
          q.centroid_value(packed_code_at(code.idx.bytes, code.idx.b, j));
  }
  Eigen::MatrixXd out = q.rotation().apply_transpose_cols(yhat);
  for (Eigen::Index c = 0; c < n; ++c)
    out.col(c) *= double(codes[size_t(c)].norm);
  return out;
}

std::vector<QuantizedVecProd> quant_prod_batch(const ProdQuantizer& q,
                                               const Eigen::MatrixXd& x) {
  if (x.rows() != q.dim())
    throw std::invalid_argument("quant_prod_batch: dimension mismatch");
  const MseQuantizer& stage = q.mse_stage();
  const Eigen::Index n = x.cols();
  Eigen::VectorXd norms(n);
  Eigen::MatrixXd xhat(x.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    check_finite(std::span<const double>(x.col(c).data(), size_t(x.rows())));
    const double nm = x.col(c).norm();
    norms[c] = nm;
    xhat.col(c) = nm > 0.0 ? (x.col(c) / nm).eval()
                           : Eigen::VectorXd::Zero(x.rows()).eval();
  }
  const Eigen::MatrixXd y = stage.rotation().apply_cols(xhat);
  Eigen::MatrixXd yhat(q.dim(), n);
  std::vector<QuantizedVecProd> codes(static_cast<size_t>(n));
  std::vector<uint32_t> idx(size_t(q.dim()));
  for (Eigen::Index c = 0; c < n; ++c) {
    for (int j = 0; j < q.dim(); ++j) {
      idx[size_t(j)] = stage.encode_coord(y(j, c));
      yhat(j, c) = stage.centroid_value(idx[size_t(j)]);
    }
    codes[size_t(c)].idx = pack_indices(idx, stage.bits());
    codes[size_t(c)].norm = float(norms[c]);
  }
  const Eigen::MatrixXd resid =
      xhat - stage.rotation().apply_transpose_cols(yhat);
  const Eigen::MatrixXd proj = q.sketch().matrix_f64() * resid;
  std::vector<uint32_t> bits(size_t(q.width()));
  for (Eigen::Index c = 0; c < n; ++c) {
    for (int i = 0; i < q.width(); ++i)
      bits[size_t(i)] = proj(i, c) >= 0.0 ? 1u : 0u;
    codes[size_t(c)].signs = pack_indices(bits, 1);
    codes[size_t(c)].gamma =
        norms[c] > 0.0 ? float(resid.col(c).norm()) : 0.0f;
  }
  return codes;
}

Eigen::MatrixXd dequant_prod_batch(const ProdQuantizer& q,
                                   std::span<const QuantizedVecProd> codes) {
  const MseQuantizer& stage = q.mse_stage();
  const Eigen::Index n = Eigen::Index(codes.size());
  Eigen::MatrixXd yhat(q.dim(), n);
  Eigen::MatrixXd z(q.width(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const QuantizedVecProd& code = codes[size_t(c)];
    check_prod_code(q, code);
    for (int j = 0; j < q.dim(); ++j)
      yhat(j, c) =
          stage.centroid_value(packed_code_at(code.idx.bytes, code.idx.b, j));
    const double g = q.sketch().scale() * double(code.gamma);
    for (int i = 0; i < q.width(); ++i)
      z(i, c) = (packed_code_at(code.signs.bytes, 1, i) ? 1.0 : -1.0) * g;
  }
  Eigen::MatrixXd out = stage.rotation().apply_transpose_cols(yhat) +
                        q.sketch().matrix_f64().transpose() * z;
  for (Eigen::Index c = 0; c < n; ++c) {
    const float nm = codes[size_t(c)].norm;
    if (nm == 0.0f) {
      out.col(c).setZero();
    } else {
      out.col(c) *= double(nm);
    }
  }
  return out;
}

}  // namespace tbq
