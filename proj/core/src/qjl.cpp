#include "tbq/qjl.hpp"

#include <cmath>
#include <stdexcept>

#include "tbq/rng.hpp"

namespace tbq {

namespace {

void check_code(const QjlSketch& sk, const QjlCode& code) {
  if (code.signs.b != 1 || code.signs.count != size_t(sk.width()))
    throw std::invalid_argument("qjl: code does not match sketch width");
  if (!(code.gamma >= 0.0f)) throw std::invalid_argument("qjl: gamma < 0");
}

}  // namespace

QjlSketch::QjlSketch(uint64_t seed, int d, int m)
    : seed_(seed), d_(d), m_(m) {
  if (d < 1 || m < 1)
    throw std::invalid_argument("QjlSketch: d and m must be >= 1");
  GaussianStream g(seed);
  s_.resize(m, d);
  // Column-major fill so the draw order is layout-independent and pinned.
  for (Eigen::Index i = 0; i < s_.size(); ++i) s_.data()[i] = float(g.next());
  s64_ = s_.cast<double>();
}

double QjlSketch::scale() const { return std::sqrt(M_PI / 2.0) / m_; }

QjlCode qjl_quantize(const QjlSketch& sk, std::span<const double> r) {
  if (r.size() != size_t(sk.dim()))
    throw std::invalid_argument("qjl_quantize: dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> rv(r.data(), sk.dim());
  const Eigen::VectorXd proj = sk.matrix_f64() * rv;
  std::vector<uint32_t> bits(sk.width());
  for (int i = 0; i < sk.width(); ++i) bits[i] = proj[i] >= 0.0 ? 1u : 0u;
  QjlCode code;
  code.signs = pack_indices(bits, 1);
  code.gamma = float(rv.norm());
  return code;
}

std::vector<double> qjl_dequantize(const QjlSketch& sk, const QjlCode& code) {
  check_code(sk, code);
  std::vector<double> out(sk.dim(), 0.0);
  if (code.gamma == 0.0f) return out;
  Eigen::VectorXd z(sk.width());
  for (int i = 0; i < sk.width(); ++i)
    z[i] = packed_code_at(code.signs.bytes, 1, i) ? 1.0 : -1.0;
  Eigen::Map<Eigen::VectorXd> ov(out.data(), sk.dim());
  ov = sk.matrix_f64().transpose() * z * (sk.scale() * double(code.gamma));
  return out;
}

double qjl_inner_estimate(const QjlSketch& sk, const QjlCode& code,
                          std::span<const double> y) {
  if (y.size() != size_t(sk.dim()))
    throw std::invalid_argument("qjl_inner_estimate: dimension mismatch");
  check_code(sk, code);
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), sk.dim());
  const Eigen::VectorXd sy = sk.matrix_f64() * yv;
  return qjl_inner_estimate_presketched(
      code, std::span<const double>(sy.data(), size_t(sk.width())),
      sk.scale());
}

double qjl_inner_estimate_presketched(const QjlCode& code,
                                      std::span<const double> sy,
                                      double scale) {
  if (sy.size() != code.signs.count)
    throw std::invalid_argument("qjl estimate: sketch width mismatch");
  if (code.gamma == 0.0f) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < sy.size(); ++i)
    acc += packed_code_at(code.signs.bytes, 1, i) ? sy[i] : -sy[i];
  return scale * double(code.gamma) * acc;
}

}  // namespace tbq
