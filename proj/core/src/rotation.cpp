#include "tbq/rotation.hpp"

#include <cmath>
#include <stdexcept>

#include "tbq/rng.hpp"

namespace tbq {

namespace {

constexpr int kHadamardRounds = 3;

bool is_pow2(int d) { return d >= 1 && (d & (d - 1)) == 0; }

/* In-place Walsh-Hadamard transform (unnormalized butterflies). */
void fwht(Eigen::VectorXd& v) {
  const int n = int(v.size());
  for (int len = 1; len < n; len <<= 1) {
    for (int i = 0; i < n; i += len << 1) {
      for (int j = i; j < i + len; ++j) {
        const double a = v[j], b = v[j + len];
        v[j] = a + b;
        v[j + len] = a - b;
      }
    }
  }
}

}  // namespace

Rotation generate_rotation(uint64_t seed, int d) {
  if (d < 1) throw std::invalid_argument("generate_rotation: d must be >= 1");
  Rotation rot(RotationKind::DenseQr, seed, d);
  GaussianStream g(seed);
  Eigen::MatrixXd a(d, d);
  // Filled column-major so layout matches the stream order deterministically.
  g.fill(a.data(), size_t(d) * d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const auto r_diag = qr.matrixQR().diagonal();
  for (int j = 0; j < d; ++j)
    if (r_diag[j] < 0.0) q.col(j) = -q.col(j);
  rot.matrix_ = std::move(q);
  return rot;
}

Rotation generate_fast_rotation(uint64_t seed, int d) {
  if (!is_pow2(d))
    throw std::invalid_argument(
        "generate_fast_rotation: d must be a power of two");
  Rotation rot(RotationKind::FastHadamard, seed, d);
  GaussianStream g(seed);
  rot.sign_rounds_.reserve(kHadamardRounds);
  for (int r = 0; r < kHadamardRounds; ++r) {
    Eigen::VectorXd s(d);
    for (int i = 0; i < d; ++i) s[i] = g.next() >= 0.0 ? 1.0 : -1.0;
    rot.sign_rounds_.push_back(std::move(s));
  }
  return rot;
}

void Rotation::check_dim(size_t n) const {
  if (n != size_t(d_))
    throw std::invalid_argument("rotation: dimension mismatch");
}

Eigen::VectorXd Rotation::apply(const Eigen::VectorXd& x) const {
  check_dim(x.size());
  if (kind_ == RotationKind::DenseQr) return matrix_ * x;
  Eigen::VectorXd v = x;
  const double scale = 1.0 / std::sqrt(double(d_));
  for (const auto& s : sign_rounds_) {
    v.array() *= s.array();
    fwht(v);
    v *= scale;
  }
  return v;
}

Eigen::VectorXd Rotation::apply_transpose(const Eigen::VectorXd& y) const {
  check_dim(y.size());
  if (kind_ == RotationKind::DenseQr) return matrix_.transpose() * y;
  Eigen::VectorXd v = y;
  const double scale = 1.0 / std::sqrt(double(d_));
  for (auto it = sign_rounds_.rbegin(); it != sign_rounds_.rend(); ++it) {
    fwht(v);
    v *= scale;
    v.array() *= it->array();
  }
  return v;
}

void Rotation::apply(std::span<const double> x, std::span<double> out) const {
  check_dim(x.size());
  check_dim(out.size());
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), d_);
  Eigen::VectorXd r = apply(Eigen::VectorXd(xv));
  Eigen::Map<Eigen::VectorXd>(out.data(), d_) = r;
}

void Rotation::apply_transpose(std::span<const double> y,
                               std::span<double> out) const {
  check_dim(y.size());
  check_dim(out.size());
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), d_);
  Eigen::VectorXd r = apply_transpose(Eigen::VectorXd(yv));
  Eigen::Map<Eigen::VectorXd>(out.data(), d_) = r;
}

Eigen::MatrixXd Rotation::apply_cols(const Eigen::MatrixXd& x) const {
  check_dim(x.rows());
  if (kind_ == RotationKind::DenseQr) return matrix_ * x;
  Eigen::MatrixXd out(d_, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    out.col(c) = apply(Eigen::VectorXd(x.col(c)));
  return out;
}

Eigen::MatrixXd Rotation::apply_transpose_cols(const Eigen::MatrixXd& y) const {
  check_dim(y.rows());
  if (kind_ == RotationKind::DenseQr) return matrix_.transpose() * y;
  Eigen::MatrixXd out(d_, y.cols());
  for (Eigen::Index c = 0; c < y.cols(); ++c)
    out.col(c) = apply_transpose(Eigen::VectorXd(y.col(c)));
  return out;
}

const Eigen::MatrixXd& Rotation::matrix() const {
  if (kind_ != RotationKind::DenseQr)
    throw std::logic_error("rotation: no stored matrix for FastHadamard");
  return matrix_;
}

Eigen::MatrixXd Rotation::dense_matrix() const {
  if (kind_ == RotationKind::DenseQr) return matrix_;
  return apply_cols(Eigen::MatrixXd::Identity(d_, d_));
}

std::vector<double> rotate(const Rotation& rot, std::span<const double> x) {
  std::vector<double> out(x.size());
  rot.apply(x, out);
  return out;
}

std::vector<double> rotate_back(const Rotation& rot,
                                std::span<const double> y) {
  std::vector<double> out(y.size());
  rot.apply_transpose(y, out);
  return out;
}

}  // namespace tbq
