#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace tbq {

enum class RotationKind : uint8_t { DenseQr = 0, FastHadamard = 1 };

/* Seeded random orthogonal transform.
 *
 * DenseQr is the correctness-bearing path: QR of a d x d matrix with i.i.d.
 * N(0,1) entries, Q's columns sign-corrected by the sign of R's diagonal so
 * the result is Haar-uniform. Stored and applied in double precision.
 *
 * FastHadamard is an optional O(d log d) approximation for power-of-two d:
 * three rounds of random sign flips followed by a normalized Walsh-Hadamard
 * transform. Exactly orthogonal, but not Haar-distributed. */
class Rotation {
 public:
  int dim() const { return d_; }
  uint64_t seed() const { return seed_; }
  RotationKind kind() const { return kind_; }

  /* y = Pi x */
  void apply(std::span<const double> x, std::span<double> out) const;
  /* x = Pi^T y */
  void apply_transpose(std::span<const double> y, std::span<double> out) const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;
  /* Batch over columns. */
  Eigen::MatrixXd apply_cols(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply_transpose_cols(const Eigen::MatrixXd& y) const;

  /* Stored matrix (DenseQr only; throws for FastHadamard). */
  const Eigen::MatrixXd& matrix() const;
  /* Materialized matrix for any kind (column i = apply(e_i)). */
  Eigen::MatrixXd dense_matrix() const;

  friend Rotation generate_rotation(uint64_t seed, int d);
  friend Rotation generate_fast_rotation(uint64_t seed, int d);

 private:
  Rotation(RotationKind kind, uint64_t seed, int d)
      : kind_(kind), seed_(seed), d_(d) {}

  void check_dim(size_t n) const;

  RotationKind kind_;
  uint64_t seed_;
  int d_;
  Eigen::MatrixXd matrix_;                        // DenseQr
  std::vector<Eigen::VectorXd> sign_rounds_;      // FastHadamard
};

/* Haar-uniform rotation from the seeded Gaussian stream; deterministic
 * given (seed, d). Rejects d < 1. */
Rotation generate_rotation(uint64_t seed, int d);

/* Sign-flip + Walsh-Hadamard rounds; requires d a power of two. */
Rotation generate_fast_rotation(uint64_t seed, int d);

std::vector<double> rotate(const Rotation& rot, std::span<const double> x);
std::vector<double> rotate_back(const Rotation& rot, std::span<const double> y);

}  // namespace tbq
