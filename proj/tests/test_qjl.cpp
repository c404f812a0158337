#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tbq/eval.hpp"
#include "tbq/qjl.hpp"
#include "tbq/rng.hpp"

using namespace tbq;

namespace {

std::vector<double> col_vec(const Eigen::MatrixXd& m, int j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

/* Sign bit j of a packed sign stream (LSB-first; 1 means +1). */
int sign_bit(const PackedCodes& signs, size_t j) {
  return (signs.bytes[j / 8] >> (j % 8)) & 1;
}

}  // namespace

TEST_CASE("sketch determinism and seed separation") {
  const QjlSketch a(42, 16, 24);
  const QjlSketch b(42, 16, 24);
  const QjlSketch c(43, 16, 24);
  CHECK(a.matrix().cwiseEqual(b.matrix()).all());
  CHECK((a.matrix() - c.matrix()).norm() > 0.1f);
  CHECK(a.dim() == 16);
  CHECK(a.width() == 24);
  CHECK(a.seed() == 42);
}

TEST_CASE("entries are standard gaussian in aggregate") {
  const QjlSketch sk(7, 1024, 1024);  // 2^20 entries
  const Eigen::MatrixXd s = sk.matrix_f64();
  const double n = double(s.size());
  const double mean = s.sum() / n;
  const double var = (s.array() - mean).square().sum() / (n - 1.0);
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
  // The double mirror is exactly the widened float matrix.
  CHECK((s - sk.matrix().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dequantization scale is sqrt(pi/2)/m") {
  for (int m : {1, 7, 64, 1000}) {
    const QjlSketch sk(3, 4, m);
    CHECK(sk.scale() ==
          doctest::Approx(std::sqrt(std::numbers::pi / 2.0) / m)
              .epsilon(1e-15));
  }
}

TEST_CASE("zero vector: gamma 0, all-positive signs, zero estimates") {
  const QjlSketch sk(5, 12, 20);
  const std::vector<double> zero(12, 0.0);
  const QjlCode code = qjl_quantize(sk, zero);
  CHECK(code.gamma == 0.0f);
  REQUIRE(code.signs.count == 20);
  for (size_t j = 0; j < 20; ++j) CHECK(sign_bit(code.signs, j) == 1);
  const std::vector<double> back = qjl_dequantize(sk, code);
  for (double v : back) CHECK(v == 0.0);
  const std::vector<double> y = col_vec(gaussian_matrix(12, 1, 9), 0);
  CHECK(qjl_inner_estimate(sk, code, y) == 0.0);
}

TEST_CASE("signs are the signs of S*r, packed LSB-first") {
  const int d = 24, m = 37;
  const QjlSketch sk(11, d, m);
  const Eigen::VectorXd r = gaussian_matrix(d, 1, 2).col(0);
  const QjlCode code =
      qjl_quantize(sk, std::span<const double>(r.data(), size_t(d)));
  CHECK(code.gamma == float(r.norm()));
  const Eigen::VectorXd proj = sk.matrix_f64() * r;
  REQUIRE(code.signs.count == size_t(m));
  CHECK(code.signs.b == 1);
  CHECK(code.signs.bytes.size() == size_t((m + 7) / 8));
  for (int j = 0; j < m; ++j)
    CHECK(sign_bit(code.signs, size_t(j)) == (proj[j] >= 0.0 ? 1 : 0));
  // Bits past m in the last byte stay zero (wire contract).
  const int tail = m % 8;
  if (tail != 0) CHECK((code.signs.bytes.back() >> tail) == 0);
}

TEST_CASE("scale equivariance: gamma carries the scale") {
  const int d = 16, m = 32;
  const QjlSketch sk(21, d, m);
  const Eigen::VectorXd r = gaussian_matrix(d, 1, 4).col(0);
  const std::vector<double> y = col_vec(gaussian_matrix(d, 1, 6), 0);
  const QjlCode base =
      qjl_quantize(sk, std::span<const double>(r.data(), size_t(d)));
  const double est = qjl_inner_estimate(sk, base, y);

  for (double alpha : {2.0, 0.25}) {  // exact in float arithmetic
    const Eigen::VectorXd scaled = alpha * r;
    const QjlCode code =
        qjl_quantize(sk, std::span<const double>(scaled.data(), size_t(d)));
    CHECK(code.signs == base.signs);
    CHECK(code.gamma == float(alpha) * base.gamma);
    CHECK(qjl_inner_estimate(sk, code, y) == alpha * est);
  }
  {  // non-dyadic scale: signs still identical, estimate equal to rounding
    const Eigen::VectorXd scaled = 3.0 * r;
    const QjlCode code =
        qjl_quantize(sk, std::span<const double>(scaled.data(), size_t(d)));
    CHECK(code.signs == base.signs);
    CHECK(qjl_inner_estimate(sk, code, y) ==
          doctest::Approx(3.0 * est).epsilon(1e-6));
  }
}

TEST_CASE("estimator identities: dequantize-then-dot and presketched") {
  const int d = 19, m = 45;
  const QjlSketch sk(31, d, m);
  const Eigen::MatrixXd rs = gaussian_matrix(d, 8, 12);
  const Eigen::MatrixXd ys = gaussian_matrix(d, 8, 13);
  for (int j = 0; j < 8; ++j) {
    const std::vector<double> r = col_vec(rs, j), y = col_vec(ys, j);
    const QjlCode code = qjl_quantize(sk, r);
    const double est = qjl_inner_estimate(sk, code, y);

    const std::vector<double> dec = qjl_dequantize(sk, code);
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += y[size_t(i)] * dec[size_t(i)];
    CHECK(est == doctest::Approx(dot).epsilon(1e-10));

    const Eigen::VectorXd sy =
        sk.matrix_f64() * Eigen::Map<const Eigen::VectorXd>(y.data(), d);
    const double pre = qjl_inner_estimate_presketched(
        code, std::span<const double>(sy.data(), size_t(m)), sk.scale());
    CHECK(est == doctest::Approx(pre).epsilon(1e-12));
  }
}

TEST_CASE("unbiased estimator with variance within the analytic bound") {
  // Fixed pair, fresh sketch per trial: the estimate must be unbiased for
  // <r, y> with variance <= (pi/(2m)) * ||y||^2 * gamma^2.
  const int d = 64, m = 64;
  const size_t trials = 10000;
  Eigen::VectorXd r = gaussian_matrix(d, 1, 100).col(0);
  r.normalize();
  const Eigen::VectorXd y = gaussian_matrix(d, 1, 101).col(0);
  const std::vector<double> yv(y.data(), y.data() + d);
  const double truth = r.dot(y);

  double sum = 0.0, sum_sq = 0.0;
  float gamma = 0.0f;
  for (size_t t = 0; t < trials; ++t) {
    const QjlSketch sk(derive_seed(555, "test-unbiased", t), d, m);
    const QjlCode code =
        qjl_quantize(sk, std::span<const double>(r.data(), size_t(d)));
    gamma = code.gamma;
    const double est = qjl_inner_estimate(sk, code, yv);
    sum += est;
    sum_sq += est * est;
  }
  const double mean = sum / double(trials);
  const double var =
      (sum_sq - double(trials) * mean * mean) / double(trials - 1);
  const double std_err = std::sqrt(var / double(trials));
  CHECK(std::abs(mean - truth) <= 4.0 * std_err);

  const double bound = std::numbers::pi / (2.0 * m) * y.squaredNorm() *
                       double(gamma) * double(gamma);
  CHECK(var <= 1.05 * bound);
  CHECK(var >= 0.80 * bound);  // the bound is near-tight for generic pairs
}

TEST_CASE("variance decays like 1/m") {
  const int d = 32;
  const size_t trials = 2000;
  Eigen::VectorXd r = gaussian_matrix(d, 1, 200).col(0);
  r.normalize();
  const Eigen::VectorXd y = gaussian_matrix(d, 1, 201).col(0);
  const std::vector<double> yv(y.data(), y.data() + d);

  auto variance_at = [&](int m, const char* domain) {
    double sum = 0.0, sum_sq = 0.0;
    for (size_t t = 0; t < trials; ++t) {
      const QjlSketch sk(derive_seed(777, domain, t), d, m);
      const QjlCode code =
          qjl_quantize(sk, std::span<const double>(r.data(), size_t(d)));
      const double est = qjl_inner_estimate(sk, code, yv);
      sum += est;
      sum_sq += est * est;
    }
    const double mean = sum / double(trials);
    return (sum_sq - double(trials) * mean * mean) / double(trials - 1);
  };
  const double v64 = variance_at(64, "test-var-64");
  const double v1024 = variance_at(1024, "test-var-1024");
  CHECK(v1024 < v64 / 8.0);  // expected ratio 1/16
}

TEST_CASE("consistency example: r = y = e1") {
  // E[estimate] = <e1, e1> = 1; with m = 4096 each estimate is already
  // tight, and the mean over 1000 sketches pins it within 5%.
  const int d = 8, m = 4096;
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(d);
  e1[0] = 1.0;
  const std::vector<double> yv(e1.data(), e1.data() + d);
  double sum = 0.0;
  for (size_t t = 0; t < 1000; ++t) {
    const QjlSketch sk(derive_seed(888, "test-e1", t), d, m);
    const QjlCode code =
        qjl_quantize(sk, std::span<const double>(e1.data(), size_t(d)));
    CHECK(code.gamma == 1.0f);
    sum += qjl_inner_estimate(sk, code, yv);
  }
  CHECK(sum / 1000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("invalid arguments are rejected") {
  CHECK_THROWS_AS(QjlSketch(1, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(QjlSketch(1, 4, 0), std::invalid_argument);
  const QjlSketch sk(1, 4, 8);
  const std::vector<double> wrong(5, 0.0);
  CHECK_THROWS_AS((void)qjl_quantize(sk, wrong), std::invalid_argument);
  const std::vector<double> ones(4, 1.0);
  QjlCode code = qjl_quantize(sk, ones);
  const std::vector<double> y(4, 1.0);
  QjlCode bad = code;
  bad.signs.count = 7;
  CHECK_THROWS_AS((void)qjl_inner_estimate(sk, bad, y),
                  std::invalid_argument);
  bad = code;
  bad.gamma = -1.0f;
  CHECK_THROWS_AS((void)qjl_dequantize(sk, bad), std::invalid_argument);
}
