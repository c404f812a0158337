#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "tbq/index_io.hpp"
#include "tbq/quantizer.hpp"

namespace tbq {

/* Closed-form distortion bounds at bit width b and dimension d.
 *
 * mse_upper / prod_upper carry the refined constants for b <= 4
 * ({0.36, 0.117, 0.03, 0.009} and {1.57, 0.56, 0.18, 0.047}/d); these are
 * tight targets for the empirical distortion, not provable ceilings (the
 * exact optimal-codebook costs exceed some of them slightly, e.g. 0.0345
 * vs 0.03 at b = 3).  The *_general fields hold the provable closed forms
 * (sqrt(3)*pi/2)*4^{-b} and (sqrt(3)*pi^2/d)*4^{-b}, valid for every b,
 * and are what the sandwich test checks against.  Lower bounds are the
 * rate-distortion floors 4^{-b} and 4^{-b}/d. */
struct BoundSet {
  int b = 1;
  int d = 1;
  double mse_upper = 0.0;
  double mse_lower = 0.0;
  double prod_upper = 0.0;
  double prod_lower = 0.0;
  double mse_upper_general = 0.0;
  double prod_upper_general = 0.0;
};

/* b >= 1, d >= 1 required. */
BoundSet theoretical_bounds(int b, int d);

struct MeanStderr {
  double mean = 0.0;
  double std_err = 0.0;
  uint64_t n = 0;
};

/* Monte-Carlo mean of ||x - dequant(quant(x))||^2 over the first `trials`
 * columns of `vectors` (normalized to unit length first).  One fixed
 * quantizer; multi-seed pooling is the report driver's job.
 * Throws std::invalid_argument on empty input, trials = 0,
 * trials > #columns, or a zero column. */
MeanStderr empirical_mse(const MseQuantizer& quantizer,
                         const Eigen::MatrixXd& vectors, uint64_t trials);

struct ProdErrorStats {
  /* mean of (estimate - <y, xhat>) / ||y||      (signed bias) */
  double bias = 0.0;
  double bias_std_err = 0.0;
  /* mean of (estimate - <y, xhat>)^2 / ||y||^2  (normalized sq. error) */
  double mse = 0.0;
  double mse_std_err = 0.0;
  uint64_t n = 0;
};

/* Inner-product estimator error over pairs (vectors[:,j], queries[:,j]),
 * j < trials.  Data vectors are normalized to unit length; queries keep
 * their norm (errors are normalized per-trial by it; zero queries
 * contribute exactly 0).  Overloads cover both quantizer modes. */
ProdErrorStats empirical_prod_error(const ProdQuantizer& quantizer,
                                    const Eigen::MatrixXd& vectors,
                                    const Eigen::MatrixXd& queries,
                                    uint64_t trials);
ProdErrorStats empirical_prod_error(const MseQuantizer& quantizer,
                                    const Eigen::MatrixXd& vectors,
                                    const Eigen::MatrixXd& queries,
                                    uint64_t trials);

/* Multiplicative bias of the MSE-mode inner-product estimator, measured on
 * self-pairs y = xhat (true product exactly 1, so the per-trial ratio is
 * just the estimate).  The estimator satisfies E[estimate] = (1 - C_b) *
 * <y, x> for any fixed pair, where C_b is the relative quantizer MSE;
 * self-pairs measure that constant with the smallest variance.
 * Expected: 2/pi at b = 1, within 1% of 1 at b = 4. */
MeanStderr mse_bias_ratio(int b, int d, uint64_t master_seed, int n_seeds,
                          uint64_t pairs_per_seed);

/* Sweep configuration for distortion_report. */
struct EvalConfig {
  std::vector<QuantMode> modes{QuantMode::MSE, QuantMode::PROD};
  std::vector<int> bits{1, 2, 3, 4, 5, 6};
  int d = 1024;
  int m = 0;               /* PROD sketch width; 0 -> d */
  uint64_t trials = 2000;  /* vectors per quantizer seed */
  int seeds = 50;          /* independent quantizer seeds */
  uint64_t master_seed = 42;
  std::string csv_path;    /* empty -> not written */
  std::string json_path;
  std::string histogram_path;
  int histogram_bins = 50;
};

/* One report row; mirrors the CSV columns
 * mode,b,d,n_trials,metric,empirical,stderr,upper,lower,ratio_upper,
 * ratio_lower,pass. */
struct DistortionRow {
  std::string mode;    /* "mse" | "prod" */
  int b = 0;
  int d = 0;
  uint64_t n_trials = 0;
  std::string metric;  /* "mse" | "prod_mse" | "bias" */
  double empirical = 0.0;
  double std_err = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  double ratio_upper = 0.0;
  double ratio_lower = 0.0;
  bool pass = true;
};

struct DistortionReport {
  EvalConfig config;
  std::vector<DistortionRow> rows;
  bool all_pass = true;

  std::string to_csv() const;
  std::string to_json() const;
};

/* Full sweep over config.modes x config.bits.  Per (mode, b): a fresh
 * quantizer and fresh input vectors for each of config.seeds derived seeds,
 * config.trials vectors each.  Distortion rows pass iff
 * lower*(1-eps) <= empirical <= upper_general*(1+eps) with
 * eps = 3*stderr/mean; bias rows pass iff |bias| <= 4*stderr.
 * Deterministic given config.master_seed.  Writes CSV/JSON/histograms to
 * the configured paths when non-empty. */
DistortionReport distortion_report(const EvalConfig& config);

/* Deterministic synthetic data: d x n column-major i.i.d. N(0,1), and the
 * same with unit-normalized columns (uniform on the sphere). */
Eigen::MatrixXd gaussian_matrix(int d, uint64_t n, uint64_t seed);
Eigen::MatrixXd unit_sphere_matrix(int d, uint64_t n, uint64_t seed);

}  // namespace tbq
