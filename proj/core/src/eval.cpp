#include "tbq/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "tbq/packing.hpp"
#include "tbq/qjl.hpp"
#include "tbq/rng.hpp"

namespace tbq {

namespace {

constexpr double kPi = std::numbers::pi;

/* Refined distortion constants for small b (tight empirical targets). */
constexpr double kMseRefined[4] = {0.36, 0.117, 0.03, 0.009};
constexpr double kProdRefined[4] = {1.57, 0.56, 0.18, 0.047};

MeanStderr stats_of(const double* v, uint64_t n) {
  MeanStderr s;
  s.n = n;
  if (n == 0) return s;
  double sum = 0.0;
  for (uint64_t i = 0; i < n; ++i) sum += v[i];
  s.mean = sum / double(n);
  if (n < 2) return s;
  double ss = 0.0;
  for (uint64_t i = 0; i < n; ++i) {
    const double dlt = v[i] - s.mean;
    ss += dlt * dlt;
  }
  const double var = ss / double(n - 1);
  s.std_err = std::sqrt(var / double(n));
  return s;
}

MeanStderr stats_of(const std::vector<double>& v) {
  return stats_of(v.data(), v.size());
}

/* Unit-normalize the first `trials` columns into a fresh matrix. */
Eigen::MatrixXd normalized_cols(const Eigen::MatrixXd& x, uint64_t trials,
                                const char* who) {
  Eigen::MatrixXd out(x.rows(), Eigen::Index(trials));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double nm = x.col(j).norm();
    if (nm == 0.0)
      throw std::invalid_argument(std::string(who) +
                                  ": zero vector cannot be normalized");
    out.col(j) = x.col(j) / nm;
  }
  return out;
}

/* Per-column squared reconstruction error for unit inputs. */
Eigen::VectorXd mse_sq_errors(const MseQuantizer& q, const Eigen::MatrixXd& xn) {
  const std::vector<QuantizedVecMse> codes = quant_mse_batch(q, xn);
  const Eigen::MatrixXd rec = dequant_mse_batch(q, codes);
  return (xn - rec).colwise().squaredNorm().transpose();
}

struct PairErrors {
  std::vector<double> bias;  /* (est - true)/||y|| */
  std::vector<double> sq;    /* (est - true)^2/||y||^2 */
};

/* Shared per-pair accumulation; `estimate(j)` returns the estimator value
 * for pair j. */
template <typename EstimateFn>
PairErrors pair_errors_impl(const Eigen::MatrixXd& xn, const Eigen::MatrixXd& y,
                            EstimateFn&& estimate) {
  const Eigen::Index t = xn.cols();
  PairErrors pe;
  pe.bias.resize(size_t(t));
  pe.sq.resize(size_t(t));
  for (Eigen::Index j = 0; j < t; ++j) {
    const double ny = y.col(j).norm();
    if (ny == 0.0) {
      pe.bias[size_t(j)] = 0.0;
      pe.sq[size_t(j)] = 0.0;
      continue;
    }
    const double tru = xn.col(j).dot(y.col(j));
    const double e = (estimate(j) - tru) / ny;
    pe.bias[size_t(j)] = e;
    pe.sq[size_t(j)] = e * e;
  }
  return pe;
}

PairErrors prod_pair_errors(const ProdQuantizer& q, const Eigen::MatrixXd& xn,
                            const Eigen::MatrixXd& y) {
  const std::vector<QuantizedVecProd> codes = quant_prod_batch(q, xn);
  const MseQuantizer& stage = q.mse_stage();
  const Eigen::MatrixXd yrot = stage.rotation().apply_cols(y);
  const Eigen::MatrixXd sy = q.sketch().matrix_f64() * y;
  const double scale = q.sketch().scale();
  const int d = q.dim();
  const size_t m = size_t(q.width());
  return pair_errors_impl(xn, y, [&](Eigen::Index j) {
    const std::vector<uint32_t> idx = unpack_indices(codes[size_t(j)].idx);
    double s1 = 0.0;
    for (int i = 0; i < d; ++i) s1 += yrot(i, j) * stage.centroid_value(idx[size_t(i)]);
    const QjlCode code{codes[size_t(j)].signs, codes[size_t(j)].gamma};
    const double s2 = qjl_inner_estimate_presketched(
        code, std::span<const double>(sy.col(j).data(), m), scale);
    return double(codes[size_t(j)].norm) * (s1 + s2);
  });
}

PairErrors mse_pair_errors(const MseQuantizer& q, const Eigen::MatrixXd& xn,
                           const Eigen::MatrixXd& y) {
  const std::vector<QuantizedVecMse> codes = quant_mse_batch(q, xn);
  const Eigen::MatrixXd yrot = q.rotation().apply_cols(y);
  const int d = q.dim();
  return pair_errors_impl(xn, y, [&](Eigen::Index j) {
    const std::vector<uint32_t> idx = unpack_indices(codes[size_t(j)].idx);
    double s1 = 0.0;
    for (int i = 0; i < d; ++i) s1 += yrot(i, j) * q.centroid_value(idx[size_t(i)]);
    return double(codes[size_t(j)].norm) * s1;
  });
}

void check_pair_inputs(int dim, const Eigen::MatrixXd& vectors,
                       const Eigen::MatrixXd& queries, uint64_t trials,
                       const char* who) {
  if (vectors.cols() == 0 || queries.cols() == 0)
    throw std::invalid_argument(std::string(who) + ": empty input");
  if (vectors.rows() != dim || queries.rows() != dim)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  if (trials == 0 || trials > uint64_t(vectors.cols()) ||
      trials > uint64_t(queries.cols()))
    throw std::invalid_argument(std::string(who) + ": invalid trial count");
}

ProdErrorStats stats_from_pairs(const PairErrors& pe) {
  ProdErrorStats st;
  const MeanStderr bias = stats_of(pe.bias);
  const MeanStderr sq = stats_of(pe.sq);
  st.bias = bias.mean;
  st.bias_std_err = bias.std_err;
  st.mse = sq.mean;
  st.mse_std_err = sq.std_err;
  st.n = bias.n;
  return st;
}

uint64_t stream_key(int b, int seed_index) {
  return (uint64_t(uint32_t(b)) << 32) | uint64_t(uint32_t(seed_index));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failure on " + path);
}

void append_histogram(std::string& hist, const std::string& mode, int b,
                      const std::vector<double>& values, int bins) {
  if (values.empty() || bins < 1) return;
  double hi = *std::max_element(values.begin(), values.end());
  if (hi <= 0.0) hi = 1.0;
  const double width = hi / bins;
  std::vector<uint64_t> counts(size_t(bins), 0);
  for (double v : values) {
    int bin = int(v / width);
    bin = std::clamp(bin, 0, bins - 1);
    ++counts[size_t(bin)];
  }
  std::ostringstream os;
  os << std::setprecision(10);
  for (int i = 0; i < bins; ++i)
    os << mode << ',' << b << ',' << width * i << ',' << width * (i + 1) << ','
       << counts[size_t(i)] << '\n';
  hist += os.str();
}

bool sandwich_pass(double emp, double se, double lo, double hi) {
  const double eps = emp > 0.0 ? 3.0 * se / emp : 0.0;
  return emp >= lo * (1.0 - eps) && emp <= hi * (1.0 + eps);
}

double safe_ratio(double num, double den) { return den != 0.0 ? num / den : 0.0; }

}  // namespace

BoundSet theoretical_bounds(int b, int d) {
  if (b < 1 || d < 1)
    throw std::invalid_argument("theoretical_bounds: need b >= 1, d >= 1");
  BoundSet bs;
  bs.b = b;
  bs.d = d;
  const double four_pow = std::exp2(-2.0 * b);
  bs.mse_upper_general = 0.5 * std::sqrt(3.0) * kPi * four_pow;
  bs.prod_upper_general = std::sqrt(3.0) * kPi * kPi * four_pow / d;
  bs.mse_lower = four_pow;
  bs.prod_lower = four_pow / d;
  if (b <= 4) {
    bs.mse_upper = kMseRefined[b - 1];
    bs.prod_upper = kProdRefined[b - 1] / d;
  } else {
    bs.mse_upper = bs.mse_upper_general;
    bs.prod_upper = bs.prod_upper_general;
  }
  return bs;
}

MeanStderr empirical_mse(const MseQuantizer& quantizer,
                         const Eigen::MatrixXd& vectors, uint64_t trials) {
  if (vectors.cols() == 0)
    throw std::invalid_argument("empirical_mse: empty input");
  if (vectors.rows() != quantizer.dim())
    throw std::invalid_argument("empirical_mse: dimension mismatch");
  if (trials == 0 || trials > uint64_t(vectors.cols()))
    throw std::invalid_argument("empirical_mse: invalid trial count");
  const Eigen::MatrixXd xn = normalized_cols(vectors, trials, "empirical_mse");
  const Eigen::VectorXd errs = mse_sq_errors(quantizer, xn);
  return stats_of(errs.data(), uint64_t(errs.size()));
}

ProdErrorStats empirical_prod_error(const ProdQuantizer& quantizer,
                                    const Eigen::MatrixXd& vectors,
                                    const Eigen::MatrixXd& queries,
                                    uint64_t trials) {
  check_pair_inputs(quantizer.dim(), vectors, queries, trials,
                    "empirical_prod_error");
  const Eigen::MatrixXd xn =
      normalized_cols(vectors, trials, "empirical_prod_error");
  const Eigen::MatrixXd y = queries.leftCols(Eigen::Index(trials));
  return stats_from_pairs(prod_pair_errors(quantizer, xn, y));
}

ProdErrorStats empirical_prod_error(const MseQuantizer& quantizer,
                                    const Eigen::MatrixXd& vectors,
                                    const Eigen::MatrixXd& queries,
                                    uint64_t trials) {
  check_pair_inputs(quantizer.dim(), vectors, queries, trials,
                    "empirical_prod_error");
  const Eigen::MatrixXd xn =
      normalized_cols(vectors, trials, "empirical_prod_error");
  const Eigen::MatrixXd y = queries.leftCols(Eigen::Index(trials));
  return stats_from_pairs(mse_pair_errors(quantizer, xn, y));
}

MeanStderr mse_bias_ratio(int b, int d, uint64_t master_seed, int n_seeds,
                          uint64_t pairs_per_seed) {
  if (n_seeds < 1 || pairs_per_seed < 1)
    throw std::invalid_argument("mse_bias_ratio: empty trial budget");
  std::vector<double> ratios;
  ratios.reserve(size_t(n_seeds) * pairs_per_seed);
  for (int i = 0; i < n_seeds; ++i) {
    const MseQuantizer q(
        d, b, derive_seed(master_seed, "bias-quantizer", stream_key(b, i)));
    const Eigen::MatrixXd xn = unit_sphere_matrix(
        d, pairs_per_seed,
        derive_seed(master_seed, "bias-vectors", stream_key(b, i)));
    const std::vector<QuantizedVecMse> codes = quant_mse_batch(q, xn);
    const Eigen::MatrixXd xrot = q.rotation().apply_cols(xn);
    /* Self-pairs: true product is exactly 1, the ratio is the estimate. */
    for (Eigen::Index j = 0; j < xn.cols(); ++j) {
      const std::vector<uint32_t> idx = unpack_indices(codes[size_t(j)].idx);
      double est = 0.0;
      for (int r = 0; r < d; ++r) est += xrot(r, j) * q.centroid_value(idx[size_t(r)]);
      ratios.push_back(double(codes[size_t(j)].norm) * est);
    }
  }
  return stats_of(ratios);
}

std::string DistortionReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "mode,b,d,n_trials,metric,empirical,stderr,upper,lower,ratio_upper,"
        "ratio_lower,pass\n";
  for (const DistortionRow& r : rows)
    os << r.mode << ',' << r.b << ',' << r.d << ',' << r.n_trials << ','
       << r.metric << ',' << r.empirical << ',' << r.std_err << ',' << r.upper
       << ',' << r.lower << ',' << r.ratio_upper << ',' << r.ratio_lower << ','
       << (r.pass ? 1 : 0) << '\n';
  return os.str();
}

std::string DistortionReport::to_json() const {
  nlohmann::json j;
  nlohmann::json modes = nlohmann::json::array();
  for (QuantMode m : config.modes)
    modes.push_back(m == QuantMode::MSE ? "mse" : "prod");
  j["config"] = {{"modes", modes},
                 {"bits", config.bits},
                 {"d", config.d},
                 {"m", config.m},
                 {"trials", config.trials},
                 {"seeds", config.seeds},
                 {"master_seed", config.master_seed}};
  j["all_pass"] = all_pass;
  nlohmann::json rows_json = nlohmann::json::array();
  for (const DistortionRow& r : rows)
    rows_json.push_back({{"mode", r.mode},
                         {"b", r.b},
                         {"d", r.d},
                         {"n_trials", r.n_trials},
                         {"metric", r.metric},
                         {"empirical", r.empirical},
                         {"stderr", r.std_err},
                         {"upper", r.upper},
                         {"lower", r.lower},
                         {"ratio_upper", r.ratio_upper},
                         {"ratio_lower", r.ratio_lower},
                         {"pass", r.pass}});
  j["rows"] = rows_json;
  return j.dump(2);
}

DistortionReport distortion_report(const EvalConfig& config) {
  if (config.d < 2)
    throw std::invalid_argument("distortion_report: need d >= 2");
  if (config.trials == 0 || config.seeds < 1)
    throw std::invalid_argument("distortion_report: empty trial budget");
  for (int b : config.bits)
    if (b < 1 || b > 8)
      throw std::invalid_argument("distortion_report: bits must be in 1..8");

  DistortionReport rep;
  rep.config = config;
  std::string hist = "mode,b,bin_lo,bin_hi,count\n";
  const uint64_t total = uint64_t(config.seeds) * config.trials;

  for (QuantMode mode : config.modes) {
    for (int b : config.bits) {
      const BoundSet bs = theoretical_bounds(b, config.d);
      if (mode == QuantMode::MSE) {
        std::vector<double> errs;
        errs.reserve(total);
        for (int i = 0; i < config.seeds; ++i) {
          const MseQuantizer q(
              config.d, b,
              derive_seed(config.master_seed, "mse-quantizer", stream_key(b, i)));
          const Eigen::MatrixXd xn = unit_sphere_matrix(
              config.d, config.trials,
              derive_seed(config.master_seed, "mse-vectors", stream_key(b, i)));
          const Eigen::VectorXd e = mse_sq_errors(q, xn);
          errs.insert(errs.end(), e.data(), e.data() + e.size());
        }
        const MeanStderr st = stats_of(errs);
        DistortionRow row;
        row.mode = "mse";
        row.b = b;
        row.d = config.d;
        row.n_trials = st.n;
        row.metric = "mse";
        row.empirical = st.mean;
        row.std_err = st.std_err;
        row.upper = bs.mse_upper_general;
        row.lower = bs.mse_lower;
        row.ratio_upper = safe_ratio(st.mean, row.upper);
        row.ratio_lower = safe_ratio(st.mean, row.lower);
        row.pass = sandwich_pass(st.mean, st.std_err, row.lower, row.upper);
        rep.rows.push_back(std::move(row));
        if (!config.histogram_path.empty())
          append_histogram(hist, "mse", b, errs, config.histogram_bins);
      } else {
        std::vector<double> biases, sqs;
        biases.reserve(total);
        sqs.reserve(total);
        for (int i = 0; i < config.seeds; ++i) {
          const ProdQuantizer q(
              config.d, b,
              derive_seed(config.master_seed, "prod-quantizer", stream_key(b, i)),
              config.m);
          const Eigen::MatrixXd xn = unit_sphere_matrix(
              config.d, config.trials,
              derive_seed(config.master_seed, "prod-vectors", stream_key(b, i)));
          const Eigen::MatrixXd y = gaussian_matrix(
              config.d, config.trials,
              derive_seed(config.master_seed, "prod-queries", stream_key(b, i)));
          const PairErrors pe = prod_pair_errors(q, xn, y);
          biases.insert(biases.end(), pe.bias.begin(), pe.bias.end());
          sqs.insert(sqs.end(), pe.sq.begin(), pe.sq.end());
        }
        const MeanStderr sq_st = stats_of(sqs);
        DistortionRow mse_row;
        mse_row.mode = "prod";
        mse_row.b = b;
        mse_row.d = config.d;
        mse_row.n_trials = sq_st.n;
        mse_row.metric = "prod_mse";
        mse_row.empirical = sq_st.mean;
        mse_row.std_err = sq_st.std_err;
        mse_row.upper = bs.prod_upper_general;
        mse_row.lower = bs.prod_lower;
        mse_row.ratio_upper = safe_ratio(sq_st.mean, mse_row.upper);
        mse_row.ratio_lower = safe_ratio(sq_st.mean, mse_row.lower);
        mse_row.pass =
            sandwich_pass(sq_st.mean, sq_st.std_err, mse_row.lower, mse_row.upper);
        rep.rows.push_back(std::move(mse_row));

        const MeanStderr bias_st = stats_of(biases);
        DistortionRow bias_row;
        bias_row.mode = "prod";
        bias_row.b = b;
        bias_row.d = config.d;
        bias_row.n_trials = bias_st.n;
        bias_row.metric = "bias";
        bias_row.empirical = bias_st.mean;
        bias_row.std_err = bias_st.std_err;
        bias_row.upper = 4.0 * bias_st.std_err;
        bias_row.lower = -4.0 * bias_st.std_err;
        bias_row.ratio_upper = safe_ratio(bias_st.mean, bias_row.upper);
        bias_row.ratio_lower = safe_ratio(bias_st.mean, bias_row.lower);
        bias_row.pass = bias_st.std_err > 0.0
                            ? std::abs(bias_st.mean) <= 4.0 * bias_st.std_err
                            : bias_st.mean == 0.0;
        rep.rows.push_back(std::move(bias_row));
        if (!config.histogram_path.empty())
          append_histogram(hist, "prod", b, sqs, config.histogram_bins);
      }
    }
  }

  rep.all_pass = true;
  for (const DistortionRow& r : rep.rows) rep.all_pass = rep.all_pass && r.pass;

  if (!config.csv_path.empty()) write_text_file(config.csv_path, rep.to_csv());
  if (!config.json_path.empty())
    write_text_file(config.json_path, rep.to_json());
  if (!config.histogram_path.empty())
    write_text_file(config.histogram_path, hist);
  return rep;
}

Eigen::MatrixXd gaussian_matrix(int d, uint64_t n, uint64_t seed) {
  if (d < 1) throw std::invalid_argument("gaussian_matrix: need d >= 1");
  Eigen::MatrixXd out(d, Eigen::Index(n));
  GaussianStream g(seed);
  g.fill(out.data(), size_t(d) * n);
  return out;
}

Eigen::MatrixXd unit_sphere_matrix(int d, uint64_t n, uint64_t seed) {
  Eigen::MatrixXd out = gaussian_matrix(d, n, seed);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double nm = out.col(j).norm();
    if (nm > 0.0) {
      out.col(j) /= nm;
    } else {
      out.col(j).setZero();
      out(0, j) = 1.0;
    }
  }
  return out;
}

}  // namespace tbq
