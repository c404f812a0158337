#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tbq/index_io.hpp"
#include "tbq/quantizer.hpp"

namespace tbq {

/* Quantized dataset plus the quantizer reconstructed from the header seed.
 * Exactly one of the two quantizer slots is engaged, matching
 * data.header.mode.  Immutable after build/load; concurrent reads are safe. */
struct QuantizedIndex {
  IndexData data;
  std::optional<MseQuantizer> mse_quantizer;
  std::optional<ProdQuantizer> prod_quantizer;

  const IndexHeader& header() const { return data.header; }
  uint64_t size() const { return data.header.n; }
  int dim() const { return int(data.header.d); }
};

/* Quantize all columns of `vectors` (d x n) with one shared quantizer.
 * For PROD mode, m is the sketch width (0 -> d); ignored for MSE.
 * Throws std::invalid_argument on empty input, non-finite values, or
 * unsupported (d, b). */
QuantizedIndex build_index(const Eigen::MatrixXd& vectors, QuantMode mode,
                           int b, uint64_t seed, int m = 0);

void save_index(const std::string& path, const QuantizedIndex& index);
QuantizedIndex load_index(const std::string& path);

/* Top-k result, sorted by (score descending, id ascending). */
struct SearchResult {
  std::vector<int64_t> ids;
  std::vector<double> scores;
};

/* Exhaustive scan: the query-side rotation (and sketch projection) is
 * applied once, then every record is scored through the fast inner-product
 * estimate.  k > n returns n results.  Deterministic given index + query. */
SearchResult search(const QuantizedIndex& index, const Eigen::VectorXd& query,
                    int k);

/* Exact float inner-product argmax per query column; ties to lowest id. */
std::vector<int64_t> exact_ground_truth(const Eigen::MatrixXd& vectors,
                                        const Eigen::MatrixXd& queries);

/* recall[i] = fraction of queries whose true top-1 id appears in the
 * approximate top-k_list[i]. */
struct RecallTable {
  std::vector<int> k_list;
  std::vector<double> recall;
  uint64_t n_queries = 0;
};

RecallTable recall_eval(const QuantizedIndex& index,
                        const Eigen::MatrixXd& queries,
                        const std::vector<int64_t>& ground_truth_top1,
                        const std::vector<int>& k_list);

std::string recall_csv(const RecallTable& table);
void write_recall_csv(const std::string& path, const RecallTable& table);

}  // namespace tbq
